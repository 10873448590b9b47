/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The cusense Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cusense/e3/messages.hpp"
#include "cusense/e3/transport.hpp"
#include "cusense/telemetry/plane.hpp"

namespace cusense::e3 {

using ControlHook = std::function<Status(const ControlRequest&)>;

struct AgentConfig {
  std::string endpoint{"unix:/tmp/cusense_e3.sock"};
  std::string plane_name;  // empty = default_plane_name()
  std::uint32_t agent_id{1};
  std::vector<RanFunction> functions{{kDuLowTelemetry, "DU-Low-telemetry"}};
  // Indications queued beyond this many unsent bytes per manager are dropped.
  std::size_t send_buffer_limit{1u << 20};
};

struct AgentStats {
  std::uint64_t sessions_accepted{0};
  std::uint64_t indications_sent{0};
  std::uint64_t indications_dropped{0};
  std::uint64_t stale_skipped{0};  // writes lapped before the agent could describe them
  std::uint64_t control_requests{0};
};

// Serves E3 sessions over one listening endpoint. Reads the telemetry plane
// through its own read-only mapping and follows the writer's doorbell.
class E3Agent {
 public:
  explicit E3Agent(AgentConfig config, ControlHook hook = {});
  ~E3Agent();
  E3Agent(const E3Agent&) = delete;
  E3Agent& operator=(const E3Agent&) = delete;

  // Binds the endpoint and starts the service threads; throws on failure.
  void start();
  void stop();
  bool running() const noexcept { return running_.load(); }

  AgentStats stats() const;
  std::size_t active_sessions() const;
  const AgentConfig& config() const noexcept { return config_; }

 private:
  struct Session;

  void accept_loop();
  void session_loop(std::shared_ptr<Session> session);
  void indication_loop();
  void handle(Session& session, const E3Message& msg);
  void reap_sessions();

  AgentConfig config_;
  ControlHook hook_;
  std::atomic<bool> running_{false};
  std::unique_ptr<telemetry::TelemetryPlane> plane_;
  Socket listener_;
  std::thread acceptor_;
  std::thread indicator_;

  mutable std::mutex sessions_mu_;
  std::vector<std::shared_ptr<Session>> sessions_;

  mutable std::mutex stats_mu_;
  AgentStats stats_;
};

}  // namespace cusense::e3
