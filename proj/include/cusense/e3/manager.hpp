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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "cusense/e3/messages.hpp"
#include "cusense/e3/transport.hpp"

namespace cusense::e3 {

struct ManagerConfig {
  std::uint32_t manager_id{1};
  std::chrono::milliseconds handshake_timeout{2000};
  std::chrono::milliseconds response_timeout{2000};
};

struct ReceivedIndication {
  std::uint32_t agent_id{0};
  Indication indication;
  std::uint64_t rx_ns{0};  // monotonic clock when the frame was decoded
};

// Manager side of E3. One receive thread services every connected agent;
// the public methods may be called from any thread.
class E3Manager {
 public:
  explicit E3Manager(ManagerConfig config = {});
  ~E3Manager();
  E3Manager(const E3Manager&) = delete;
  E3Manager& operator=(const E3Manager&) = delete;

  // Connects and completes the setup handshake. Throws TimeoutError when the
  // agent is unreachable or silent past handshake_timeout.
  SetupResponse connect(const std::string& endpoint);

  Status subscribe(std::uint32_t agent_id, const SubscriptionRequest& req);
  Status control(std::uint32_t agent_id, const ControlRequest& req);

  // Next indication in arrival order, or nullopt on timeout.
  std::optional<ReceivedIndication> recv(std::chrono::nanoseconds timeout);
  std::size_t pending_indications() const;

  bool connected(std::uint32_t agent_id) const;
  std::size_t connected_agents() const;
  void close();

 private:
  struct Link;

  void rx_loop();
  void dispatch(Link& link, E3Message msg);
  void drop_link(Link& link, const std::string& why);
  std::shared_ptr<Link> find_link(std::uint32_t agent_id) const;
  E3Message await_response(Link& link, MsgType type, std::uint32_t id);

  ManagerConfig config_;
  std::atomic<bool> running_{true};
  std::thread rx_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint32_t, std::shared_ptr<Link>> links_;
  std::deque<ReceivedIndication> indications_;
};

}  // namespace cusense::e3
