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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cusense/dapp/backend.hpp"
#include "cusense/tracking/tracking.hpp"

namespace cusense::dapp {

class DappError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SubscriptionSpec {
  DataType data_type{DataType::kHest};
  std::uint32_t period_ttis{1};
  std::uint32_t duration_ttis{0};
};

struct DappConfig {
  std::string endpoint{"unix:/tmp/cusense_e3.sock"};
  std::string plane_name;  // empty = default_plane_name()
  std::vector<SubscriptionSpec> subscriptions{SubscriptionSpec{}};
  std::string backend_id;  // must name the backend handed to the runtime
  bool control_enabled{false};
  std::uint16_t control_action{1};
  std::uint32_t manager_id{1};
  // Stop after this many indications (0 = no limit).
  std::uint64_t max_iterations{0};
  // Stop when no indication arrives for this long (0 = wait forever).
  std::chrono::milliseconds idle_timeout{2000};
  tracking::GridGeometry grid;
  tracking::KalmanConfig kalman;
  std::size_t average_window{10};

  void validate() const;
};

// One processed iteration, monotonic ns. The first two columns come from the
// writer's slot header. control_sent/control_acked are 0 without control.
struct LatencyRow {
  std::uint64_t iteration{0};
  std::uint64_t tti{0};
  std::uint64_t t_ready{0};        // writer began the slot copy
  std::uint64_t t_publish{0};      // slot became readable
  std::uint64_t agent_tx{0};       // agent sent the indication
  std::uint64_t indication_rx{0};  // manager decoded the indication
  std::uint64_t shm_read_done{0};
  std::uint64_t preproc_done{0};
  std::uint64_t infer_done{0};
  std::uint64_t postproc_done{0};
  std::uint64_t control_sent{0};
  std::uint64_t control_acked{0};

  // Last timestamp of the iteration.
  std::uint64_t end() const noexcept { return control_acked ? control_acked : postproc_done; }
  bool monotonic() const noexcept;
};

void write_trace_csv(std::ostream& out, std::span<const LatencyRow> rows);

struct IterationResult {
  std::uint64_t tti{0};
  const FloatTensor* output{nullptr};
  std::optional<tracking::TrackPoint> track;  // grid backends only
};

struct DappSummary {
  std::uint64_t indications{0};
  std::uint64_t processed{0};
  std::uint64_t stale_skips{0};
  std::uint64_t mismatch_skips{0};
  std::uint64_t inline_only{0};
  std::uint64_t control_ok{0};
  std::uint64_t control_failed{0};
  bool disconnected{false};
  std::string first_diagnostic;
};

std::string to_string(const DappSummary& s);

// Receive loop of one dApp: indication -> SHM read -> preprocess -> infer ->
// post-process -> optional control. Runs on the calling thread.
class DappRuntime {
 public:
  using Callback = std::function<void(const IterationResult&)>;

  DappRuntime(DappConfig config, std::unique_ptr<InferenceBackend> backend);

  // Connects, subscribes and serves until a limit, a disconnect or *stop.
  // `ready` is invoked once every subscription is acknowledged.
  DappSummary run(const std::atomic<bool>* stop = nullptr, const Callback& callback = {},
                  const std::function<void()>& ready = {});

  const std::vector<LatencyRow>& trace() const noexcept { return trace_; }
  InferenceBackend& backend() noexcept { return *backend_; }

 private:
  DappConfig config_;
  std::unique_ptr<InferenceBackend> backend_;
  std::vector<LatencyRow> trace_;
};

}  // namespace cusense::dapp
