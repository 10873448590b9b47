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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cusense/dapp/runtime.hpp"
#include "cusense/emulator/emulator.hpp"
#include "cusense/emulator/trajectory.hpp"
#include "cusense/tracking/metrics.hpp"

namespace cusense::dapp {

// Target-free template from `ttis` noisy slots of the scene, noise seeded by `seed`.
sensing::BackgroundTemplate collect_background(const emulator::SceneConfig& scene, std::uint64_t ttis,
                                               std::uint64_t seed);

// Unique plane and socket names for one in-process run.
struct StackNames {
  std::string plane;
  std::string endpoint;
  static StackNames unique(const std::string& stem);
};

struct StageStat {
  std::string operation;
  std::string protocol;
  bool measured{true};
  double median_us{0.0};
  double p99_us{0.0};
  double cumulative_us{0.0};  // running sum of medians
};

struct StageTable {
  std::string backend;
  std::size_t iterations{0};
  std::vector<StageStat> rows;
  double total_median_us{0.0};
  double total_p99_us{0.0};
  double shm_read_preproc_median_us{0.0};
  std::uint64_t emulated_copy_ns{0};
  std::uint64_t emulated_notify_ns{0};
  DappSummary summary;
  std::vector<LatencyRow> trace;
};

// Per-stage deltas of a trace. Emulated delays are added to the per-iteration
// totals as the first two operations.
StageTable summarize_trace(std::span<const LatencyRow> trace, std::uint64_t copy_delay_ns = 0,
                             std::uint64_t notify_delay_ns = 0);
std::string format_stage_table(const StageTable& report);
void write_stage_table_csv(std::ostream& out, const StageTable& report);

inline constexpr std::size_t kMinBenchIterations = 100;

struct BenchConfig {
  std::size_t iterations{10'000};
  std::uint64_t tti_period_ns{2'000'000};
  std::string backend{"iq_processor"};
  bool control{true};
  std::uint64_t copy_delay_ns{0};
  std::uint64_t notify_delay_ns{0};
  std::uint32_t slots_per_buffer{16};
  emulator::SceneConfig scene;
  std::uint64_t background_ttis{100};  // sensing backends only
  const std::atomic<bool>* stop{nullptr};
};

// Emulator, agent and dApp in one process; one dApp iteration per TTI.
StageTable bench_loop(const BenchConfig& config);

struct E2eConfig {
  emulator::SceneConfig scene;
  emulator::TrajectoryParams trajectory;
  std::uint64_t ttis{5000};
  std::uint64_t tti_period_ns{2'000'000};
  std::uint32_t period_ttis{2};
  std::string backend{"matched_filter"};
  std::uint64_t background_ttis{200};
  std::uint64_t background_seed{0x0b5e};
  std::optional<sensing::BackgroundTemplate> background;  // overrides collection
  std::optional<nn::CusenseModel> model;
  std::optional<sensing::NormStats> norm;
  bool control{false};
  std::uint32_t slots_per_buffer{64};
  tracking::GridGeometry grid;
  tracking::KalmanConfig kalman;
  std::size_t average_window{10};
  // Hold the emulator back so it never laps a slot the dApp has not reached.
  // Every indication is then processed and seeded runs are reproducible; the
  // TTI period becomes a lower bound on the write interval.
  bool lossless{true};
  const std::atomic<bool>* stop{nullptr};
};

struct TrajectorySample {
  std::uint64_t tti{0};
  tracking::Position raw, averaged, filtered, truth;
};

struct E2eResult {
  std::string backend;
  tracking::MetricsReport raw;
  tracking::MetricsReport averaged;  // primary series
  tracking::MetricsReport filtered;
  std::vector<TrajectorySample> samples;
  std::vector<LatencyRow> trace;
  DappSummary summary;
  emulator::PacingStats pacing;
  std::uint64_t ttis{0};
};

E2eResult run_e2e(const E2eConfig& config);

// Metrics JSON for all three series plus run counters; wall-clock fields are
// left out when include_timestamps is false so seeded runs compare equal.
std::string e2e_json(const E2eResult& result, bool include_timestamps = true);
void write_trajectory_csv(std::ostream& out, std::span<const TrajectorySample> samples);

}  // namespace cusense::dapp
