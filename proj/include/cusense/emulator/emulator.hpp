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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cusense/emulator/scene.hpp"
#include "cusense/emulator/trajectory.hpp"
#include "cusense/telemetry/plane.hpp"

namespace cusense::emulator {

class EmulatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IqMode {
  kOff,   // no IQ writes
  kPool,  // synthesize iq_pool_size grids up front and cycle through them
  kLive,  // synthesize a fresh grid every TTI (slow)
};

struct EmulatorOptions {
  std::uint64_t tti_period_ns{500'000};
  bool paced{true};
  IqMode iq_mode{IqMode::kPool};
  std::uint32_t iq_pool_size{8};
  // A write finishing more than one TTI period after its deadline is an
  // overrun; exceeding this many aborts the run.
  std::optional<std::uint64_t> overrun_budget;
  // Draw HEST noise from a NoiseBank instead of per-sample normal draws.
  bool noise_bank{true};
  std::uint64_t first_tti{0};
  // Called with each TTI before it is paced and written; may block to hold
  // the writer back (flow control). Unset = free-running.
  std::function<void(std::uint64_t)> before_write;
  const std::atomic<bool>* stop{nullptr};
};

struct ManifestEntry {
  std::uint64_t tti{0};
  std::uint64_t t_ns{0};  // scene time = (tti - first_tti) * tti_period_ns
  double x_m{0.0};        // NaN when no target is present
  double y_m{0.0};
};

struct PacingStats {
  std::uint64_t writes{0};
  double mean_interval_ns{0.0};
  double mean_lateness_ns{0.0};
  std::uint64_t max_lateness_ns{0};
  std::uint64_t overruns{0};
};

struct RunManifest {
  std::vector<ManifestEntry> entries;
  PacingStats pacing;
};

// Regions sized for the scene: HEST always, IQ unless iq is false, FAPI metadata.
telemetry::PlaneConfig emulator_plane_config(const SceneConfig& cfg, const std::string& name,
                                             std::uint32_t slots_per_buffer, bool iq,
                                             std::uint64_t tti_period_ns);

// Writes duration_ttis slots. A null trajectory emulates an empty room.
RunManifest run_emulator(const SceneConfig& cfg, const Trajectory* trajectory, telemetry::TelemetryPlane& plane,
                         std::uint64_t duration_ttis, const EmulatorOptions& options = {});

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

}  // namespace cusense::emulator
