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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cusense/emulator/scene.hpp"
#include "cusense/emulator/trajectory.hpp"
#include "cusense/tracking/metrics.hpp"

namespace cusense::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,    // failure while running
  kExitUsage = 2,      // invalid flags or inputs
  kExitStartup = 3,    // a component could not start
  kExitThreshold = 4,  // acceptance thresholds violated
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StartupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ThresholdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Set by SIGINT/SIGTERM.
extern std::atomic<bool> g_stop;
void install_signal_handlers();

struct SceneFlags {
  emulator::SceneConfig scene;
  void add(CLI::App& app);
};

struct TrajectoryFlags {
  std::string kind{"lawnmower"};
  double speed{1.0};
  double row_spacing{0.5};
  emulator::TrajectoryParams params(std::uint64_t seed) const;
  void add(CLI::App& app);
};

// "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::string& path);

struct Criteria {
  std::optional<double> max_mean_error_cm;
  std::optional<double> max_mean_error_cells;
  std::optional<double> min_fraction_within_1m;
  std::optional<double> max_median_error_cm;
  std::string series{"averaged"};

  static Criteria load(const std::string& path);
  // Human-readable violations; empty when every threshold holds.
  std::vector<std::string> check(const tracking::MetricsReport& report, const tracking::GridGeometry& grid) const;
};

struct TimedPosition {
  std::optional<std::uint64_t> tti;
  tracking::Position pos;
};

// CSV with a header naming x/y columns (x_m,y_m or x,y) and optionally tti.
std::vector<TimedPosition> read_positions_csv(const std::string& path, const std::string& x_col = "",
                                              const std::string& y_col = "");

void write_text(const std::string& path, const std::string& text);

}  // namespace cusense::cli
