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

#include <cstdint>
#include <string>
#include <vector>

#include "cusense/emulator/scene.hpp"

namespace cusense::emulator {

enum class TrajectoryKind { kLawnmower, kSpiral, kRandomWalk, kStationary };

std::string to_string(TrajectoryKind kind);
TrajectoryKind parse_trajectory_kind(const std::string& text);

struct Waypoint {
  double x{0.0};
  double y{0.0};
  double t{0.0};  // seconds
};

struct TrajectoryParams {
  TrajectoryKind kind{TrajectoryKind::kLawnmower};
  double speed_mps{1.0};
  double margin_m{0.25};       // keep-out band along the walls
  double row_spacing_m{0.5};   // lawnmower row pitch, spiral arm pitch
  std::uint32_t random_waypoints{64};
  std::uint64_t seed{7};
  Point stationary_at{3.39, 5.03};
};

// Piecewise-linear constant-speed path. Past the last waypoint the path is
// retraced backwards, so position_at is defined for every t >= 0.
class Trajectory {
 public:
  static Trajectory build(const TrajectoryParams& params, double width_m, double depth_m);

  TrajectoryKind kind() const noexcept { return kind_; }
  double speed_mps() const noexcept { return speed_; }
  const std::vector<Waypoint>& waypoints() const noexcept { return waypoints_; }
  double duration_s() const noexcept { return waypoints_.empty() ? 0.0 : waypoints_.back().t; }
  Point position_at(double t) const;

 private:
  TrajectoryKind kind_{TrajectoryKind::kStationary};
  double speed_{0.0};
  std::vector<Waypoint> waypoints_;
};

}  // namespace cusense::emulator
