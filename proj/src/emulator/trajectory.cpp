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

#include "cusense/emulator/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cusense::emulator {
namespace {

std::vector<Waypoint> timed(const std::vector<Point>& pts, double speed) {
  std::vector<Waypoint> out;
  double t = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) {
      const double d = std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
      if (d <= 0.0) continue;
      t += d / speed;
    }
    out.push_back({pts[i].x, pts[i].y, t});
  }
  return out;
}

std::vector<Point> lawnmower(double x0, double x1, double y0, double y1, double pitch) {
  std::vector<Point> pts;
  bool forward = true;
  for (double y = y0; y <= y1 + 1e-9; y += pitch) {
    pts.push_back({forward ? x0 : x1, y});
    pts.push_back({forward ? x1 : x0, y});
    forward = !forward;
  }
  return pts;
}

std::vector<Point> spiral(double x0, double x1, double y0, double y1, double pitch) {
  // Archimedean spiral from the centre, scaled to the rectangle's aspect.
  const double cx = (x0 + x1) / 2.0, cy = (y0 + y1) / 2.0;
  const double rx = (x1 - x0) / 2.0, ry = (y1 - y0) / 2.0;
  const double r_max = std::max(rx, ry);
  const double turns = r_max / pitch;
  const double theta_max = 2.0 * std::numbers::pi * turns;
  std::vector<Point> pts;
  const int steps = std::max(16, static_cast<int>(turns * 180));
  for (int i = 0; i <= steps; ++i) {
    const double th = theta_max * i / steps;
    const double r = th / theta_max;  // 0..1
    pts.push_back({cx + r * rx * std::cos(th), cy + r * ry * std::sin(th)});
  }
  return pts;
}

}  // namespace

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kLawnmower: return "lawnmower";
    case TrajectoryKind::kSpiral: return "spiral";
    case TrajectoryKind::kRandomWalk: return "random_walk";
    case TrajectoryKind::kStationary: return "stationary";
  }
  return "unknown";
}

TrajectoryKind parse_trajectory_kind(const std::string& text) {
  if (text == "lawnmower") return TrajectoryKind::kLawnmower;
  if (text == "spiral") return TrajectoryKind::kSpiral;
  if (text == "random_walk" || text == "random") return TrajectoryKind::kRandomWalk;
  if (text == "stationary") return TrajectoryKind::kStationary;
  throw SceneError("unknown trajectory '" + text + "'");
}

Trajectory Trajectory::build(const TrajectoryParams& p, double width_m, double depth_m) {
  const double x0 = p.margin_m, x1 = width_m - p.margin_m;
  const double y0 = p.margin_m, y1 = depth_m - p.margin_m;
  if (x1 <= x0 || y1 <= y0) throw SceneError("trajectory margin leaves no room inside the area");
  if (p.kind != TrajectoryKind::kStationary && !(p.speed_mps > 0.0)) {
    throw SceneError("trajectory speed must be positive");
  }

  Trajectory tr;
  tr.kind_ = p.kind;
  tr.speed_ = p.kind == TrajectoryKind::kStationary ? 0.0 : p.speed_mps;
  switch (p.kind) {
    case TrajectoryKind::kStationary: {
      const auto& s = p.stationary_at;
      if (s.x < 0.0 || s.x > width_m || s.y < 0.0 || s.y > depth_m) {
        throw SceneError("stationary position is outside the area");
      }
      tr.waypoints_ = {{s.x, s.y, 0.0}};
      break;
    }
    case TrajectoryKind::kLawnmower:
      tr.waypoints_ = timed(lawnmower(x0, x1, y0, y1, p.row_spacing_m), p.speed_mps);
      break;
    case TrajectoryKind::kSpiral:
      tr.waypoints_ = timed(spiral(x0, x1, y0, y1, p.row_spacing_m), p.speed_mps);
      break;
    case TrajectoryKind::kRandomWalk: {
      std::mt19937_64 rng(p.seed);
      std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
      std::vector<Point> pts;
      for (std::uint32_t i = 0; i < std::max<std::uint32_t>(2, p.random_waypoints); ++i) pts.push_back({ux(rng), uy(rng)});
      tr.waypoints_ = timed(pts, p.speed_mps);
      break;
    }
  }
  return tr;
}

Point Trajectory::position_at(double t) const {
  if (waypoints_.size() == 1 || t <= 0.0) return {waypoints_.front().x, waypoints_.front().y};
  const double T = duration_s();
  double u = std::fmod(t, 2.0 * T);
  if (u > T) u = 2.0 * T - u;
  auto it = std::upper_bound(waypoints_.begin(), waypoints_.end(), u,
                             [](double v, const Waypoint& w) { return v < w.t; });
  if (it == waypoints_.end()) return {waypoints_.back().x, waypoints_.back().y};
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double f = (u - a.t) / (b.t - a.t);
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
}

}  // namespace cusense::emulator
