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

#include "cusense/tracking/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cusense::tracking {

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

void GridGeometry::validate() const {
  if (H == 0 || W == 0) throw TrackingError("grid dimensions must be positive");
  if (!(width_m > 0.0) || !(depth_m > 0.0)) throw TrackingError("area dimensions must be positive");
}

std::size_t GridGeometry::index(Cell c) const {
  if (c.i >= H || c.j >= W) {
    throw TrackingError("cell (" + std::to_string(c.i) + ", " + std::to_string(c.j) + ") outside the grid");
  }
  return c.i * W + c.j;
}

Cell GridGeometry::cell(std::size_t index) const {
  if (index >= cells()) throw TrackingError("cell index " + std::to_string(index) + " outside the grid");
  return {index / W, index % W};
}

Position GridGeometry::center(Cell c) const {
  index(c);
  return {(static_cast<double>(c.j) + 0.5) * cell_width(), (static_cast<double>(c.i) + 0.5) * cell_depth()};
}

Cell GridGeometry::cell_of(Position p) const {
  auto quantize = [](double v, double step, std::size_t n) {
    const double f = std::floor(v / step);
    if (!(f > 0.0)) return std::size_t{0};
    return std::min(static_cast<std::size_t>(f), n - 1);
  };
  return {quantize(p.y, cell_depth(), H), quantize(p.x, cell_width(), W)};
}

std::vector<double> average_grids(std::span<const std::vector<double>> grids) {
  if (grids.empty()) throw TrackingError("no grids to average");
  std::vector<double> out(grids.front().size(), 0.0);
  for (const auto& g : grids) {
    if (g.size() != out.size()) throw TrackingError("grid sizes differ");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  }
  const double n = static_cast<double>(grids.size());
  for (double& v : out) v /= n;
  return out;
}

GridAverager::GridAverager(std::size_t window) : window_(window) {
  if (window == 0) throw TrackingError("averaging window must be positive");
}

std::vector<double> GridAverager::push(std::span<const float> grid) {
  return push(std::vector<double>(grid.begin(), grid.end()));
}

std::vector<double> GridAverager::push(std::span<const double> grid) {
  if (!history_.empty() && history_.front().size() != grid.size()) throw TrackingError("grid size changed");
  history_.emplace_back(grid.begin(), grid.end());
  if (history_.size() > window_) history_.pop_front();
  std::vector<double> out(grid.size(), 0.0);
  for (const auto& g : history_) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  }
  const double n = static_cast<double>(history_.size());
  for (double& v : out) v /= n;
  return out;
}

double KalmanConfig::measurement_var(const GridGeometry& grid) const {
  switch (r_units) {
    case NoiseUnits::kSquareCentimeters: return r_base * 1e-4;
    case NoiseUnits::kSquareCells: return r_base * grid.cell_width() * grid.cell_depth();
  }
  return r_base * 1e-4;
}

TrackState kalman_predict(const TrackState& s, double dt_s, double q) {
  if (!(dt_s > 0.0)) throw TrackingError("dt must be positive");
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = dt_s;
  F(1, 3) = dt_s;
  TrackState out;
  out.mean = F * s.mean;
  out.cov = F * s.cov * F.transpose() + q * Eigen::Matrix4d::Identity();
  return out;
}

TrackState kalman_update(const TrackState& s, Position z, double r_var) {
  if (!std::isfinite(z.x) || !std::isfinite(z.y)) throw TrackingError("non-finite measurement");
  Eigen::Matrix<double, 2, 4> Hm = Eigen::Matrix<double, 2, 4>::Zero();
  Hm(0, 0) = 1.0;
  Hm(1, 1) = 1.0;
  const Eigen::Vector2d innovation = Eigen::Vector2d(z.x, z.y) - Hm * s.mean;
  const Eigen::Matrix2d S = Hm * s.cov * Hm.transpose() + r_var * Eigen::Matrix2d::Identity();
  const Eigen::Matrix<double, 4, 2> K = s.cov * Hm.transpose() * S.inverse();
  TrackState out;
  out.mean = s.mean + K * innovation;
  // Joseph form keeps the covariance PSD under rounding.
  const Eigen::Matrix4d I_KH = Eigen::Matrix4d::Identity() - K * Hm;
  out.cov = I_KH * s.cov * I_KH.transpose() + r_var * K * K.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

TrackState kalman_step(const TrackState& s, Position z, double dt_s, double q, double r_var) {
  return kalman_update(kalman_predict(s, dt_s, q), z, r_var);
}

KalmanTracker::KalmanTracker(KalmanConfig config, GridGeometry grid)
    : config_(config), r_var_(config.measurement_var(grid)) {
  grid.validate();
  if (!(config.q >= 0.0) || !(r_var_ >= 0.0)) throw TrackingError("noise parameters must be non-negative");
}

Position KalmanTracker::step(std::optional<Position> measurement, double dt_s) {
  if (!state_) {
    if (!measurement) throw TrackingError("the first step needs a measurement");
    if (!std::isfinite(measurement->x) || !std::isfinite(measurement->y)) {
      throw TrackingError("non-finite measurement");
    }
    TrackState s;
    s.mean << measurement->x, measurement->y, 0.0, 0.0;
    s.cov = Eigen::Vector4d(r_var_, r_var_, config_.initial_velocity_var, config_.initial_velocity_var).asDiagonal();
    state_ = s;
    return state_->position();
  }
  *state_ = kalman_predict(*state_, dt_s, config_.q);
  if (measurement) *state_ = kalman_update(*state_, *measurement, r_var_);
  return state_->position();
}

const TrackState& KalmanTracker::state() const {
  if (!state_) throw TrackingError("tracker not initialized");
  return *state_;
}

namespace {

template <class T>
Position peak_of(std::span<const T> grid, const GridGeometry& geometry) {
  if (grid.size() != geometry.cells()) {
    throw TrackingError("grid has " + std::to_string(grid.size()) + " cells, expected " +
                        std::to_string(geometry.cells()));
  }
  const auto it = std::max_element(grid.begin(), grid.end());
  return geometry.center(geometry.cell(static_cast<std::size_t>(it - grid.begin())));
}

}  // namespace

Position grid_peak(std::span<const double> grid, const GridGeometry& geometry) { return peak_of(grid, geometry); }
Position grid_peak(std::span<const float> grid, const GridGeometry& geometry) { return peak_of(grid, geometry); }

GridTracker::GridTracker(GridGeometry grid, KalmanConfig kalman, std::size_t average_window)
    : grid_(grid), averager_(average_window), kalman_(kalman, grid) {}

TrackPoint GridTracker::push(std::span<const float> grid, double dt_s) {
  TrackPoint out;
  out.raw = grid_peak(grid, grid_);
  const auto avg = averager_.push(grid);
  out.averaged = grid_peak(std::span<const double>(avg), grid_);
  out.filtered = kalman_.step(out.averaged, dt_s);
  return out;
}

void GridTracker::reset() {
  averager_.reset();
  kalman_.reset();
}

}  // namespace cusense::tracking
