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

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cusense::tracking {

class TrackingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kAreaWidthM = 6.78;
inline constexpr double kAreaDepthM = 10.06;

struct Position {
  double x{0.0};
  double y{0.0};
  friend bool operator==(const Position&, const Position&) = default;
};

double distance(Position a, Position b);

struct Cell {
  std::size_t i{0};  // row, along depth (y)
  std::size_t j{0};  // column, along width (x)
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Row-major H x W grid laid over the area; row i covers depth, column j width.
struct GridGeometry {
  std::size_t H{32};
  std::size_t W{32};
  double width_m{kAreaWidthM};
  double depth_m{kAreaDepthM};

  void validate() const;
  std::size_t cells() const noexcept { return H * W; }
  double cell_width() const noexcept { return width_m / static_cast<double>(W); }
  double cell_depth() const noexcept { return depth_m / static_cast<double>(H); }
  std::size_t index(Cell c) const;
  Cell cell(std::size_t index) const;
  Position center(Cell c) const;
  // Cell containing p; points outside the area clamp to the border cells.
  Cell cell_of(Position p) const;
};

// Element-wise mean of the given grids; all must have the same size.
std::vector<double> average_grids(std::span<const std::vector<double>> grids);

// Mean of the last N grids pushed. Before N grids exist it averages what it has.
class GridAverager {
 public:
  explicit GridAverager(std::size_t window = 10);
  std::vector<double> push(std::span<const float> grid);
  std::vector<double> push(std::span<const double> grid);
  std::size_t size() const noexcept { return history_.size(); }
  std::size_t window() const noexcept { return window_; }
  void reset() { history_.clear(); }

 private:
  std::size_t window_;
  std::deque<std::vector<double>> history_;
};

// Units in which r_base is read. The default reads it as cm^2 (std about 27 cm).
enum class NoiseUnits { kSquareCentimeters, kSquareCells };

struct KalmanConfig {
  double q{1e-5};
  double r_base{750.0};
  NoiseUnits r_units{NoiseUnits::kSquareCentimeters};
  double initial_velocity_var{1.0};  // (m/s)^2 on the first fix

  // Measurement variance in m^2 for one axis.
  double measurement_var(const GridGeometry& grid) const;
};

// Constant-velocity state [x, y, vx, vy] in meters and m/s.
struct TrackState {
  Eigen::Vector4d mean{Eigen::Vector4d::Zero()};
  Eigen::Matrix4d cov{Eigen::Matrix4d::Identity()};

  double x() const { return mean(0); }
  double y() const { return mean(1); }
  double vx() const { return mean(2); }
  double vy() const { return mean(3); }
  Position position() const { return {mean(0), mean(1)}; }
};

TrackState kalman_predict(const TrackState& s, double dt_s, double q);
// Standard update with R = r_var * I2; the covariance is symmetrized afterwards.
TrackState kalman_update(const TrackState& s, Position z, double r_var);
TrackState kalman_step(const TrackState& s, Position z, double dt_s, double q, double r_var);

// Owns one track. The first measurement initializes the position.
class KalmanTracker {
 public:
  KalmanTracker(KalmanConfig config, GridGeometry grid);
  Position step(std::optional<Position> measurement, double dt_s);
  bool initialized() const noexcept { return state_.has_value(); }
  const TrackState& state() const;
  double measurement_var() const noexcept { return r_var_; }
  void reset() { state_.reset(); }

 private:
  KalmanConfig config_;
  double r_var_;
  std::optional<TrackState> state_;
};

// Argmax cell of a probability grid mapped to its world center.
Position grid_peak(std::span<const double> grid, const GridGeometry& geometry);
Position grid_peak(std::span<const float> grid, const GridGeometry& geometry);

struct TrackPoint {
  Position raw;       // argmax of the latest grid
  Position averaged;  // argmax of the running average
  Position filtered;  // Kalman estimate fed with `averaged`
};

// Raw argmax, running average and Kalman smoothing over one grid stream.
class GridTracker {
 public:
  GridTracker(GridGeometry grid, KalmanConfig kalman = {}, std::size_t average_window = 10);
  TrackPoint push(std::span<const float> grid, double dt_s);
  const GridGeometry& geometry() const noexcept { return grid_; }
  void reset();

 private:
  GridGeometry grid_;
  GridAverager averager_;
  KalmanTracker kalman_;
};

}  // namespace cusense::tracking
