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

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "acceptance.hpp"
#include "cusense/emulator/trajectory.hpp"
#include "cusense/tracking/tracking.hpp"

namespace acceptance {
namespace {

using namespace cusense;
using namespace cusense::tracking;

// Normalized grid with a Gaussian bump at fractional cell (ci, cj); its argmax
// is the cell nearest to the bump centre.
std::vector<float> bump(const GridGeometry& g, double ci, double cj) {
  std::vector<double> d(g.cells());
  double sum = 0.0;
  for (std::size_t i = 0; i < g.H; ++i) {
    for (std::size_t j = 0; j < g.W; ++j) {
      const double di = double(i) - ci, dj = double(j) - cj;
      sum += d[i * g.W + j] = std::exp(-0.5 * (di * di + dj * dj));
    }
  }
  std::vector<float> out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) out[k] = static_cast<float>(d[k] / sum);
  return out;
}

}  // namespace

Outcome tracking() {
  std::mt19937_64 rng(0x7ac4);

  // Covariance over random predict/update sequences.
  std::size_t asym = 0, not_psd = 0;
  double worst_asym = 0.0, min_eig = INFINITY;
  TrackState s;
  s.cov = Eigen::Matrix4d::Identity();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10'000; ++k) {
    const double dt = std::pow(10.0, -3.0 + 3.0 * u(rng));
    const double q = std::pow(10.0, -7.0 + 6.0 * u(rng));
    const double r = std::pow(10.0, -4.0 + 4.0 * u(rng));
    const Position z{-5.0 + 20.0 * u(rng), -5.0 + 20.0 * u(rng)};
    s = (k % 5 == 4) ? kalman_predict(s, dt, q) : kalman_step(s, z, dt, q, r);
    const double a = (s.cov - s.cov.transpose()).cwiseAbs().maxCoeff();
    worst_asym = std::max(worst_asym, a);
    if (a > 1e-12 * std::max(1.0, s.cov.cwiseAbs().maxCoeff())) ++asym;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(0.5 * (s.cov + s.cov.transpose()));
    const double e = es.eigenvalues().minCoeff();
    min_eig = std::min(min_eig, e);
    if (e < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) ++not_psd;
  }

  // Noisy grid sequences: the argmax lands sigma = 2 cells from the true cell.
  const GridGeometry g;
  std::normal_distribution<double> noise(0.0, 2.0);
  const double dt = 0.004;  // one indication every 2 TTIs of 2 ms
  double se_raw = 0.0, se_filtered = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    emulator::TrajectoryParams tp;
    tp.kind = emulator::TrajectoryKind::kLawnmower;
    tp.speed_mps = 1.0;
    tp.seed = seed;
    const auto path = emulator::Trajectory::build(tp, g.width_m, g.depth_m);
    GridTracker tracker(g);
    for (int k = 0; k < 10'000; ++k) {
      const auto p = path.position_at(k * dt);
      const double ci = p.y / g.cell_depth() - 0.5 + noise(rng);
      const double cj = p.x / g.cell_width() - 0.5 + noise(rng);
      const auto out = tracker.push(bump(g, ci, cj), dt);
      const Position truth{p.x, p.y};
      se_raw += std::pow(distance(out.raw, truth), 2);
      se_filtered += std::pow(distance(out.filtered, truth), 2);
      ++n;
    }
  }
  const double rmse_raw = std::sqrt(se_raw / n), rmse_filtered = std::sqrt(se_filtered / n);
  const double reduction = 1.0 - rmse_filtered / rmse_raw;

  Checker c;
  c.note("worst_asym", worst_asym).note("min_eig", min_eig);
  c.note("rmse_raw_m", rmse_raw).note("rmse_avg_kalman_m", rmse_filtered).note("reduction", reduction);
  c.expect(asym == 0, "covariance not symmetric");
  c.expect(not_psd == 0, "covariance not PSD");
  c.expect(reduction >= 0.20, "RMSE reduction below 20%");
  return c.outcome();
}

}  // namespace acceptance
