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

#include <cmath>
#include <random>
#include <sstream>

#include "cusense/tracking/metrics.hpp"
#include "cusense/tracking/tracking.hpp"
#include "doctest.h"

using namespace cusense::tracking;

namespace {

// Probability grid peaked at `center` (cell units, fractional) with a small
// Gaussian spread, normalized to one.
std::vector<float> blob(const GridGeometry& g, double ci, double cj, double spread = 1.0) {
  std::vector<double> d(g.cells());
  double sum = 0.0;
  for (std::size_t i = 0; i < g.H; ++i) {
    for (std::size_t j = 0; j < g.W; ++j) {
      const double di = static_cast<double>(i) - ci, dj = static_cast<double>(j) - cj;
      d[i * g.W + j] = std::exp(-(di * di + dj * dj) / (2 * spread * spread));
      sum += d[i * g.W + j];
    }
  }
  std::vector<float> out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) out[k] = static_cast<float>(d[k] / sum);
  return out;
}

bool is_sym_psd(const Eigen::Matrix4d& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(P);
  return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("grid geometry maps cells to centers and back") {
  GridGeometry g;
  for (std::size_t k = 0; k < g.cells(); ++k) {
    const Cell c = g.cell(k);
    CHECK(g.index(c) == k);
    const Position p = g.center(c);
    CHECK(p.x > 0.0);
    CHECK(p.x < g.width_m);
    CHECK(p.y > 0.0);
    CHECK(p.y < g.depth_m);
    CHECK(g.cell_of(p) == c);
  }
  CHECK(g.center({0, 0}).x == doctest::Approx(0.5 * 6.78 / 32));
  CHECK(g.center({31, 0}).y == doctest::Approx(31.5 * 10.06 / 32));
  CHECK(g.cell_of({-1.0, 100.0}) == Cell{31, 0});
  CHECK_THROWS_AS(g.index({32, 0}), TrackingError);
}

TEST_CASE("grid averaging") {
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  const std::vector<std::vector<double>> two{a, b};
  CHECK(average_grids(two) == std::vector<double>{0.5, 0.5});

  GridAverager avg(10);
  const std::vector<double> g{0.25, 0.75};
  std::vector<double> out;
  for (int i = 0; i < 10; ++i) out = avg.push(std::span<const double>(g));
  CHECK(out == g);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridAverager run(10);
  std::vector<std::vector<double>> seen;
  for (int t = 0; t < 40; ++t) {
    std::vector<double> grid(64);
    double s = 0;
    for (double& v : grid) s += (v = u(rng));
    for (double& v : grid) v /= s;
    seen.push_back(grid);
    const auto got = run.push(std::span<const double>(grid));
    const std::size_t lo = seen.size() > 10 ? seen.size() - 10 : 0;
    double total = 0;
    for (std::size_t k = 0; k < 64; ++k) {
      double want = 0;
      for (std::size_t i = lo; i < seen.size(); ++i) want += seen[i][k];
      want /= static_cast<double>(seen.size() - lo);
      REQUIRE(std::abs(got[k] - want) < 1e-12);
      total += got[k];
    }
    REQUIRE(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("kalman: zero-noise update and pure prediction") {
  TrackState s;
  s.mean << 2.0, 3.0, 0.0, 0.0;
  s.cov = Eigen::Matrix4d::Identity();
  const auto up = kalman_update(s, {4.0, 5.0}, 0.0);
  CHECK(up.x() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(up.y() == doctest::Approx(5.0).epsilon(1e-12));

  TrackState m;
  m.mean << 0.0, 0.0, 1.0, 0.0;
  const auto p = kalman_predict(m, 1.0, 1e-5);
  CHECK(p.x() == 1.0);
  CHECK(p.y() == 0.0);

  KalmanTracker kt({}, GridGeometry{});
  CHECK(kt.measurement_var() == doctest::Approx(0.075));
  CHECK(kt.step(Position{1.0, 1.0}, 0.1) == Position{1.0, 1.0});
  CHECK_THROWS_AS(kalman_update(s, {NAN, 0.0}, 1.0), TrackingError);
  CHECK_THROWS_AS(kalman_predict(s, 0.0, 1e-5), TrackingError);
}

TEST_CASE("kalman: covariance stays symmetric PSD over random steps") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dt(1e-4, 1.0), pos(-20.0, 20.0);
  std::uniform_real_distribution<double> logr(-8.0, 2.0);
  TrackState s;
  s.cov = Eigen::Vector4d(0.1, 0.1, 1.0, 1.0).asDiagonal();
  for (int i = 0; i < 10000; ++i) {
    const double r = std::pow(10.0, logr(rng));
    s = (i % 7 == 3) ? kalman_predict(s, dt(rng), 1e-5) : kalman_step(s, {pos(rng), pos(rng)}, dt(rng), 1e-5, r);
    REQUIRE(is_sym_psd(s.cov));
    REQUIRE((s.cov.diagonal().array() >= 0.0).all());
  }
}

TEST_CASE("kalman: converged RMSE below measurement noise on a linear path") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.3);
  KalmanConfig cfg;
  cfg.r_base = 900.0;  // 0.3 m std in cm^2
  KalmanTracker kt(cfg, GridGeometry{});
  double se_in = 0, se_out = 0;
  int n = 0;
  for (int k = 0; k < 1000; ++k) {
    const double t = 0.05 * k;
    const Position truth{1.0 + 0.2 * t, 2.0 + 0.1 * t};
    const Position z{truth.x + noise(rng), truth.y + noise(rng)};
    const Position est = kt.step(z, 0.05);
    if (k >= 200) {
      se_in += std::pow(distance(z, truth), 2);
      se_out += std::pow(distance(est, truth), 2);
      ++n;
    }
  }
  CHECK(std::sqrt(se_out / n) < std::sqrt(se_in / n));
}

TEST_CASE("averaging plus kalman beats raw argmax on noisy grid sequences") {
  const GridGeometry g;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 2.0);  // cells
  GridTracker tracker(g);
  const double dt = 0.05, speed = 0.3;
  double se_raw = 0, se_smooth = 0;
  const int steps = 4000;
  for (int k = 0; k < steps; ++k) {
    // Back-and-forth sweep across the width on slowly advancing rows.
    const double s = speed * dt * k;
    const double lane = std::fmod(s, 2 * 5.0);
    const double x = 0.9 + (lane < 5.0 ? lane : 10.0 - lane);
    const double y = 1.0 + 0.02 * s;
    const Position truth{x, y};
    const double ci = y / g.cell_depth() - 0.5 + noise(rng);
    const double cj = x / g.cell_width() - 0.5 + noise(rng);
    const auto grid = blob(g, ci, cj);
    const auto tp = tracker.push(grid, dt);
    se_raw += std::pow(distance(tp.raw, truth), 2);
    se_smooth += std::pow(distance(tp.filtered, truth), 2);
  }
  const double raw = std::sqrt(se_raw / steps), smooth = std::sqrt(se_smooth / steps);
  MESSAGE("raw RMSE " << raw << " m, smoothed RMSE " << smooth << " m");
  CHECK(smooth <= 0.8 * raw);
}

TEST_CASE("evaluate: closed forms and naive recomputation") {
  std::vector<Position> truth{{1, 1}, {2, 2}, {3, 3}, {4, 5}};
  auto zero = evaluate(truth, truth);
  CHECK(zero.mean_cm == 0.0);
  CHECK(zero.rmse_cm == 0.0);
  CHECK(zero.category_fraction(0) == 1.0);

  std::vector<Position> shifted;
  for (auto p : truth) shifted.push_back({p.x + 1.0, p.y});
  auto one = evaluate(shifted, truth);
  CHECK(one.mean_cm == doctest::Approx(100.0));
  CHECK(one.median_cm == doctest::Approx(100.0));
  CHECK(one.rmse_cm == doctest::Approx(100.0));
  CHECK(one.std_cm == doctest::Approx(0.0));
  CHECK(one.category_fraction(1) == 1.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    std::vector<Position> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = {u(rng), u(rng)};
      b[i] = {u(rng), u(rng)};
    }
    const auto r = evaluate(a, b);
    std::vector<double> e;
    double sum = 0, sq = 0;
    std::array<std::size_t, 5> cats{};
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::sqrt((a[i].x - b[i].x) * (a[i].x - b[i].x) + (a[i].y - b[i].y) * (a[i].y - b[i].y));
      e.push_back(d);
      sum += d;
      sq += d * d;
      cats[d <= 0.5 ? 0 : d <= 1.0 ? 1 : d <= 2.0 ? 2 : d <= 10.0 ? 3 : 4]++;
    }
    const double mean = sum / n;
    double var = 0;
    for (double d : e) var += (d - mean) * (d - mean);
    std::sort(e.begin(), e.end());
    const double median = n % 2 ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
    REQUIRE(std::abs(r.mean_cm - 100 * mean) < 1e-9);
    REQUIRE(std::abs(r.median_cm - 100 * median) < 1e-9);
    REQUIRE(std::abs(r.rmse_cm - 100 * std::sqrt(sq / n)) < 1e-9);
    REQUIRE(std::abs(r.std_cm - 100 * std::sqrt(var / n)) < 1e-9);
    for (std::size_t c = 0; c < 4; ++c) REQUIRE(r.categories[c] == cats[c]);
    REQUIRE(r.beyond == cats[4]);
    REQUIRE(r.cdf.size() == n);
    REQUIRE(r.cdf.back().probability == 1.0);
  }
  CHECK_THROWS_AS(evaluate(std::vector<Position>{}, std::vector<Position>{}), TrackingError);
  CHECK_THROWS_AS(evaluate(truth, std::vector<Position>(3)), TrackingError);
}

TEST_CASE("metrics serialize to json and csv") {
  std::vector<Position> a{{0, 0}, {0, 0}}, b{{0.3, 0.4}, {0, 3}};
  const auto r = evaluate(a, b);
  const auto j = to_json(r);
  CHECK(j.find("\"mean_cm\"") != std::string::npos);
  CHECK(j.find("\"categories\"") != std::string::npos);
  std::ostringstream csv;
  write_metrics_csv_header(csv);
  write_metrics_csv_row(csv, "raw", r);
  CHECK(csv.str().find("raw,2,") != std::string::npos);
  std::ostringstream cdf;
  write_cdf_csv(cdf, r);
  CHECK(cdf.str() == "error_m,probability\n0.5,0.5\n3,1\n");
}
