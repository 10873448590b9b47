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
#include <cstdio>
#include <random>
#include <sstream>
#include <unistd.h>

#include "cusense/labeling/dataset.hpp"
#include "cusense/labeling/labeling.hpp"
#include "doctest.h"

using namespace cusense;
using namespace cusense::labeling;

namespace {

std::array<ImagePoint, 4> unit_square() { return {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}; }

// Random convex-ish quad: jittered corners of a box, which keeps any three points non-collinear.
template <class P>
std::array<P, 4> random_quad(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> j(-0.2, 0.2), off(-5, 5);
  const double ox = off(rng), oy = off(rng);
  const double cx[4] = {0, 1, 1, 0}, cy[4] = {0, 0, 1, 1};
  std::array<P, 4> q;
  for (int k = 0; k < 4; ++k) q[k] = P{scale * (cx[k] + j(rng)) + ox, scale * (cy[k] + j(rng)) + oy};
  return q;
}

std::size_t brute_nearest(std::int64_t t, std::span<const std::int64_t> frames, std::int64_t half) {
  std::size_t best = kUnmatched;
  std::int64_t gap = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::int64_t d = std::llabs(frames[f] - t);
    if (best == kUnmatched || d < gap) {
      best = f;
      gap = d;
    }
  }
  return (best != kUnmatched && gap <= half) ? best : kUnmatched;
}

}  // namespace

TEST_CASE("homography: closed forms") {
  const std::array<Position, 4> same{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  const auto id = estimate_homography(unit_square(), same);
  CHECK((id.m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  const std::array<Position, 4> twice{{{0, 0}, {2, 0}, {2, 2}, {0, 2}}};
  const auto s = estimate_homography(unit_square(), twice);
  CHECK((s.m - Eigen::Vector3d(2, 2, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(project(Homography{}, {3, 4}) == Position{3, 4});
  const auto p = project(s, {1, 1});
  CHECK(p.x == doctest::Approx(2.0));
  CHECK(p.y == doctest::Approx(2.0));

  const std::array<ImagePoint, 4> collinear{{{0, 0}, {1, 1}, {2, 2}, {0, 1}}};
  CHECK_THROWS_AS(estimate_homography(collinear, same), LabelingError);
  Homography inf;
  inf.m(2, 0) = 1.0;
  inf.m(2, 2) = 1.0;
  CHECK_THROWS_AS(project(inf, {-1.0, 0.0}), LabelingError);
}

TEST_CASE("homography: random configurations reproject their corners") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst_inv = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto img = random_quad<ImagePoint>(rng, 640.0);
    const auto world = random_quad<Position>(rng, 8.0);
    const auto h = estimate_homography(img, world);
    CHECK(h.m(2, 2) == 1.0);
    for (int k = 0; k < 4; ++k) {
      const auto p = project(h, img[k]);
      worst = std::max(worst, std::hypot(p.x - world[k].x, p.y - world[k].y));
    }
    const auto inv = h.inverse();
    const ImagePoint q{img[0].u + 640 * u(rng) * 0.5, img[0].v + 640 * u(rng) * 0.5};
    const auto w = project(h, q);
    const auto back = project(inv, {w.x, w.y});
    worst_inv = std::max(worst_inv, std::hypot(back.x - q.u, back.y - q.v) / 640.0);
  }
  MESSAGE("worst corner residual " << worst << " m");
  CHECK(worst < 1e-6);
  CHECK(worst_inv < 1e-9);
}

TEST_CASE("align: boundaries and brute-force oracle") {
  SyncConfig cfg;
  cfg.frame_period_s = 0.04;
  const std::int64_t shift = 37'000'000'000;
  const std::vector<std::int64_t> frames{1'000'000'000, 1'040'000'000};
  const std::vector<std::int64_t> csi{frames[0] + shift, frames[0] + shift + 20'000'000, frames[1] + shift + 20'000'001};
  const auto r = align(csi, frames, cfg);
  CHECK(r.frame_of[0] == 0);
  CHECK(r.frame_of[1] == 0);  // tie between frames at exactly half a period goes to the earlier one
  CHECK(r.frame_of[2] == kUnmatched);
  CHECK(r.matched == 2);
  CHECK(r.dropped == 1);
  CHECK_THROWS_AS(align(std::vector<std::int64_t>{2, 1}, frames, cfg), LabelingError);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    SyncConfig c;
    c.frame_period_s = 0.01 + 0.05 * static_cast<double>(rng() % 100) / 100.0;
    c.clock_skew_s = static_cast<double>(static_cast<int>(rng() % 2001) - 1000) * 1e-6;
    const auto half = static_cast<std::int64_t>(std::floor(c.frame_period_s * 1e9 / 2.0 + 1e-6));
    const auto skew = std::llround((c.tai_utc_offset_s + c.clock_skew_s) * 1e9);
    std::vector<std::int64_t> f, s;
    std::int64_t t = 5'000'000'000;
    for (int k = 0; k < 50; ++k) f.push_back(t += static_cast<std::int64_t>(rng() % 80'000'000));
    std::int64_t q = 4'900'000'000 + skew;
    for (int k = 0; k < 300; ++k) s.push_back(q += static_cast<std::int64_t>(rng() % 20'000'000));
    const auto got = align(s, f, c);
    std::size_t matched = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto want = brute_nearest(s[i] - skew, f, half);
      REQUIRE(got.frame_of[i] == want);
      matched += want != kUnmatched;
    }
    CHECK(got.matched == matched);
    // Translating both streams together changes nothing.
    for (auto& v : f) v += 123'456'789;
    for (auto& v : s) v += 123'456'789;
    CHECK(align(s, f, c).frame_of == got.frame_of);
  }
}

TEST_CASE("splits: counts, contiguity, determinism") {
  auto check = [](const std::vector<Split>& tags, std::size_t n) {
    std::size_t counts[3] = {};
    for (auto t : tags) counts[static_cast<int>(t)]++;
    for (Split s : {Split::kVal, Split::kTest}) {
      std::size_t first = n, last = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (tags[i] == s) {
          first = std::min(first, i);
          last = i;
        }
      }
      if (first == n) continue;
      for (std::size_t i = first; i <= last; ++i) REQUIRE(tags[i] == s);
    }
    const double nn = static_cast<double>(n);
    REQUIRE(std::abs(static_cast<double>(counts[1]) - 0.1 * nn) <= 1.0);
    REQUIRE(std::abs(static_cast<double>(counts[2]) - 0.1 * nn) <= 1.0);
    REQUIRE(std::abs(static_cast<double>(counts[0]) - 0.8 * nn) <= 1.0 + 1e-9);
    REQUIRE(counts[0] + counts[1] + counts[2] == n);
  };
  const auto t100 = make_splits(100, {}, 9);
  check(t100, 100);
  CHECK(std::count(t100.begin(), t100.end(), Split::kTrain) == 80);
  CHECK(make_splits(100, {}, 9) == t100);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 10 + rng() % 2000;
    check(make_splits(n, {}, rng()), n);
  }
  CHECK_THROWS_AS(make_splits(9, {}, 1), LabelingError);
}

TEST_CASE("detections csv parsing") {
  std::istringstream in("t_ns,u,v,confidence\n100,320.5,240,0.9\n# note\n200,1,2,0.5\n");
  const auto d = read_detections_csv(in);
  REQUIRE(d.size() == 2);
  CHECK(d[0].t_ns == 100);
  CHECK(d[0].centroid.u == 320.5);
  CHECK(d[1].confidence == 0.5);
  std::istringstream bad("1,2\n");
  CHECK_THROWS_AS(read_detections_csv(bad), LabelingError);
}

TEST_CASE("dataset binary round trip and csv export") {
  Dataset d;
  d.header.antennas = 2;
  d.header.symbols = 3;
  d.header.bins = {5, 6, 9};
  d.header.norm = {0.5, 2.0, 1e-8};
  d.header.has_csi = true;
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n;
  for (std::uint64_t k = 0; k < 20; ++k) {
    DatasetRecord r;
    r.tti = k;
    r.timestamp_ns = k * 500'000;
    r.pos = {1.0 + 0.1 * static_cast<double>(k), 2.0};
    r.cell = d.header.grid.cell_of(r.pos);
    r.split = k % 10 == 3 ? Split::kTest : Split::kTrain;
    r.features = RealTensor({2, 3});
    for (auto& v : r.features.storage()) v = n(rng);
    r.csi = ComplexTensor({2, 3, 3});
    for (auto& v : r.csi.storage()) v = {n(rng), n(rng)};
    d.records.push_back(r);
  }
  const std::string path = "/tmp/cusense_ds_" + std::to_string(::getpid()) + ".bin";
  write_dataset(path, d);
  const auto back = read_dataset(path);
  std::remove(path.c_str());
  CHECK(back.header.bins == d.header.bins);
  CHECK(back.header.norm.sigma == 2.0);
  REQUIRE(back.records.size() == 20);
  for (std::size_t k = 0; k < 20; ++k) {
    CHECK(back.records[k].features == d.records[k].features);  // values are f32-exact
    CHECK(back.records[k].csi == d.records[k].csi);
    CHECK(back.records[k].split == d.records[k].split);
    CHECK(back.header.grid.cell_of(back.records[k].pos) == back.records[k].cell);
  }
  std::ostringstream csv;
  write_dataset_csv(csv, back);
  const auto text = csv.str();
  CHECK(text.find("tti,timestamp_ns,x_m,y_m,cell_i,cell_j,split,f0,f1,f2,f3,f4,f5\n") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 23);

  DatasetRecord wrong = d.records[0];
  wrong.features = RealTensor({2, 4});
  DatasetWriter w("/tmp/cusense_ds_bad_" + std::to_string(::getpid()) + ".bin", d.header);
  CHECK_THROWS_AS(w.write(wrong), LabelingError);
  w.close();
  std::remove(("/tmp/cusense_ds_bad_" + std::to_string(::getpid()) + ".bin").c_str());
}
