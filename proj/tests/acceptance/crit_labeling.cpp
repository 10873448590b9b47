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

#include <algorithm>
#include <cmath>
#include <random>

#include "acceptance.hpp"
#include "cusense/labeling/labeling.hpp"

namespace acceptance {
namespace {

using namespace cusense;
using namespace cusense::labeling;

double cross(double ax, double ay, double bx, double by, double cx, double cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// Smallest triangle area over the four triples, relative to the squared extent.
template <class P, class GetX, class GetY>
double min_triangle(const std::array<P, 4>& p, GetX x, GetY y) {
  double extent = 0.0;
  for (const auto& a : p) {
    for (const auto& b : p) extent = std::max(extent, std::hypot(x(a) - x(b), y(a) - y(b)));
  }
  double m = INFINITY;
  const int tri[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : tri) {
    m = std::min(m, std::abs(cross(x(p[t[0]]), y(p[t[0]]), x(p[t[1]]), y(p[t[1]]), x(p[t[2]]), y(p[t[2]]))));
  }
  return m / (extent * extent);
}

// Index of the nearest frame (earliest on ties) when 2 fps |dt| <= 1 s, else kUnmatched.
std::size_t nearest_frame(std::int64_t t, const std::vector<std::int64_t>& frames, int fps) {
  std::size_t best = kUnmatched;
  std::int64_t gap = 0;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const std::int64_t d = std::llabs(t - frames[j]);
    if (best == kUnmatched || d < gap) {
      best = j;
      gap = d;
    }
  }
  if (best == kUnmatched || 2 * static_cast<std::int64_t>(fps) * gap > 1'000'000'000) return kUnmatched;
  return best;
}

}  // namespace

Outcome homography_alignment() {
  std::mt19937_64 rng(0x40305);
  std::uniform_real_distribution<double> img(0.0, 1920.0), wx(-2.0, 9.0), wy(-2.0, 12.0);

  double worst = 0.0;
  int configs = 0, skipped = 0;
  while (configs < 1000) {
    std::array<ImagePoint, 4> im;
    std::array<Position, 4> wo;
    for (int i = 0; i < 4; ++i) {
      im[i] = {img(rng), img(rng) * 0.5625};
      wo[i] = {wx(rng), wy(rng)};
    }
    const double ti = min_triangle(im, [](const ImagePoint& p) { return p.u; }, [](const ImagePoint& p) { return p.v; });
    const double tw = min_triangle(wo, [](const Position& p) { return p.x; }, [](const Position& p) { return p.y; });
    if (ti < 0.02 || tw < 0.02) {
      ++skipped;
      continue;
    }
    const auto h = estimate_homography(im, wo);
    for (int i = 0; i < 4; ++i) {
      const auto p = project(h, im[i]);
      worst = std::max(worst, std::hypot(p.x - wo[i].x, p.y - wo[i].y));
    }
    ++configs;
  }

  // Alignment against a brute-force nearest-frame search.
  std::size_t align_mismatch = 0, boundary_cases = 0, matched = 0, total = 0;
  const int fps_options[] = {15, 25, 30, 60};
  for (int trial = 0; trial < 300; ++trial) {
    const int fps = fps_options[rng() % 4];
    const std::int64_t skew_ns = static_cast<std::int64_t>(rng() % 2'000'001) - 1'000'000;
    SyncConfig cfg;
    cfg.frame_period_s = 1.0 / fps;
    cfg.clock_skew_s = static_cast<double>(skew_ns) * 1e-9;
    const std::int64_t shift = 37'000'000'000 + skew_ns;
    const std::int64_t period = 1'000'000'000 / fps;
    const std::int64_t half = 1'000'000'000 / (2 * fps);  // floor of the exact half period

    std::vector<std::int64_t> frames;
    std::int64_t f = 1'700'000'000'000'000'000 + static_cast<std::int64_t>(rng() % 1'000'000);
    for (std::size_t n = 5 + rng() % 40; n > 0; --n) {
      frames.push_back(f);
      // Dropped frames and jitter.
      f += period * (rng() % 8 == 0 ? 2 : 1) + static_cast<std::int64_t>(rng() % 2'000'001) - 1'000'000;
    }
    std::vector<std::int64_t> csi;
    for (std::size_t n = 10 + rng() % 100; n > 0; --n) {
      const auto base = frames[rng() % frames.size()];
      std::int64_t off;
      switch (rng() % 4) {
        case 0: off = half; break;
        case 1: off = -(half + 1); break;
        case 2: off = half + 1; break;
        default: off = static_cast<std::int64_t>(rng() % (4 * period)) - 2 * period;
      }
      if (rng() % 4 != 3) ++boundary_cases;
      csi.push_back(base + off + shift);
    }
    std::sort(csi.begin(), csi.end());
    const auto r = align(csi, frames, cfg);
    for (std::size_t i = 0; i < csi.size(); ++i) {
      const auto want = nearest_frame(csi[i] - shift, frames, fps);
      if (r.frame_of[i] != want) ++align_mismatch;
      matched += want != kUnmatched;
      ++total;
    }
  }

  Checker c;
  c.note("configs", configs).note("degenerate_skipped", skipped).note("worst_corner_err", worst);
  c.note("align_records", total).note("matched", matched).note("boundary_cases", boundary_cases);
  c.note("align_mismatch", align_mismatch);
  c.expect(worst <= 1e-6, "corner reprojection above 1e-6");
  c.expect(align_mismatch == 0, "align() disagrees with nearest-frame oracle");
  return c.outcome();
}

}  // namespace acceptance
