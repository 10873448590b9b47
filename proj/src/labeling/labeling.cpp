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

#include "cusense/labeling/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cusense::labeling {

void SyncConfig::validate() const {
  if (!(frame_period_s > 0.0)) throw LabelingError("frame_period_s must be positive");
  if (!std::isfinite(tai_utc_offset_s) || !std::isfinite(clock_skew_s)) throw LabelingError("non-finite offsets");
}

namespace {

template <class P>
double twice_area(const P& a, const P& b, const P& c, double P::*x, double P::*y) {
  return (b.*x - a.*x) * (c.*y - a.*y) - (b.*y - a.*y) * (c.*x - a.*x);
}

template <class P>
void require_general_position(const std::array<P, 4>& pts, double P::*x, double P::*y, const char* which) {
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max({scale, std::abs(p.*x), std::abs(p.*y)});
  const double tol = 1e-9 * std::max(1.0, scale * scale);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      for (std::size_t c = b + 1; c < 4; ++c) {
        if (std::abs(twice_area(pts[a], pts[b], pts[c], x, y)) <= tol) {
          throw LabelingError(std::string("degenerate configuration: three ") + which + " points are collinear");
        }
      }
    }
  }
}

// Translates the centroid to the origin and scales the mean distance to sqrt(2).
Eigen::Matrix3d normalizing_transform(const std::array<Eigen::Vector2d, 4>& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= 4.0;
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  const double s = std::sqrt(2.0) / (mean / 4.0);
  Eigen::Matrix3d t;
  t << s, 0, -s * c(0), 0, s, -s * c(1), 0, 0, 1;
  return t;
}

}  // namespace

Homography Homography::inverse() const {
  const double norm = m.norm();
  if (!(std::abs(m.determinant()) > 1e-12 * norm * norm * norm)) throw LabelingError("homography is not invertible");
  Homography h;
  h.m = m.inverse();
  h.m /= h.m(2, 2);
  return h;
}

Homography estimate_homography(const std::array<ImagePoint, 4>& image, const std::array<Position, 4>& world) {
  require_general_position(image, &ImagePoint::u, &ImagePoint::v, "image");
  require_general_position(world, &Position::x, &Position::y, "world");
  // Hartley normalization on both sides, then the null vector of the 8x9 DLT system.
  std::array<Eigen::Vector2d, 4> src, dst;
  for (std::size_t n = 0; n < 4; ++n) {
    src[n] = {image[n].u, image[n].v};
    dst[n] = {world[n].x, world[n].y};
  }
  const Eigen::Matrix3d ts = normalizing_transform(src);
  const Eigen::Matrix3d td = normalizing_transform(dst);
  Eigen::Matrix<double, 8, 9> A;
  for (std::size_t n = 0; n < 4; ++n) {
    const Eigen::Vector3d a = ts * src[n].homogeneous();
    const Eigen::Vector3d b = td * dst[n].homogeneous();
    const double u = a(0), v = a(1), x = b(0), y = b(1);
    const auto r = static_cast<Eigen::Index>(2 * n);
    A.row(r) << u, v, 1, 0, 0, 0, -u * x, -v * x, -x;
    A.row(r + 1) << 0, 0, 0, u, v, 1, -u * y, -v * y, -y;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(A, Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  if (sv(7) <= 1e-12 * sv(0)) throw LabelingError("degenerate configuration: homography is not unique");
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Homography out;
  out.m = td.inverse() * hn * ts;
  const double norm = out.m.norm();
  if (!out.m.allFinite() || std::abs(out.m.determinant()) <= 1e-12 * norm * norm * norm) {
    throw LabelingError("degenerate configuration: singular homography");
  }
  if (std::abs(out.m(2, 2)) <= 1e-12 * norm) {
    throw LabelingError("image origin maps to infinity; element (2,2) cannot be normalized to 1");
  }
  out.m /= out.m(2, 2);
  return out;
}

Position project(const Homography& h, ImagePoint p) {
  const Eigen::Vector3d q = h.m * Eigen::Vector3d(p.u, p.v, 1.0);
  if (std::abs(q(2)) <= 1e-12) throw LabelingError("point maps to infinity");
  return {q(0) / q(2), q(1) / q(2)};
}

AlignResult align(std::span<const std::int64_t> csi_tai_ns, std::span<const std::int64_t> frame_utc_ns,
                  const SyncConfig& cfg) {
  cfg.validate();
  if (!std::is_sorted(csi_tai_ns.begin(), csi_tai_ns.end())) throw LabelingError("CSI timestamps are not sorted");
  if (!std::is_sorted(frame_utc_ns.begin(), frame_utc_ns.end())) throw LabelingError("frame timestamps are not sorted");
  const auto shift = std::llround((cfg.tai_utc_offset_s + cfg.clock_skew_s) * 1e9);
  // Half a frame period, rounded down so the inclusive test stays exact in ns.
  const auto half = static_cast<std::int64_t>(std::floor(cfg.frame_period_s * 1e9 / 2.0 + 1e-6));

  AlignResult r;
  r.frame_of.assign(csi_tai_ns.size(), kUnmatched);
  for (std::size_t i = 0; i < csi_tai_ns.size(); ++i) {
    const std::int64_t t = csi_tai_ns[i] - shift;
    const auto it = std::lower_bound(frame_utc_ns.begin(), frame_utc_ns.end(), t);
    std::size_t best = kUnmatched;
    std::int64_t best_gap = 0;
    if (it != frame_utc_ns.begin()) {
      best = static_cast<std::size_t>(it - frame_utc_ns.begin()) - 1;
      best_gap = t - frame_utc_ns[best];
    }
    if (it != frame_utc_ns.end() && (best == kUnmatched || *it - t < best_gap)) {
      best = static_cast<std::size_t>(it - frame_utc_ns.begin());
      best_gap = *it - t;
    }
    if (best != kUnmatched && best_gap <= half) {
      r.frame_of[i] = best;
      ++r.matched;
    } else {
      ++r.dropped;
    }
  }
  return r;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnseen: return "unseen";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  if (s == "unseen") return Split::kUnseen;
  throw LabelingError("unknown split '" + s + "'");
}

std::vector<Split> make_splits(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  if (n < 10) throw LabelingError("run too short for a split (" + std::to_string(n) + " records, need 10)");
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw LabelingError("split fractions must be non-negative and sum to 1");
  }
  const auto n_val = static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(f.test * static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  const std::size_t free = n - n_val - n_test;
  std::uniform_int_distribution<std::size_t> pos(0, free);
  std::size_t a = pos(rng), b = pos(rng);
  if (a > b) std::swap(a, b);
  const bool val_first = (rng() & 1) == 0;
  const std::size_t len_first = val_first ? n_val : n_test;

  std::vector<Split> out(n, Split::kTrain);
  auto fill = [&](std::size_t start, std::size_t len, Split s) {
    std::fill(out.begin() + static_cast<long>(start), out.begin() + static_cast<long>(start + len), s);
  };
  fill(a, len_first, val_first ? Split::kVal : Split::kTest);
  fill(b + len_first, val_first ? n_test : n_val, val_first ? Split::kTest : Split::kVal);
  return out;
}

std::vector<Detection> read_detections_csv(std::istream& in) {
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("t_ns", 0) == 0) continue;
    std::istringstream ss(line);
    Detection d;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> d.t_ns >> c1 >> d.centroid.u >> c2 >> d.centroid.v >> c3 >> d.confidence) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw LabelingError("malformed detection at line " + std::to_string(line_no));
    }
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> read_detections_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LabelingError("cannot open " + path);
  return read_detections_csv(in);
}

}  // namespace cusense::labeling
