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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cusense/tracking/tracking.hpp"

namespace cusense::labeling {

using tracking::Position;

class LabelingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SyncConfig {
  double tai_utc_offset_s{37.0};
  double frame_period_s{1.0 / 30.0};
  double clock_skew_s{0.0};  // camera clock minus server clock

  void validate() const;
};

struct ImagePoint {
  double u{0.0};
  double v{0.0};
};

// Image plane to floor plane, normalized so m(2,2) == 1.
struct Homography {
  Eigen::Matrix3d m{Eigen::Matrix3d::Identity()};

  Homography inverse() const;
};

// Exact solve of the 8-unknown system for four correspondences. Throws when
// three image (or world) points are collinear.
Homography estimate_homography(const std::array<ImagePoint, 4>& image, const std::array<Position, 4>& world);
Position project(const Homography& h, ImagePoint p);

inline constexpr std::size_t kUnmatched = std::numeric_limits<std::size_t>::max();

struct AlignResult {
  std::vector<std::size_t> frame_of;  // per CSI record; kUnmatched when dropped
  std::size_t matched{0};
  std::size_t dropped{0};
};

// Converts each CSI time (TAI) to UTC via t - offset - skew and matches it to
// the nearest frame when |dt| <= frame_period / 2. Ties go to the earlier frame.
AlignResult align(std::span<const std::int64_t> csi_tai_ns, std::span<const std::int64_t> frame_utc_ns,
                  const SyncConfig& cfg);

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2, kUnseen = 3 };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct SplitFractions {
  double train{0.8};
  double val{0.1};
  double test{0.1};
};

// Val and test are contiguous, disjoint blocks at seeded positions; the rest is train.
std::vector<Split> make_splits(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

// Person detection ingested from CSV "t_ns,u,v,confidence".
struct Detection {
  std::int64_t t_ns{0};
  ImagePoint centroid;
  double confidence{0.0};
};

std::vector<Detection> read_detections_csv(std::istream& in);
std::vector<Detection> read_detections_csv(const std::string& path);

}  // namespace cusense::labeling
