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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cusense/tracking/tracking.hpp"

namespace cusense::tracking {

// Upper edges of the 3GPP sensing accuracy categories in meters.
inline constexpr std::array<double, 4> kCategoryEdgesM = {0.5, 1.0, 2.0, 10.0};

struct CdfPoint {
  double error_m{0.0};
  double probability{0.0};
};

struct MetricsReport {
  std::size_t count{0};
  double mean_cm{0.0};
  double median_cm{0.0};
  double std_cm{0.0};  // population standard deviation
  double rmse_cm{0.0};
  double max_cm{0.0};
  // Counts for <=0.5, (0.5,1], (1,2], (2,10] m; errors above 10 m land in `beyond`.
  std::array<std::size_t, 4> categories{};
  std::size_t beyond{0};
  std::vector<CdfPoint> cdf;

  double category_fraction(std::size_t c) const;
  double fraction_within(double meters) const;
};

std::vector<double> errors_m(std::span<const Position> predictions, std::span<const Position> truth);
MetricsReport evaluate(std::span<const Position> predictions, std::span<const Position> truth);

std::string to_json(const MetricsReport& report, int indent = 2, bool include_cdf = true);
// One row per report, mirroring the accuracy table fields.
void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsReport& report);
void write_cdf_csv(std::ostream& out, const MetricsReport& report);

}  // namespace cusense::tracking
