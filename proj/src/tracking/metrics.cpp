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

#include "cusense/tracking/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "json.hpp"

namespace cusense::tracking {

double MetricsReport::category_fraction(std::size_t c) const {
  return count ? static_cast<double>(categories.at(c)) / static_cast<double>(count) : 0.0;
}

double MetricsReport::fraction_within(double meters) const {
  if (cdf.empty()) return 0.0;
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), meters,
                                   [](double v, const CdfPoint& p) { return v < p.error_m; });
  return static_cast<double>(it - cdf.begin()) / static_cast<double>(cdf.size());
}

std::vector<double> errors_m(std::span<const Position> predictions, std::span<const Position> truth) {
  if (predictions.size() != truth.size()) {
    throw TrackingError("prediction and truth lengths differ (" + std::to_string(predictions.size()) + " vs " +
                        std::to_string(truth.size()) + ")");
  }
  std::vector<double> e(predictions.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = distance(predictions[i], truth[i]);
  return e;
}

MetricsReport evaluate(std::span<const Position> predictions, std::span<const Position> truth) {
  auto e = errors_m(predictions, truth);
  if (e.empty()) throw TrackingError("no samples to evaluate");
  MetricsReport r;
  r.count = e.size();
  const double n = static_cast<double>(e.size());

  double sum = 0.0, sum_sq = 0.0;
  for (double v : e) {
    sum += v;
    sum_sq += v * v;
    std::size_t c = 0;
    while (c < kCategoryEdgesM.size() && v > kCategoryEdgesM[c]) ++c;
    if (c < kCategoryEdgesM.size()) {
      ++r.categories[c];
    } else {
      ++r.beyond;
    }
  }
  const double mean = sum / n;
  double var = 0.0;
  for (double v : e) var += (v - mean) * (v - mean);
  var /= n;

  std::sort(e.begin(), e.end());
  const std::size_t mid = e.size() / 2;
  const double median = e.size() % 2 ? e[mid] : 0.5 * (e[mid - 1] + e[mid]);

  r.mean_cm = 100.0 * mean;
  r.median_cm = 100.0 * median;
  r.std_cm = 100.0 * std::sqrt(var);
  r.rmse_cm = 100.0 * std::sqrt(sum_sq / n);
  r.max_cm = 100.0 * e.back();
  r.cdf.reserve(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) r.cdf.push_back({e[i], static_cast<double>(i + 1) / n});
  return r;
}

std::string to_json(const MetricsReport& r, int indent, bool include_cdf) {
  nlohmann::ordered_json j;
  j["count"] = r.count;
  j["mean_cm"] = r.mean_cm;
  j["median_cm"] = r.median_cm;
  j["std_cm"] = r.std_cm;
  j["rmse_cm"] = r.rmse_cm;
  j["max_cm"] = r.max_cm;
  const char* labels[] = {"<=0.5m", "0.5-1m", "1-2m", "2-10m"};
  auto cats = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.categories.size(); ++c) {
    cats.push_back({{"label", labels[c]},
                    {"upper_m", kCategoryEdgesM[c]},
                    {"count", r.categories[c]},
                    {"fraction", r.category_fraction(c)}});
  }
  j["categories"] = cats;
  j["beyond_10m"] = r.beyond;
  j["fraction_within_1m"] = r.fraction_within(1.0);
  if (include_cdf) {
    auto cdf = nlohmann::ordered_json::array();
    for (const auto& p : r.cdf) cdf.push_back({p.error_m, p.probability});
    j["cdf"] = cdf;
  }
  return j.dump(indent);
}

void write_metrics_csv_header(std::ostream& out) {
  out << "label,count,mean_cm,median_cm,std_cm,rmse_cm,max_cm,cat_le_0_5m,cat_0_5_1m,cat_1_2m,cat_2_10m,beyond_10m\n";
}

void write_metrics_csv_row(std::ostream& out, const std::string& label, const MetricsReport& r) {
  out << label << ',' << r.count << std::setprecision(10) << ',' << r.mean_cm << ',' << r.median_cm << ','
      << r.std_cm << ',' << r.rmse_cm << ',' << r.max_cm;
  for (std::size_t c = 0; c < r.categories.size(); ++c) out << ',' << r.category_fraction(c);
  out << ',' << r.beyond << '\n';
}

void write_cdf_csv(std::ostream& out, const MetricsReport& r) {
  out << "error_m,probability\n" << std::setprecision(10);
  for (const auto& p : r.cdf) out << p.error_m << ',' << p.probability << '\n';
}

}  // namespace cusense::tracking
