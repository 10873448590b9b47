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

#include <complex>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cusense/common/tensor.hpp"
#include "cusense/telemetry/payloads.hpp"

namespace cusense::sensing {

class SensingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kDefaultTau = 1e-10;
inline constexpr std::uint64_t kDefaultWindowNs = 2'000'000;
inline constexpr double kZscoreEps = 1e-8;
inline constexpr double kProbFloor = 1e-12;

struct CsiTensor {
  ComplexTensor values;  // [A, K, S]
  std::uint64_t tti{0};
  std::uint64_t timestamp_ns{0};
};

CsiTensor csi_from_hest(const telemetry::HestTensor& hest, std::uint64_t tti, std::uint64_t timestamp_ns);

// Indices i with |H_i[a,k,s]| > tau.
std::vector<std::size_t> validity_set(std::span<const CsiTensor> samples, std::size_t a, std::size_t k,
                                      std::size_t s, double tau = kDefaultTau);

struct BackgroundTemplate {
  ComplexTensor mean;              // H_B [A, K, S]
  Tensor<std::int64_t> counts;     // N [A, K, S]
  double tau{kDefaultTau};

  // Subcarriers whose every (a, s) cell saw at least one valid background sample.
  std::vector<std::uint32_t> valid_bins() const;
};

BackgroundTemplate background_template(std::span<const CsiTensor> samples, double tau = kDefaultTau);

// Record file with magic "CUSB0001": mean.real, mean.imag (f64), counts (i64), tau (f64 [1]).
void save_background(const std::string& path, const BackgroundTemplate& tmpl);
BackgroundTemplate load_background(const std::string& path);

// Samples with t - delta <= t_i <= t. Throws on an unsorted stream.
std::span<const CsiTensor> temporal_window(std::span<const CsiTensor> stream, std::uint64_t t_ns,
                                           std::uint64_t delta_ns = kDefaultWindowNs);

// Per-cell complex mean over entries with |H| > tau; zero where none qualify.
ComplexTensor coherent_average(std::span<const CsiTensor> window, double tau = kDefaultTau);

// |avg| - |H_B| per cell, averaged over S, restricted to `bins`; [A, bins.size()].
RealTensor subtract_and_reduce(const ComplexTensor& avg, const BackgroundTemplate& tmpl,
                               std::span<const std::uint32_t> bins);

struct NormStats {
  double mu{0.0};
  double sigma{1.0};
  double eps{kZscoreEps};
};

// Population mean/std over every element of every tensor.
NormStats compute_norm_stats(std::span<const RealTensor> corpus);
RealTensor zscore(const RealTensor& features, const NormStats& stats);

// Truncated Gaussian (radius ceil(3 sigma)) around (i, j), zero-padded at the
// grid edge and renormalized to sum 1. Row-major [H, W].
RealTensor smooth_labels(std::size_t i, std::size_t j, std::size_t H, std::size_t W, double sigma = 8.0);

// sum P_Y log(P_Y / max(P_X, 1e-12)), with 0 log 0 = 0.
double kl_loss(std::span<const double> p_y, std::span<const double> p_x);

// Live Stage 1-2 chain: keeps the causal window, returns X_t per new sample.
class Preprocessor {
 public:
  Preprocessor(BackgroundTemplate tmpl, std::optional<NormStats> stats, std::uint64_t delta_ns = kDefaultWindowNs);

  // Consumes one slot; samples must arrive in timestamp order.
  RealTensor push(CsiTensor sample);
  std::size_t window_size() const noexcept { return window_.size(); }
  const std::vector<std::uint32_t>& bins() const noexcept { return bins_; }
  const BackgroundTemplate& background() const noexcept { return tmpl_; }
  void reset() { window_.clear(); }

 private:
  BackgroundTemplate tmpl_;
  std::optional<NormStats> stats_;
  std::uint64_t delta_ns_;
  std::vector<std::uint32_t> bins_;
  std::deque<CsiTensor> window_;
  std::vector<const ComplexTensor*> scratch_;
};

}  // namespace cusense::sensing
