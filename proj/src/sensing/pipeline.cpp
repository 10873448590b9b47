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

#include "cusense/sensing/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "cusense/common/record_file.hpp"

namespace cusense::sensing {
namespace {

constexpr const char* kBackgroundMagic = "CUSB0001";

void require_rank3(const ComplexTensor& t, const char* what) {
  if (t.rank() != 3) throw SensingError(std::string(what) + " must be rank 3 [A, K, S]");
}

// |v| without hypot's overflow guards; CSI magnitudes are far from the limits.
inline double magnitude(std::complex<double> v) { return std::sqrt(v.real() * v.real() + v.imag() * v.imag()); }

ComplexTensor average_ptrs(std::span<const ComplexTensor* const> window, double tau) {
  if (window.empty()) throw SensingError("coherent average of an empty window");
  const auto& shape = window.front()->shape();
  for (const auto* t : window) {
    if (t->shape() != shape) throw SensingError("window tensors have mismatched shapes");
  }
  ComplexTensor out(shape);
  const std::size_t n = out.size();
  for (std::size_t c = 0; c < n; ++c) {
    double re = 0.0, im = 0.0;
    std::size_t count = 0;
    for (const auto* t : window) {
      const auto v = (*t)[c];
      if (magnitude(v) > tau) {
        re += v.real();
        im += v.imag();
        ++count;
      }
    }
    if (count) out[c] = {re / static_cast<double>(count), im / static_cast<double>(count)};
  }
  return out;
}

}  // namespace

CsiTensor csi_from_hest(const telemetry::HestTensor& hest, std::uint64_t tti, std::uint64_t timestamp_ns) {
  CsiTensor out{ComplexTensor(hest.shape()), tti, timestamp_ns};
  for (std::size_t i = 0; i < hest.size(); ++i) out.values[i] = std::complex<double>(hest[i].real(), hest[i].imag());
  return out;
}

std::vector<std::size_t> validity_set(std::span<const CsiTensor> samples, std::size_t a, std::size_t k,
                                      std::size_t s, double tau) {
  if (!(tau > 0.0)) throw SensingError("tau must be positive");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& t = samples[i].values;
    require_rank3(t, "CSI tensor");
    if (a >= t.dim(0) || k >= t.dim(1) || s >= t.dim(2)) throw SensingError("validity_set index out of range");
    if (std::abs(t[(a * t.dim(1) + k) * t.dim(2) + s]) > tau) out.push_back(i);
  }
  return out;
}

std::vector<std::uint32_t> BackgroundTemplate::valid_bins() const {
  std::vector<std::uint32_t> bins;
  if (counts.rank() != 3) return bins;
  const std::size_t A = counts.dim(0), K = counts.dim(1), S = counts.dim(2);
  for (std::size_t k = 0; k < K; ++k) {
    bool ok = true;
    for (std::size_t a = 0; a < A && ok; ++a) {
      for (std::size_t s = 0; s < S && ok; ++s) ok = counts[(a * K + k) * S + s] > 0;
    }
    if (ok) bins.push_back(static_cast<std::uint32_t>(k));
  }
  return bins;
}

BackgroundTemplate background_template(std::span<const CsiTensor> samples, double tau) {
  if (samples.empty()) throw SensingError("background template needs at least one sample");
  if (!(tau > 0.0)) throw SensingError("tau must be positive");
  const auto& shape = samples.front().values.shape();
  BackgroundTemplate tmpl{ComplexTensor(shape), Tensor<std::int64_t>(shape), tau};
  require_rank3(tmpl.mean, "CSI tensor");
  for (const auto& smp : samples) {
    if (smp.values.shape() != shape) throw SensingError("background samples have mismatched shapes");
    for (std::size_t c = 0; c < smp.values.size(); ++c) {
      const auto v = smp.values[c];
      if (std::abs(v) > tau) {
        tmpl.mean[c] += v;
        ++tmpl.counts[c];
      }
    }
  }
  for (std::size_t c = 0; c < tmpl.mean.size(); ++c) {
    if (tmpl.counts[c] > 0) tmpl.mean[c] /= static_cast<double>(tmpl.counts[c]);
  }
  return tmpl;
}

void save_background(const std::string& path, const BackgroundTemplate& tmpl) {
  std::vector<double> re(tmpl.mean.size()), im(tmpl.mean.size());
  for (std::size_t i = 0; i < tmpl.mean.size(); ++i) {
    re[i] = tmpl.mean[i].real();
    im[i] = tmpl.mean[i].imag();
  }
  RecordFile f;
  f.magic = kBackgroundMagic;
  f.records.push_back(TensorRecord::from_f64("mean.real", tmpl.mean.shape(), re));
  f.records.push_back(TensorRecord::from_f64("mean.imag", tmpl.mean.shape(), im));
  f.records.push_back(TensorRecord::from_i64("counts", tmpl.counts.shape(), tmpl.counts.storage()));
  f.records.push_back(TensorRecord::from_f64("tau", {1}, std::vector<double>{tmpl.tau}));
  write_record_file(path, f);
}

BackgroundTemplate load_background(const std::string& path) {
  const auto f = read_record_file(path, kBackgroundMagic);
  const auto& re = f.require("mean.real");
  const auto& im = f.require("mean.imag");
  const auto& counts = f.require("counts");
  if (re.dims != im.dims || re.dims != counts.dims || re.dims.size() != 3) {
    throw SensingError(path + ": background records have inconsistent shapes");
  }
  const Shape shape(re.dims.begin(), re.dims.end());
  const auto r = re.to_f64(), i = im.to_f64();
  BackgroundTemplate tmpl{ComplexTensor(shape), Tensor<std::int64_t>(shape, counts.to_i64()), 0.0};
  for (std::size_t c = 0; c < r.size(); ++c) tmpl.mean[c] = {r[c], i[c]};
  const auto tau = f.require("tau").to_f64();
  if (tau.size() != 1 || !(tau[0] > 0.0)) throw SensingError(path + ": invalid tau record");
  tmpl.tau = tau[0];
  return tmpl;
}

std::span<const CsiTensor> temporal_window(std::span<const CsiTensor> stream, std::uint64_t t_ns,
                                           std::uint64_t delta_ns) {
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].timestamp_ns < stream[i - 1].timestamp_ns) throw SensingError("stream is not sorted by timestamp");
  }
  const std::uint64_t lo = t_ns >= delta_ns ? t_ns - delta_ns : 0;
  auto first = std::lower_bound(stream.begin(), stream.end(), lo,
                                [](const CsiTensor& c, std::uint64_t v) { return c.timestamp_ns < v; });
  auto last = std::upper_bound(stream.begin(), stream.end(), t_ns,
                               [](std::uint64_t v, const CsiTensor& c) { return v < c.timestamp_ns; });
  if (last <= first) return {};
  return stream.subspan(static_cast<std::size_t>(first - stream.begin()), static_cast<std::size_t>(last - first));
}

ComplexTensor coherent_average(std::span<const CsiTensor> window, double tau) {
  std::vector<const ComplexTensor*> ptrs;
  for (const auto& c : window) ptrs.push_back(&c.values);
  return average_ptrs(ptrs, tau);
}

RealTensor subtract_and_reduce(const ComplexTensor& avg, const BackgroundTemplate& tmpl,
                               std::span<const std::uint32_t> bins) {
  require_rank3(avg, "average");
  if (avg.shape() != tmpl.mean.shape()) {
    throw SensingError("average shape " + shape_to_string(avg.shape()) + " does not match template " +
                       shape_to_string(tmpl.mean.shape()));
  }
  const std::size_t A = avg.dim(0), K = avg.dim(1), S = avg.dim(2);
  RealTensor out({A, bins.size()});
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const std::size_t k = bins[b];
      if (k >= K) throw SensingError("valid bin index out of range");
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t c = (a * K + k) * S + s;
        acc += magnitude(avg[c]) - magnitude(tmpl.mean[c]);
      }
      out[a * bins.size() + b] = acc / static_cast<double>(S);
    }
  }
  return out;
}

NormStats compute_norm_stats(std::span<const RealTensor> corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : corpus) {
    for (double v : t.values()) sum += v;
    n += t.size();
  }
  if (n == 0) throw SensingError("normalization statistics need a non-empty corpus");
  const double mu = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& t : corpus) {
    for (double v : t.values()) ss += (v - mu) * (v - mu);
  }
  return NormStats{mu, std::sqrt(ss / static_cast<double>(n)), kZscoreEps};
}

RealTensor zscore(const RealTensor& features, const NormStats& stats) {
  if (!std::isfinite(stats.mu) || !std::isfinite(stats.sigma) || stats.sigma < 0.0 || !(stats.eps > 0.0)) {
    throw SensingError("normalization statistics must be finite with sigma >= 0 and eps > 0");
  }
  RealTensor out(features.shape());
  const double denom = stats.sigma + stats.eps;
  for (std::size_t i = 0; i < features.size(); ++i) out[i] = (features[i] - stats.mu) / denom;
  return out;
}

RealTensor smooth_labels(std::size_t i, std::size_t j, std::size_t H, std::size_t W, double sigma) {
  if (i >= H || j >= W) throw SensingError("label cell outside the grid");
  if (!(sigma > 0.0)) throw SensingError("sigma must be positive");
  RealTensor p({H, W});
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  double total = 0.0;
  for (std::size_t r = 0; r < H; ++r) {
    const long di = static_cast<long>(r) - static_cast<long>(i);
    if (std::labs(di) > radius) continue;
    for (std::size_t c = 0; c < W; ++c) {
      const long dj = static_cast<long>(c) - static_cast<long>(j);
      if (std::labs(dj) > radius) continue;
      const double v = std::exp(-static_cast<double>(di * di + dj * dj) / (2.0 * sigma * sigma));
      p[r * W + c] = v;
      total += v;
    }
  }
  for (auto& v : p.storage()) v /= total;
  return p;
}

double kl_loss(std::span<const double> p_y, std::span<const double> p_x) {
  if (p_y.size() != p_x.size()) throw SensingError("KL inputs have different sizes");
  double kl = 0.0;
  for (std::size_t i = 0; i < p_y.size(); ++i) {
    if (p_y[i] <= 0.0) continue;
    kl += p_y[i] * std::log(p_y[i] / std::max(p_x[i], kProbFloor));
  }
  return kl;
}

Preprocessor::Preprocessor(BackgroundTemplate tmpl, std::optional<NormStats> stats, std::uint64_t delta_ns)
    : tmpl_(std::move(tmpl)), stats_(stats), delta_ns_(delta_ns), bins_(tmpl_.valid_bins()) {
  if (bins_.empty()) throw SensingError("background template has no valid subcarriers");
}

RealTensor Preprocessor::push(CsiTensor sample) {
  if (sample.values.shape() != tmpl_.mean.shape()) {
    throw SensingError("CSI shape " + shape_to_string(sample.values.shape()) + " does not match background " +
                       shape_to_string(tmpl_.mean.shape()));
  }
  if (!window_.empty() && sample.timestamp_ns < window_.back().timestamp_ns) {
    throw SensingError("CSI samples arrived out of timestamp order");
  }
  const std::uint64_t t = sample.timestamp_ns;
  window_.push_back(std::move(sample));
  const std::uint64_t lo = t >= delta_ns_ ? t - delta_ns_ : 0;
  while (window_.front().timestamp_ns < lo) window_.pop_front();

  scratch_.clear();
  for (const auto& c : window_) scratch_.push_back(&c.values);
  const auto avg = average_ptrs(scratch_, tmpl_.tau);
  auto features = subtract_and_reduce(avg, tmpl_, bins_);
  return stats_ ? zscore(features, *stats_) : features;
}

}  // namespace cusense::sensing
