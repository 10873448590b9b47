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

#include "cusense/dapp/backend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cusense::dapp {
namespace {

Shape payload_dims(const telemetry::SlotSnapshot& slot) {
  try {
    return telemetry::peek_payload_dims(slot.payload);
  } catch (const telemetry::PayloadError& e) {
    throw DimensionMismatch(std::string("unreadable payload header: ") + e.what());
  }
}

void require_dims(const Shape& got, const Shape& want, const std::string& backend) {
  // HEST headers carry a trailing 0 in the fourth dimension slot.
  Shape g = got;
  while (g.size() > want.size() && g.back() == 0) g.pop_back();
  if (g != want) {
    throw DimensionMismatch(backend + " expects payload dims " + shape_to_string(want) + ", got " +
                            shape_to_string(got));
  }
}

sensing::CsiTensor decode_csi(const telemetry::SlotSnapshot& slot, const Shape& want, const std::string& backend,
                              std::uint64_t timestamp_ns) {
  require_dims(payload_dims(slot), want, backend);
  const auto hest = telemetry::decode_hest(slot.payload);
  return sensing::csi_from_hest(hest, slot.meta.tti, timestamp_ns);
}

FloatTensor to_float(const RealTensor& t) {
  FloatTensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<float>(t[i]);
  return out;
}

const FloatTensor& float_input(const BackendInput& in, const std::string& backend) {
  const auto* f = std::get_if<FloatTensor>(&in);
  if (!f) throw BackendError(backend + " received a non-feature input");
  return *f;
}

}  // namespace

std::vector<float> prb_power(const telemetry::IqTensor& iq) {
  const auto& d = iq.shape();
  if (d.size() != 5 || d[3] != 12 || d[4] != 2) {
    throw DimensionMismatch("IQ tensor must be [A, symbols, PRB, 12, 2], got " + shape_to_string(d));
  }
  const std::size_t A = d[0], S = d[1], P = d[2];
  const auto& table = half_decode_table();
  std::vector<double> acc(P, 0.0);
  const auto* raw = iq.data();
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t s = 0; s < S; ++s) {
      const auto* row = raw + (a * S + s) * P * 24;
      for (std::size_t p = 0; p < P; ++p) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 24; ++k) {
          const double v = table[row[p * 24 + k].bits];
          sum += v * v;
        }
        acc[p] += sum;
      }
    }
  }
  const double norm = 1.0 / static_cast<double>(A * S * 12);
  std::vector<float> out(P);
  for (std::size_t p = 0; p < P; ++p) {
    if (!std::isfinite(acc[p])) throw BackendError("non-finite IQ sample in PRB " + std::to_string(p));
    out[p] = static_cast<float>(acc[p] * norm);
  }
  return out;
}

IqProcessorBackend::IqProcessorBackend(Shape dims) : dims_(std::move(dims)) {
  if (dims_.size() != 5 || dims_[3] != 12 || dims_[4] != 2) {
    throw BackendError("iq_processor dims must be [A, symbols, PRB, 12, 2]");
  }
}

BackendInput IqProcessorBackend::preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t) {
  // The IQ header lists (A, symbols, PRB, subcarriers); the I/Q pair is implicit.
  auto dims = payload_dims(slot);
  dims.push_back(2);
  require_dims(dims, dims_, name());
  return telemetry::decode_iq(slot.payload);
}

FloatTensor IqProcessorBackend::infer(const BackendInput& input) {
  const auto* iq = std::get_if<telemetry::IqTensor>(&input);
  if (!iq) throw BackendError("iq_processor received a non-IQ input");
  auto p = prb_power(*iq);
  const std::size_t n = p.size();
  return FloatTensor({n}, std::move(p));
}

std::vector<std::vector<std::uint32_t>> prb_groups(std::span<const std::uint32_t> bins) {
  std::vector<std::vector<std::uint32_t>> groups;
  std::uint32_t current = std::numeric_limits<std::uint32_t>::max();
  for (std::uint32_t i = 0; i < bins.size(); ++i) {
    const std::uint32_t prb = bins[i] / 12;
    if (prb != current) {
      groups.emplace_back();
      current = prb;
    }
    groups.back().push_back(i);
  }
  return groups;
}

std::vector<float> group_features(const RealTensor& f, const std::vector<std::vector<std::uint32_t>>& groups) {
  const std::size_t A = f.dim(0), kv = f.dim(1);
  std::vector<float> out(A * groups.size());
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double sum = 0.0;
      for (auto idx : groups[g]) sum += f[a * kv + idx];
      out[a * groups.size() + g] = static_cast<float>(sum / static_cast<double>(groups[g].size()));
    }
  }
  return out;
}

MatchedFilterDictionary build_dictionary(const emulator::SceneConfig& scene, const sensing::BackgroundTemplate& tmpl,
                                         const tracking::GridGeometry& grid) {
  scene.validate();
  grid.validate();
  MatchedFilterDictionary d;
  d.grid = grid;
  d.bins = tmpl.valid_bins();
  if (d.bins.empty()) throw BackendError("background template has no valid bins");
  d.groups = prb_groups(d.bins);
  d.antennas = scene.antennas;
  const auto background = emulator::synth_background(scene);
  if (background.shape() != tmpl.mean.shape()) {
    throw BackendError("scene shape " + shape_to_string(background.shape()) + " does not match the template " +
                       shape_to_string(tmpl.mean.shape()));
  }
  d.templates.reserve(grid.cells() * d.feature_length());
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const auto p = grid.center(grid.cell(c));
    auto h = background;
    const auto t = emulator::target_response(scene, {p.x, p.y});
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += t[i];
    const auto f = sensing::subtract_and_reduce(h, tmpl, d.bins);
    const auto g = group_features(f, d.groups);
    d.templates.insert(d.templates.end(), g.begin(), g.end());
  }
  return d;
}

MatchedFilterBackend::MatchedFilterBackend(sensing::BackgroundTemplate tmpl, MatchedFilterDictionary dictionary,
                                           std::uint64_t window_ns)
    : pre_(std::move(tmpl), std::nullopt, window_ns), dict_(std::move(dictionary)) {
  const auto& s = pre_.background().mean.shape();
  hest_dims_ = s;
  if (pre_.bins() != dict_.bins) throw BackendError("dictionary bins differ from the background template");
  if (dict_.templates.size() != dict_.grid.cells() * dict_.feature_length()) {
    throw BackendError("dictionary size does not match its grid");
  }
}

InputContract MatchedFilterBackend::contract() const { return {DataType::kHest, hest_dims_}; }

BackendInput MatchedFilterBackend::preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t timestamp_ns) {
  const auto features = pre_.push(decode_csi(slot, hest_dims_, name(), timestamp_ns));
  auto g = group_features(features, dict_.groups);
  const std::size_t n = g.size();
  return FloatTensor({n}, std::move(g));
}

FloatTensor MatchedFilterBackend::infer(const BackendInput& input) {
  const auto& x = float_input(input, name());
  const std::size_t n = dict_.feature_length();
  if (x.size() != n) throw BackendError("matched_filter feature length mismatch");
  const std::size_t cells = dict_.grid.cells();
  std::vector<double> dist(cells);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cells; ++c) {
    const float* t = dict_.templates.data() + c * n;
    // Eight independent partial sums, combined in a fixed order.
    float part[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
      for (std::size_t l = 0; l < 8; ++l) {
        const float e = x[i + l] - t[i + l];
        part[l] += e * e;
      }
    }
    double d = 0.0;
    for (float v : part) d += v;
    for (; i < n; ++i) {
      const double e = static_cast<double>(x[i]) - t[i];
      d += e * e;
    }
    dist[c] = d;
    best = std::min(best, d);
  }
  // Per-feature noise variance estimated from the residual of the best match.
  const double var = std::max(best / static_cast<double>(n), 1e-30);
  FloatTensor out({dict_.grid.H, dict_.grid.W});
  double sum = 0.0;
  std::vector<double> w(cells);
  for (std::size_t c = 0; c < cells; ++c) sum += (w[c] = std::exp(-(dist[c] - best) / (2.0 * var)));
  for (std::size_t c = 0; c < cells; ++c) out[c] = static_cast<float>(w[c] / sum);
  return out;
}

CusenseBackend::CusenseBackend(sensing::BackgroundTemplate tmpl, sensing::NormStats stats, nn::CusenseModel model,
                               std::uint64_t window_ns)
    : pre_(std::move(tmpl), stats, window_ns), model_(std::move(model)) {
  hest_dims_ = pre_.background().mean.shape();
  if (model_.config().in_channels != hest_dims_.at(0)) {
    throw BackendError("model expects " + std::to_string(model_.config().in_channels) + " antennas, template has " +
                       std::to_string(hest_dims_.at(0)));
  }
  if (pre_.bins().size() < nn::CusenseModel::min_input_length()) throw BackendError("too few valid bins for the model");
}

InputContract CusenseBackend::contract() const { return {DataType::kHest, hest_dims_}; }

BackendInput CusenseBackend::preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t timestamp_ns) {
  return to_float(pre_.push(decode_csi(slot, hest_dims_, name(), timestamp_ns)));
}

FloatTensor CusenseBackend::infer(const BackendInput& input) {
  return model_.forward(float_input(input, name())).p;
}

std::vector<std::string> registered_backends() { return {"iq_processor", "matched_filter", "cusense"}; }

std::unique_ptr<InferenceBackend> make_backend(const std::string& name, BackendOptions o) {
  if (name == "iq_processor") return std::make_unique<IqProcessorBackend>(o.iq_dims);
  if (name == "matched_filter") {
    if (!o.background || !o.scene) throw BackendError("matched_filter needs a background template and a scene");
    auto dict = build_dictionary(*o.scene, *o.background, o.grid);
    return std::make_unique<MatchedFilterBackend>(std::move(*o.background), std::move(dict), o.window_ns);
  }
  if (name == "cusense") {
    if (!o.background || !o.norm || !o.model) {
      throw BackendError("cusense needs a background template, norm stats and model weights");
    }
    return std::make_unique<CusenseBackend>(std::move(*o.background), *o.norm, std::move(*o.model), o.window_ns);
  }
  throw BackendError("unknown backend '" + name + "'");
}

}  // namespace cusense::dapp
