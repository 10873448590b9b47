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

#include "cusense/nn/model.hpp"

#include <cmath>
#include <random>

namespace cusense::nn {
namespace {

// Record order: grid meta (i64) first, then these per layer.
enum : std::size_t {
  kStemW, kStemB, kStemBn,
  kBlock0,  // each block: conv_a.w, conv_a.b, bn_a, conv_b.w, conv_b.b, bn_b
  kFc0 = kBlock0 + 3 * 6,
  kParamCount = kFc0 + 6,
};

BatchNormParams unpack_bn(const FloatTensor& stats) {
  const std::size_t c = stats.dim(1);
  const float* p = stats.data();
  return BatchNormParams{{p, p + c}, {p + c, p + 2 * c}, {p + 2 * c, p + 3 * c}, {p + 3 * c, p + 4 * c}};
}

std::span<const float> as_span(const FloatTensor& t) { return t.values(); }

}  // namespace

std::vector<std::pair<std::string, Shape>> CusenseModel::layout(const ModelConfig& c) {
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"conv0.weight", {kStemChannels, c.in_channels, 7}});
  out.push_back({"conv0.bias", {kStemChannels}});
  out.push_back({"bn0.stats", {4, kStemChannels}});
  std::size_t cin = kStemChannels;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t cout = kBlockChannels[b];
    const std::string p = "block" + std::to_string(b + 1) + ".";
    out.push_back({p + "conv_a.weight", {cout, cin, 3}});
    out.push_back({p + "conv_a.bias", {cout}});
    out.push_back({p + "bn_a.stats", {4, cout}});
    out.push_back({p + "conv_b.weight", {cout, cout, 3}});
    out.push_back({p + "conv_b.bias", {cout}});
    out.push_back({p + "bn_b.stats", {4, cout}});
    cin = cout;
  }
  const std::size_t fc_in[3] = {kBlockChannels[2], kFcHidden[0], kFcHidden[1]};
  const std::size_t fc_out[3] = {kFcHidden[0], kFcHidden[1], c.grid_h * c.grid_w};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "fc" + std::to_string(i + 1) + ".";
    out.push_back({p + "weight", {fc_out[i], fc_in[i]}});
    out.push_back({p + "bias", {fc_out[i]}});
  }
  return out;
}

CusenseModel::CusenseModel(const ModelConfig& config) : config_(config) {
  if (config.in_channels == 0 || config.grid_h == 0 || config.grid_w == 0) {
    throw ShapeError("model dimensions must be positive");
  }
  for (auto& [name, dims] : layout(config)) params_.emplace_back(name, FloatTensor(dims));
}

CusenseModel CusenseModel::zeros(const ModelConfig& config) { return CusenseModel(config); }

CusenseModel CusenseModel::random(const ModelConfig& config, std::uint64_t seed) {
  CusenseModel m(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_real_distribution<float> u(0.5f, 1.5f);
  for (auto& [name, t] : m.params_) {
    auto& v = t.storage();
    if (name.ends_with(".stats")) {
      const std::size_t c = t.dim(1);
      for (std::size_t i = 0; i < c; ++i) {
        v[i] = u(rng);                 // gamma
        v[c + i] = 0.1f * n(rng);      // beta
        v[2 * c + i] = 0.1f * n(rng);  // running mean
        v[3 * c + i] = u(rng);         // running var
      }
    } else if (name.ends_with(".bias")) {
      for (auto& x : v) x = 0.01f * n(rng);
    } else {
      const std::size_t fan_in = t.size() / t.dim(0);
      const float std = std::sqrt(2.0f / static_cast<float>(fan_in));
      for (auto& x : v) x = std * n(rng);
    }
  }
  return m;
}

CusenseModel CusenseModel::from_records(const RecordFile& file) {
  if (file.magic != kWeightMagic) throw RecordFileError("weight file magic is not " + std::string(kWeightMagic));
  const auto grid = file.require("meta.grid").to_i64();
  const auto& w0 = file.require("conv0.weight");
  if (grid.size() != 2 || grid[0] <= 0 || grid[1] <= 0) throw RecordFileError("record 'meta.grid' must hold [H, W]");
  if (w0.dims.size() != 3) throw RecordFileError("record 'conv0.weight' must be rank 3");
  ModelConfig cfg{w0.dims[1], static_cast<std::size_t>(grid[0]), static_cast<std::size_t>(grid[1])};
  CusenseModel m(cfg);
  if (file.records.size() != m.params_.size() + 1) {
    throw RecordFileError("weight file has " + std::to_string(file.records.size()) + " records, expected " +
                          std::to_string(m.params_.size() + 1));
  }
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    auto& [name, t] = m.params_[i];
    const auto& r = file.records[i + 1];
    if (r.name != name) throw RecordFileError("record " + std::to_string(i + 1) + " is '" + r.name + "', expected '" + name + "'");
    if (r.dims != t.shape()) {
      throw RecordFileError("record '" + name + "' has dims " + shape_to_string(r.dims) + ", expected " +
                            shape_to_string(t.shape()));
    }
    if (r.dtype != RecordDType::kF32) throw RecordFileError("record '" + name + "' must be f32");
    t = FloatTensor(t.shape(), r.to_f32());
  }
  return m;
}

RecordFile CusenseModel::to_records() const {
  RecordFile f;
  f.magic = kWeightMagic;
  const std::vector<std::int64_t> grid{static_cast<std::int64_t>(config_.grid_h), static_cast<std::int64_t>(config_.grid_w)};
  f.records.push_back(TensorRecord::from_i64("meta.grid", {2}, grid));
  for (const auto& [name, t] : params_) f.records.push_back(TensorRecord::from_f32(name, t.shape(), t.storage()));
  return f;
}

CusenseModel CusenseModel::load(const std::filesystem::path& path) {
  return from_records(read_record_file(path, kWeightMagic));
}

void CusenseModel::save(const std::filesystem::path& path) const { write_record_file(path, to_records()); }

std::size_t CusenseModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) {
    // Running statistics are buffers, not trainable parameters.
    n += name.ends_with(".stats") ? t.size() / 2 : t.size();
  }
  return n;
}

const FloatTensor& CusenseModel::parameter(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

std::size_t CusenseModel::min_input_length() {
  for (std::size_t L = 1;; ++L) {
    std::size_t l = conv_out_length(L, 7, 1, 3);
    l = l >= 2 ? conv_out_length(l, 2, 2, 0) : 0;
    for (int b = 0; b < 3 && l > 0; ++b) l = conv_out_length(l, 3, 2, 1);
    if (l > 0) return L;
  }
}

ProbabilityGrid CusenseModel::forward(const FloatTensor& x, std::vector<LayerTrace>* trace) const {
  if (x.rank() != 2 || x.dim(0) != config_.in_channels) {
    throw ShapeError("model expects input [" + std::to_string(config_.in_channels) + ", K_v], got " +
                     shape_to_string(x.shape()));
  }
  if (x.dim(1) < min_input_length()) {
    throw ShapeError("K_v = " + std::to_string(x.dim(1)) + " is too short for the stride ladder (minimum " +
                     std::to_string(min_input_length()) + ")");
  }
  auto note = [&](const char* layer, const Shape& s) {
    if (trace) trace->push_back({layer, s});
  };
  auto conv_bn_relu = [&](const FloatTensor& in, std::size_t w, std::size_t stride, std::size_t pad,
                          const char* name) {
    auto y = conv1d(in, at(w), as_span(at(w + 1)), stride, pad);
    note(name, y.shape());
    return relu(batchnorm_inference(y, unpack_bn(at(w + 2))));
  };

  auto h = conv_bn_relu(x, kStemW, 1, 3, "conv0");
  h = maxpool1d(h, 2, 2);
  note("maxpool", h.shape());
  static const char* names[3][2] = {{"block1.conv_a", "block1.conv_b"},
                                    {"block2.conv_a", "block2.conv_b"},
                                    {"block3.conv_a", "block3.conv_b"}};
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t base = kBlock0 + 6 * b;
    h = conv_bn_relu(h, base, 2, 1, names[b][0]);
    h = conv_bn_relu(h, base + 3, 1, 1, names[b][1]);
  }
  h = adaptive_avg_pool(h, 1);
  note("avgpool", h.shape());

  std::vector<float> v(h.storage().begin(), h.storage().end());
  for (std::size_t i = 0; i < 3; ++i) {
    v = linear(v, at(kFc0 + 2 * i), as_span(at(kFc0 + 2 * i + 1)));
    if (i < 2) {
      for (auto& z : v) z = z > 0.0f ? z : 0.0f;
    }
    note(i == 0 ? "fc1" : i == 1 ? "fc2" : "fc3", {v.size()});
  }
  ProbabilityGrid g{FloatTensor({config_.grid_h, config_.grid_w}, softmax(v)), 0};
  note("softmax", g.p.shape());
  return g;
}

}  // namespace cusense::nn
