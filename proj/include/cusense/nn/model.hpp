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

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cusense/common/record_file.hpp"
#include "cusense/nn/kernels.hpp"

namespace cusense::nn {

inline constexpr const char* kWeightMagic = "CUSW0001";

struct ModelConfig {
  std::size_t in_channels{4};
  std::size_t grid_h{32};
  std::size_t grid_w{32};
};

struct ProbabilityGrid {
  FloatTensor p;  // [H, W]
  std::uint64_t tti{0};
};

// Output shape of each layer of a forward pass, in execution order.
struct LayerTrace {
  std::string layer;
  Shape output;
};

// Conv stem (k7 s1 p3) + BN + ReLU + MaxPool(2), three plain blocks of
// [conv k3 s2 p1, BN, ReLU, conv k3 s1 p1, BN, ReLU] widening 64 -> 128 ->
// 256 -> 512, global average pool, FC 512-512-256-(H*W) and a softmax.
// Parameters are held in the weight file's record order; BN layers are one
// [4, C] tensor with rows gamma, beta, running_mean, running_var.
class CusenseModel {
 public:
  static constexpr std::size_t kStemChannels = 64;
  static constexpr std::size_t kBlockChannels[3] = {128, 256, 512};
  static constexpr std::size_t kFcHidden[2] = {512, 256};

  // Record names and dims for a configuration, in file order.
  static std::vector<std::pair<std::string, Shape>> layout(const ModelConfig& config);

  // He-initialized weights with perturbed BN statistics, for tests and benches.
  static CusenseModel random(const ModelConfig& config, std::uint64_t seed);
  // Every parameter zero, including BN variance.
  static CusenseModel zeros(const ModelConfig& config);

  static CusenseModel from_records(const RecordFile& file);
  RecordFile to_records() const;
  static CusenseModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t parameter_count() const;
  const FloatTensor& parameter(const std::string& name) const;

  // x [A, K_v] -> grid [H, W]. Throws ShapeError for a channel mismatch or a
  // K_v too short for the stride ladder.
  ProbabilityGrid forward(const FloatTensor& x, std::vector<LayerTrace>* trace = nullptr) const;

  // Smallest K_v for which every stage keeps a positive length.
  static std::size_t min_input_length();

 private:
  explicit CusenseModel(const ModelConfig& config);
  const FloatTensor& at(std::size_t index) const { return params_[index].second; }

  ModelConfig config_;
  std::vector<std::pair<std::string, FloatTensor>> params_;
};

}  // namespace cusense::nn
