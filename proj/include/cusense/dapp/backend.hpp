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
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cusense/common/data_type.hpp"
#include "cusense/common/tensor.hpp"
#include "cusense/emulator/scene.hpp"
#include "cusense/nn/model.hpp"
#include "cusense/sensing/pipeline.hpp"
#include "cusense/telemetry/payloads.hpp"
#include "cusense/telemetry/plane.hpp"
#include "cusense/tracking/tracking.hpp"

namespace cusense::dapp {

// A slot payload whose layout does not match the backend's input contract.
class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InputContract {
  DataType data_type{DataType::kHest};
  Shape payload_dims;  // dims carried in the payload header
};

// Output of the preprocessing stage, handed to infer().
using BackendInput = std::variant<telemetry::IqTensor, FloatTensor>;

class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;
  virtual std::string name() const = 0;
  virtual InputContract contract() const = 0;
  virtual Shape output_dims() const = 0;
  // True when the output is a probability grid over the tracking area.
  virtual bool produces_grid() const { return false; }

  // Validates and decodes one slot, then runs any stateful preprocessing
  // (temporal windows live here). Throws DimensionMismatch on a contract violation.
  virtual BackendInput preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t timestamp_ns) = 0;
  // Deterministic in its input and loaded state.
  virtual FloatTensor infer(const BackendInput& input) = 0;
};

// Mean power per PRB over antennas, symbols and subcarriers,
// accumulated in double. IQ layout [A, symbols, PRB, 12, 2].
std::vector<float> prb_power(const telemetry::IqTensor& iq);

inline const Shape kIqProcessorDims{4, 14, 273, 12, 2};

class IqProcessorBackend final : public InferenceBackend {
 public:
  explicit IqProcessorBackend(Shape dims = kIqProcessorDims);
  std::string name() const override { return "iq_processor"; }
  InputContract contract() const override { return {DataType::kIq, dims_}; }
  Shape output_dims() const override { return {dims_.at(2)}; }
  BackendInput preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t timestamp_ns) override;
  FloatTensor infer(const BackendInput& input) override;

 private:
  Shape dims_;
};

// Template dictionary: one background-subtracted feature vector per grid cell.
struct MatchedFilterDictionary {
  tracking::GridGeometry grid;
  std::vector<std::uint32_t> bins;                // valid bins feeding the features
  std::vector<std::vector<std::uint32_t>> groups; // positions in `bins` averaged per feature
  std::size_t antennas{0};
  std::vector<float> templates;                   // [cells, antennas * groups]

  std::size_t feature_length() const noexcept { return antennas * groups.size(); }
};

// Groups valid bins by PRB (12 subcarriers) so each feature is a PRB mean.
std::vector<std::vector<std::uint32_t>> prb_groups(std::span<const std::uint32_t> bins);

// Averages an [A, K_v] feature map over PRB groups into [A * groups].
std::vector<float> group_features(const RealTensor& features, const std::vector<std::vector<std::uint32_t>>& groups);

// Noiseless channel for a target at every cell centre through the Stage 2 chain.
MatchedFilterDictionary build_dictionary(const emulator::SceneConfig& scene, const sensing::BackgroundTemplate& tmpl,
                                         const tracking::GridGeometry& grid);

// Nearest-template localization. Output is a posterior grid under white
// Gaussian feature noise whose variance is estimated from the best match.
class MatchedFilterBackend final : public InferenceBackend {
 public:
  MatchedFilterBackend(sensing::BackgroundTemplate tmpl, MatchedFilterDictionary dictionary,
                       std::uint64_t window_ns = sensing::kDefaultWindowNs);
  std::string name() const override { return "matched_filter"; }
  InputContract contract() const override;
  Shape output_dims() const override { return {dict_.grid.H, dict_.grid.W}; }
  bool produces_grid() const override { return true; }
  BackendInput preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t timestamp_ns) override;
  FloatTensor infer(const BackendInput& input) override;

  const MatchedFilterDictionary& dictionary() const noexcept { return dict_; }

 private:
  sensing::Preprocessor pre_;
  MatchedFilterDictionary dict_;
  Shape hest_dims_;
};

// Stage 1-2 preprocessing, z-score, then the 1D CNN.
class CusenseBackend final : public InferenceBackend {
 public:
  CusenseBackend(sensing::BackgroundTemplate tmpl, sensing::NormStats stats, nn::CusenseModel model,
                 std::uint64_t window_ns = sensing::kDefaultWindowNs);
  std::string name() const override { return "cusense"; }
  InputContract contract() const override;
  Shape output_dims() const override { return {model_.config().grid_h, model_.config().grid_w}; }
  bool produces_grid() const override { return true; }
  BackendInput preprocess(const telemetry::SlotSnapshot& slot, std::uint64_t timestamp_ns) override;
  FloatTensor infer(const BackendInput& input) override;

 private:
  sensing::Preprocessor pre_;
  nn::CusenseModel model_;
  Shape hest_dims_;
};

// Everything a backend may need; unused fields are ignored.
struct BackendOptions {
  std::optional<sensing::BackgroundTemplate> background;
  std::optional<sensing::NormStats> norm;
  std::optional<nn::CusenseModel> model;
  std::optional<emulator::SceneConfig> scene;  // for the matched-filter dictionary
  tracking::GridGeometry grid;
  Shape iq_dims{kIqProcessorDims};
  std::uint64_t window_ns{sensing::kDefaultWindowNs};
};

std::vector<std::string> registered_backends();
std::unique_ptr<InferenceBackend> make_backend(const std::string& name, BackendOptions options);

}  // namespace cusense::dapp
