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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cusense/common/tensor.hpp"

namespace cusense::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr float kBatchNormEps = 1e-5f;

// floor((L + 2p - k) / s) + 1, or 0 when the padded input is shorter than k.
std::size_t conv_out_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t pad);

// x [C_in, L], weight [C_out, C_in, k], bias [C_out] -> [C_out, L_out].
FloatTensor conv1d(const FloatTensor& x, const FloatTensor& weight, std::span<const float> bias, std::size_t stride,
                   std::size_t pad);

// Per-channel y = gamma (x - mean) / sqrt(var + eps) + beta on x [C, L].
struct BatchNormParams {
  std::vector<float> gamma, beta, mean, var;
};
FloatTensor batchnorm_inference(const FloatTensor& x, const BatchNormParams& bn, float eps = kBatchNormEps);

FloatTensor relu(FloatTensor x);
FloatTensor maxpool1d(const FloatTensor& x, std::size_t kernel, std::size_t stride);
// Bins [floor(i L / n), ceil((i + 1) L / n)) per output position.
FloatTensor adaptive_avg_pool(const FloatTensor& x, std::size_t out_length);
// weight [out, in], x [in] -> [out].
std::vector<float> linear(std::span<const float> x, const FloatTensor& weight, std::span<const float> bias);
// Max-subtracted softmax with double accumulation.
std::vector<float> softmax(std::span<const float> logits);

// Row-major first maximum of a [H, W] grid.
template <class T>
std::pair<std::size_t, std::size_t> argmax_location(std::span<const T> grid, std::size_t H, std::size_t W) {
  if (grid.size() != H * W || grid.empty()) throw ShapeError("grid size does not match H x W");
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] > grid[best]) best = i;
  }
  return {best / W, best % W};
}

}  // namespace cusense::nn
