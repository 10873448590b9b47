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

#include "cusense/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cusense::nn {
namespace {

void require_rank2(const FloatTensor& x, const char* what) {
  if (x.rank() != 2) throw ShapeError(std::string(what) + " expects a [C, L] tensor, got " + shape_to_string(x.shape()));
}

}  // namespace

std::size_t conv_out_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("stride must be positive");
  if (length + 2 * pad < kernel) return 0;
  return (length + 2 * pad - kernel) / stride + 1;
}

FloatTensor conv1d(const FloatTensor& x, const FloatTensor& weight, std::span<const float> bias, std::size_t stride,
                   std::size_t pad) {
  require_rank2(x, "conv1d");
  if (weight.rank() != 3) throw ShapeError("conv1d weight must be [C_out, C_in, k]");
  const std::size_t cin = x.dim(0), L = x.dim(1);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv1d weight expects " + std::to_string(weight.dim(1)) + " input channels, got " +
                     std::to_string(cin));
  }
  if (!bias.empty() && bias.size() != cout) throw ShapeError("conv1d bias length mismatch");
  const std::size_t lout = conv_out_length(L, k, stride, pad);
  if (lout == 0) throw ShapeError("conv1d input length " + std::to_string(L) + " is shorter than the kernel");

  FloatTensor y({cout, lout});
  // Output positions whose receptive field lies fully inside the input.
  const std::size_t t_lo = std::min(lout, (pad + stride - 1) / stride);
  std::size_t t_hi = lout;
  while (t_hi > t_lo && (t_hi - 1) * stride + k > L + pad) --t_hi;

  for (std::size_t o = 0; o < cout; ++o) {
    float* out = y.data() + o * lout;
    std::fill(out, out + lout, bias.empty() ? 0.0f : bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const float* in = x.data() + c * L;
      const float* w = weight.data() + (o * cin + c) * k;
      for (std::size_t j = 0; j < k; ++j) {
        const float wj = w[j];
        // Interior: in index = t * stride + j - pad, always in range.
        const float* src = in + (t_lo * stride + j - pad);
        if (stride == 1) {
          for (std::size_t t = t_lo; t < t_hi; ++t) out[t] += wj * src[t - t_lo];
        } else {
          for (std::size_t t = t_lo; t < t_hi; ++t) out[t] += wj * src[(t - t_lo) * stride];
        }
        // Borders with zero padding.
        for (std::size_t t = 0; t < t_lo; ++t) {
          const long idx = static_cast<long>(t * stride + j) - static_cast<long>(pad);
          if (idx >= 0 && idx < static_cast<long>(L)) out[t] += wj * in[idx];
        }
        for (std::size_t t = t_hi; t < lout; ++t) {
          const long idx = static_cast<long>(t * stride + j) - static_cast<long>(pad);
          if (idx >= 0 && idx < static_cast<long>(L)) out[t] += wj * in[idx];
        }
      }
    }
  }
  return y;
}

FloatTensor batchnorm_inference(const FloatTensor& x, const BatchNormParams& bn, float eps) {
  require_rank2(x, "batchnorm");
  const std::size_t C = x.dim(0), L = x.dim(1);
  if (bn.gamma.size() != C || bn.beta.size() != C || bn.mean.size() != C || bn.var.size() != C) {
    throw ShapeError("batchnorm parameters do not match " + std::to_string(C) + " channels");
  }
  FloatTensor y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const float scale = bn.gamma[c] / std::sqrt(bn.var[c] + eps);
    const float shift = bn.beta[c] - scale * bn.mean[c];
    const float* in = x.data() + c * L;
    float* out = y.data() + c * L;
    for (std::size_t t = 0; t < L; ++t) out[t] = scale * in[t] + shift;
  }
  return y;
}

FloatTensor relu(FloatTensor x) {
  for (auto& v : x.storage()) v = v > 0.0f ? v : 0.0f;
  return x;
}

FloatTensor maxpool1d(const FloatTensor& x, std::size_t kernel, std::size_t stride) {
  require_rank2(x, "maxpool1d");
  const std::size_t C = x.dim(0), L = x.dim(1);
  const std::size_t lout = conv_out_length(L, kernel, stride, 0);
  if (lout == 0) throw ShapeError("maxpool1d input shorter than its window");
  FloatTensor y({C, lout});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < lout; ++t) {
      const float* w = x.data() + c * L + t * stride;
      y[c * lout + t] = *std::max_element(w, w + kernel);
    }
  }
  return y;
}

FloatTensor adaptive_avg_pool(const FloatTensor& x, std::size_t out_length) {
  require_rank2(x, "adaptive_avg_pool");
  const std::size_t C = x.dim(0), L = x.dim(1);
  if (L == 0 || out_length == 0) throw ShapeError("adaptive_avg_pool needs non-empty input and output");
  FloatTensor y({C, out_length});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < out_length; ++i) {
      const std::size_t lo = i * L / out_length;
      const std::size_t hi = ((i + 1) * L + out_length - 1) / out_length;
      double acc = 0.0;
      for (std::size_t t = lo; t < hi; ++t) acc += x[c * L + t];
      y[c * out_length + i] = static_cast<float>(acc / static_cast<double>(hi - lo));
    }
  }
  return y;
}

std::vector<float> linear(std::span<const float> x, const FloatTensor& weight, std::span<const float> bias) {
  if (weight.rank() != 2 || weight.dim(1) != x.size()) {
    throw ShapeError("linear weight " + shape_to_string(weight.shape()) + " does not accept an input of " +
                     std::to_string(x.size()));
  }
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  if (!bias.empty() && bias.size() != out) throw ShapeError("linear bias length mismatch");
  std::vector<float> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    const float* w = weight.data() + o * in;
    float acc = 0.0f;
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
    y[o] = acc + (bias.empty() ? 0.0f : bias[o]);
  }
  return y;
}

std::vector<float> softmax(std::span<const float> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += e[i] = std::exp(static_cast<double>(logits[i]) - m);
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(e[i] / sum);
  return out;
}

}  // namespace cusense::nn
