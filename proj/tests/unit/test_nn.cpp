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

#include <cmath>
#include <cstdio>
#include <random>
#include <unistd.h>

#include "cusense/nn/model.hpp"
#include "doctest.h"

using namespace cusense;
using namespace cusense::nn;

namespace {

FloatTensor random_tensor(std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<float> n;
  FloatTensor t(std::move(shape));
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool close(double got, double want, double tol = 1e-5) { return std::abs(got - want) <= tol * std::max(1.0, std::abs(want)); }

std::string temp_path(const std::string& stem) { return "/tmp/" + stem + std::to_string(::getpid()) + ".bin"; }

}  // namespace

TEST_CASE("conv1d: identity kernel and nested-loop oracle") {
  std::mt19937_64 rng(1);
  const auto x = random_tensor(rng, {3, 10});
  FloatTensor eye({3, 3, 1});
  for (std::size_t c = 0; c < 3; ++c) eye[(c * 3 + c)] = 1.0f;
  CHECK(conv1d(x, eye, std::vector<float>(3, 0.0f), 1, 0) == x);

  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t cin = 1 + rng() % 4, cout = 1 + rng() % 5, k = 1 + rng() % 7;
    const std::size_t stride = 1 + rng() % 3, pad = rng() % 4;
    const std::size_t L = k + rng() % 30;
    const auto in = random_tensor(rng, {cin, L});
    const auto w = random_tensor(rng, {cout, cin, k});
    const auto b = random_vec(rng, cout);
    const auto y = conv1d(in, w, b, stride, pad);
    const std::size_t lout = (L + 2 * pad - k) / stride + 1;
    REQUIRE(y.shape() == Shape{cout, lout});
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t t = 0; t < lout; ++t) {
        double acc = b[o];
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t j = 0; j < k; ++j) {
            const long idx = static_cast<long>(t * stride + j) - static_cast<long>(pad);
            if (idx < 0 || idx >= static_cast<long>(L)) continue;
            acc += static_cast<double>(w[(o * cin + c) * k + j]) * in[c * L + idx];
          }
        }
        REQUIRE(close(y[o * lout + t], acc));
      }
    }
  }
  CHECK_THROWS_AS(conv1d(random_tensor(rng, {2, 5}), random_tensor(rng, {1, 3, 3}), {}, 1, 0), ShapeError);
  CHECK(conv_out_length(3, 7, 1, 0) == 0);
}

TEST_CASE("batchnorm, relu, pooling, linear against loop oracles") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 1 + rng() % 6, L = 2 + rng() % 40;
    const auto x = random_tensor(rng, {C, L});
    BatchNormParams bn{random_vec(rng, C), random_vec(rng, C), random_vec(rng, C), random_vec(rng, C)};
    for (auto& v : bn.var) v = std::abs(v) + 0.1f;
    const auto y = batchnorm_inference(x, bn);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < L; ++t) {
        const double want = bn.gamma[c] * (x[c * L + t] - static_cast<double>(bn.mean[c])) /
                                std::sqrt(static_cast<double>(bn.var[c]) + 1e-5) +
                            bn.beta[c];
        REQUIRE(close(y[c * L + t], want));
      }
    }

    const auto r = relu(x);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(r[i] == (x[i] > 0 ? x[i] : 0.0f));

    const auto mp = maxpool1d(x, 2, 2);
    REQUIRE(mp.dim(1) == L / 2);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < L / 2; ++t) REQUIRE(mp[c * (L / 2) + t] == std::max(x[c * L + 2 * t], x[c * L + 2 * t + 1]));
    }

    const std::size_t n_out = 1 + rng() % L;
    const auto ap = adaptive_avg_pool(x, n_out);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < n_out; ++i) {
        const std::size_t lo = static_cast<std::size_t>(std::floor(static_cast<double>(i) * L / n_out));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(static_cast<double>(i + 1) * L / n_out));
        double acc = 0;
        for (std::size_t t = lo; t < hi; ++t) acc += x[c * L + t];
        REQUIRE(close(ap[c * n_out + i], acc / (hi - lo)));
      }
    }

    const std::size_t in = 1 + rng() % 50, out = 1 + rng() % 20;
    const auto v = random_vec(rng, in);
    const auto W = random_tensor(rng, {out, in});
    const auto b = random_vec(rng, out);
    const auto lin = linear(v, W, b);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += static_cast<double>(W[o * in + i]) * v[i];
      REQUIRE(close(lin[o], acc));
    }
  }
  const FloatTensor seq({1, 4}, std::vector<float>{1, 2, 3, 4});
  CHECK(maxpool1d(seq, 2, 2).storage() == std::vector<float>{2, 4});
}

TEST_CASE("softmax: oracle, normalization and extreme logits") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1e4f, 1e4f);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> z(1 + rng() % 1024);
    for (auto& v : z) v = trial % 2 ? u(rng) : u(rng) * 1e-3f;
    const auto p = softmax(z);
    double sum = 0;
    for (float v : p) {
      REQUIRE(v >= 0.0f);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-5);
    double m = z[0];
    for (float v : z) m = std::max(m, static_cast<double>(v));
    double denom = 0;
    for (float v : z) denom += std::exp(v - m);
    for (std::size_t i = 0; i < z.size(); i += 17) REQUIRE(std::abs(p[i] - std::exp(z[i] - m) / denom) < 1e-5);
  }
  const auto p = softmax(std::vector<float>{1e4f, -1e4f, 1e4f});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == 0.0f);
}

TEST_CASE("argmax location") {
  std::vector<float> g(32 * 32, 0.0f);
  g[3 * 32 + 5] = 1.0f;
  CHECK(argmax_location<float>(g, 32, 32) == std::pair<std::size_t, std::size_t>{3, 5});
  const std::vector<float> uniform(1024, 1.0f / 1024);
  CHECK(argmax_location<float>(uniform, 32, 32) == std::pair<std::size_t, std::size_t>{0, 0});
  std::mt19937_64 rng(4);
  for (int t = 0; t < 1000; ++t) {
    std::vector<float> r(1024);
    for (auto& v : r) v = static_cast<float>(rng() % 50);
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < 32; ++i) {
      for (std::size_t j = 0; j < 32; ++j) {
        if (r[i * 32 + j] > r[bi * 32 + bj]) bi = i, bj = j;
      }
    }
    REQUIRE(argmax_location<float>(r, 32, 32) == std::pair{bi, bj});
  }
}

TEST_CASE("model: zero weights give a uniform grid") {
  const auto m = CusenseModel::zeros({});
  const auto g = m.forward(FloatTensor({4, 132}));
  for (float v : g.p.values()) CHECK(v == doctest::Approx(1.0 / 1024).epsilon(1e-6));
}

TEST_CASE("model: shape law, valid grids, determinism") {
  const auto m = CusenseModel::random({}, 11);
  std::mt19937_64 rng(5);
  for (std::size_t kv : {132u, 1596u, 3276u}) {
    const auto x = random_tensor(rng, {4, kv});
    std::vector<LayerTrace> trace;
    const auto g = m.forward(x, &trace);
    auto L = [](std::size_t l, std::size_t k, std::size_t s, std::size_t p) { return (l + 2 * p - k) / s + 1; };
    std::size_t l = L(kv, 7, 1, 3);
    std::vector<std::size_t> want{l};
    l = L(l, 2, 2, 0);
    want.push_back(l);
    for (int b = 0; b < 3; ++b) {
      l = L(l, 3, 2, 1);
      want.push_back(l);
      l = L(l, 3, 1, 1);
      want.push_back(l);
    }
    REQUIRE(trace.size() == 13);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(trace[i].output.back() == want[i]);
    CHECK(trace[0].output == Shape{64, kv});
    CHECK(trace[1].output == Shape{64, kv / 2});
    CHECK(trace[7].output.front() == 512);
    CHECK(trace[8].output == Shape{512, 1});
    CHECK(trace[11].output == Shape{1024});
    double sum = 0;
    for (float v : g.p.values()) {
      REQUIRE(v >= 0.0f);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-5);
    CHECK(g.p.shape() == Shape{32, 32});
    CHECK(m.forward(x).p == g.p);
  }
  for (int t = 0; t < 30; ++t) {
    const std::size_t kv = CusenseModel::min_input_length() + rng() % 400;
    std::vector<LayerTrace> trace;
    m.forward(random_tensor(rng, {4, kv}), &trace);
    std::size_t l = kv;
    const std::size_t ks[7] = {7, 2, 3, 3, 3, 3, 3}, ss[7] = {1, 2, 2, 1, 2, 1, 2}, ps[7] = {3, 0, 1, 1, 1, 1, 1};
    for (std::size_t i = 0; i < 7; ++i) {
      l = (l + 2 * ps[i] - ks[i]) / ss[i] + 1;
      REQUIRE(trace[i].output.back() == l);
    }
  }
  // Smallest length whose every stage keeps at least one sample.
  auto survives = [](std::size_t l) {
    const std::size_t ks[7] = {7, 2, 3, 3, 3, 3, 3}, ss[7] = {1, 2, 2, 1, 2, 1, 2}, ps[7] = {3, 0, 1, 1, 1, 1, 1};
    for (std::size_t i = 0; i < 7; ++i) {
      if (l + 2 * ps[i] < ks[i]) return false;
      l = (l + 2 * ps[i] - ks[i]) / ss[i] + 1;
    }
    return true;
  };
  std::size_t min_len = 1;
  while (!survives(min_len)) ++min_len;
  CHECK(CusenseModel::min_input_length() == min_len);
  CHECK_NOTHROW(m.forward(FloatTensor({4, min_len})));
  CHECK_THROWS_AS(m.forward(FloatTensor({4, min_len - 1})), ShapeError);
  CHECK_THROWS_AS(m.forward(FloatTensor({3, 132})), ShapeError);
}

TEST_CASE("weight file: bit-exact round trip and structured errors") {
  const auto m = CusenseModel::random({4, 16, 8}, 12);
  const auto path = temp_path("cusense_w_");
  m.save(path);
  const auto back = CusenseModel::load(path);
  CHECK(back.config().grid_h == 16);
  CHECK(back.config().grid_w == 8);
  CHECK(encode_record_file(back.to_records()) == encode_record_file(m.to_records()));
  std::remove(path.c_str());

  auto bytes = encode_record_file(m.to_records());
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(CusenseModel::from_records(decode_record_file(bytes, kWeightMagic)), RecordFileError);

  auto rec = m.to_records();
  rec.records[1].dims = {64, 7, 4};
  CHECK_THROWS_WITH_AS(CusenseModel::from_records(rec), doctest::Contains("conv0.weight"), RecordFileError);
  auto rec2 = m.to_records();
  rec2.records[5].dims = {1, 1};
  CHECK_THROWS_WITH_AS(CusenseModel::from_records(rec2), doctest::Contains(rec2.records[5].name.c_str()), RecordFileError);
}
