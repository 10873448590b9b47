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

#include <algorithm>
#include <cmath>
#include <random>

#include "acceptance.hpp"
#include "cusense/dapp/backend.hpp"
#include "cusense/dapp/harness.hpp"

namespace acceptance {
namespace {

using cusense::Half;
using cusense::telemetry::IqTensor;

// IEEE 754 binary16 to double, written from the format definition.
double half_bits_to_double(std::uint16_t bits) {
  const int sign = (bits >> 15) & 1;
  const int exp = (bits >> 10) & 0x1f;
  const int mant = bits & 0x3ff;
  double v;
  if (exp == 0) {
    v = std::ldexp(static_cast<double>(mant), -24);
  } else if (exp == 31) {
    v = mant == 0 ? INFINITY : NAN;
  } else {
    v = std::ldexp(1.0 + mant / 1024.0, exp - 15);
  }
  return sign ? -v : v;
}

std::vector<double> prb_power_oracle(const IqTensor& iq) {
  const std::size_t A = iq.dim(0), S = iq.dim(1), P = iq.dim(2), K = iq.dim(3);
  std::vector<double> out(P, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    double sum = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t base = (((a * S + s) * P + p) * K + k) * 2;
          const double i = half_bits_to_double(iq[base].bits);
          const double q = half_bits_to_double(iq[base + 1].bits);
          sum += i * i + q * q;
        }
      }
    }
    out[p] = sum / static_cast<double>(A * S * K);
  }
  return out;
}

IqTensor random_iq(std::mt19937_64& rng, int trial) {
  IqTensor t(cusense::dapp::kIqProcessorDims);
  if (trial % 10 == 0) {
    // Arbitrary finite half values, subnormals and extremes included.
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint16_t b;
      do {
        b = static_cast<std::uint16_t>(rng());
      } while (((b >> 10) & 0x1f) == 31);
      t[i] = Half::from_bits(b);
    }
    return t;
  }
  std::normal_distribution<float> n(0.0f, 1.0f);
  const float scale = std::pow(10.0f, std::uniform_real_distribution<float>(-3.0f, 2.0f)(rng));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = Half::from_float(n(rng) * scale);
  return t;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Outcome iq_processor_oracle() {
  std::mt19937_64 rng(0x1a5eed);
  double worst_rel = 0.0;
  std::vector<double> ms;
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto iq = random_iq(rng, trial);
    const auto t0 = std::chrono::steady_clock::now();
    const auto got = cusense::dapp::prb_power(iq);
    ms.push_back(seconds_since(t0) * 1e3);
    const auto want = prb_power_oracle(iq);
    if (got.size() != want.size()) {
      ++bad;
      continue;
    }
    for (std::size_t p = 0; p < want.size(); ++p) {
      const double rel = std::abs(got[p] - want[p]) / std::max(std::abs(want[p]), 1e-300);
      if (want[p] == 0.0 && got[p] == 0.0) continue;
      worst_rel = std::max(worst_rel, rel);
    }
  }
  const double med = median(ms);
  Checker c;
  c.note("worst_rel", worst_rel).note("median_ms", med).note("max_ms", *std::max_element(ms.begin(), ms.end()));
  c.expect(bad == 0, "output length != 273");
  c.expect(worst_rel <= 1e-3, "relative error above 1e-3");
  c.expect(med < 5.0, "median runtime >= 5 ms/slot");
  return c.outcome();
}

Outcome loop_latency() {
  cusense::dapp::BenchConfig cfg;
  cfg.iterations = 10'000;
  cfg.backend = "iq_processor";
  cfg.tti_period_ns = 2'000'000;
  cfg.control = true;
  const auto r = cusense::dapp::bench_loop(cfg);
  Checker c;
  c.note("indications", r.summary.indications)
      .note("processed", r.iterations)
      .note("stale", r.summary.stale_skips)
      .note("total_median_us", r.total_median_us)
      .note("total_p99_us", r.total_p99_us)
      .note("shm_read_prep_median_us", r.shm_read_preproc_median_us);
  c.expect(r.summary.indications == cfg.iterations, "fewer than 10^4 indications");
  c.expect(r.iterations >= cfg.iterations * 99 / 100, "more than 1% of iterations skipped");
  c.expect(r.total_median_us < 10'000.0, "total median >= 10 ms");
  c.expect(r.shm_read_preproc_median_us < 500.0, "SHM read + preprocess median >= 500 us");
  return c.outcome();
}

}  // namespace acceptance
