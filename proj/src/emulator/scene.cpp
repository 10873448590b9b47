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

#include "cusense/emulator/scene.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cusense/common/half.hpp"

namespace cusense::emulator {
namespace {

std::mt19937_64 seeded_rng(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

std::size_t idx3(const Shape& s, std::size_t a, std::size_t k, std::size_t sym) {
  return (a * s[1] + k) * s[2] + sym;
}

double mean_active_power(const SceneConfig& cfg, const ComplexTensor& t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint32_t a = 0; a < cfg.antennas; ++a) {
    for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
      if (!cfg.active_subcarrier(k)) continue;
      for (std::uint32_t s = 0; s < cfg.dmrs_symbols; ++s) {
        sum += std::norm(t[idx3(t.shape(), a, k, s)]);
        ++n;
      }
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

void SceneConfig::validate() const {
  if (antennas < 1) throw SceneError("antennas must be >= 1");
  if (subcarriers < 12 || subcarriers % 12 != 0) throw SceneError("subcarriers must be a positive multiple of 12");
  if (dmrs_symbols < 1 || dmrs_symbols > 14) throw SceneError("dmrs_symbols must be in [1, 14]");
  if (!(width_m > 0.0) || !(depth_m > 0.0)) throw SceneError("area dimensions must be positive");
  if (std::isnan(snr_db) || snr_db == -INFINITY) throw SceneError("snr_db must be a number or +inf");
  if (prb_start + active_prb_count() > prbs()) throw SceneError("PRB allocation exceeds the grid");
  if (!(subcarrier_spacing_hz > 0.0)) throw SceneError("subcarrier spacing must be positive");
}

SceneGeometry SceneGeometry::for_scene(const SceneConfig& cfg) {
  return SceneGeometry{{cfg.width_m / 2.0, 0.0}, {0.0, 0.0}};
}

double SceneGeometry::path_length(Point p) const {
  return std::hypot(p.x - tx.x, p.y - tx.y) + std::hypot(p.x - rx.x, p.y - rx.y);
}

double SceneGeometry::angle_of_arrival(Point p) const { return std::atan2(p.x - rx.x, p.y - rx.y); }

double subcarrier_offset_hz(const SceneConfig& cfg, std::uint32_t k) {
  return (static_cast<double>(k) - (cfg.subcarriers - 1) / 2.0) * cfg.subcarrier_spacing_hz;
}

ComplexTensor synth_background(const SceneConfig& cfg) {
  cfg.validate();
  ComplexTensor bg({cfg.antennas, cfg.subcarriers, cfg.dmrs_symbols});
  if (cfg.background_taps == 0) return bg;

  auto rng = seeded_rng(cfg.rng_seed, 0xb4c6'0000);
  std::uniform_real_distribution<double> delay(0.0, cfg.max_tap_delay_s);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::exponential_distribution<double> fading(1.0);
  const double tau_rms = cfg.max_tap_delay_s / 3.0;

  std::vector<std::complex<double>> row(cfg.subcarriers);
  for (std::uint32_t tap = 0; tap < cfg.background_taps; ++tap) {
    const double tau = delay(rng);
    const double decay = tau_rms > 0.0 ? std::exp(-tau / tau_rms) : 1.0;
    const double amplitude = std::sqrt(fading(rng) * decay);
    for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
      row[k] = std::polar(amplitude, -2.0 * std::numbers::pi * tau * subcarrier_offset_hz(cfg, k));
    }
    for (std::uint32_t a = 0; a < cfg.antennas; ++a) {
      const auto rot = std::polar(1.0, phase(rng));
      for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
        if (!cfg.active_subcarrier(k)) continue;
        const auto v = row[k] * rot;
        for (std::uint32_t s = 0; s < cfg.dmrs_symbols; ++s) bg[idx3(bg.shape(), a, k, s)] += v;
      }
    }
  }
  const double p = mean_active_power(cfg, bg);
  if (p > 0.0) {
    const double scale = 1.0 / std::sqrt(p);
    for (auto& v : bg.storage()) v *= scale;
  }
  return bg;
}

namespace {

// Adds the target term for `pos` into `out` ([A, K, S]).
void add_target(const SceneConfig& cfg, Point pos, ComplexTensor& out) {
  if (!(pos.x >= 0.0 && pos.x <= cfg.width_m && pos.y >= 0.0 && pos.y <= cfg.depth_m)) {
    throw SceneError("target position (" + std::to_string(pos.x) + ", " + std::to_string(pos.y) +
                     ") is outside the area");
  }
  const auto geo = SceneGeometry::for_scene(cfg);
  const double L = geo.path_length(pos);
  const double amplitude = cfg.target_gain / (L * L);
  const double sin_theta = std::sin(geo.angle_of_arrival(pos));

  // Linear phase across subcarriers, built by recurrence and re-anchored every 64 bins.
  std::vector<std::complex<double>> row(cfg.subcarriers);
  const double w = -2.0 * std::numbers::pi * L / kSpeedOfLight;
  const auto step = std::polar(1.0, w * cfg.subcarrier_spacing_hz);
  for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
    row[k] = (k % 64 == 0) ? std::polar(amplitude, w * subcarrier_offset_hz(cfg, k)) : row[k - 1] * step;
  }
  const std::size_t S = cfg.dmrs_symbols;
  for (std::uint32_t a = 0; a < cfg.antennas; ++a) {
    // Half-wavelength element spacing.
    const auto steer = std::polar(1.0, std::numbers::pi * a * sin_theta);
    auto* base = out.data() + static_cast<std::size_t>(a) * cfg.subcarriers * S;
    for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
      if (!cfg.active_subcarrier(k)) continue;
      const auto v = row[k] * steer;
      for (std::size_t s = 0; s < S; ++s) base[k * S + s] += v;
    }
  }
}

}  // namespace

ComplexTensor target_response(const SceneConfig& cfg, Point pos) {
  ComplexTensor t({cfg.antennas, cfg.subcarriers, cfg.dmrs_symbols});
  add_target(cfg, pos, t);
  return t;
}

NoiseBank::NoiseBank(std::uint64_t seed, unsigned size_log2) : samples_(std::size_t{1} << size_log2) {
  auto rng = seeded_rng(seed, 0xba'4c00);
  std::normal_distribution<float> n(0.0f, static_cast<float>(M_SQRT1_2));
  for (auto& z : samples_) {
    const float re = n(rng);
    z = std::complex<float>(re, n(rng));
  }
}

NoiseBank::Walk NoiseBank::walk(std::uint64_t slot_seed) const {
  auto rng = seeded_rng(slot_seed, 0x3a1c);
  return Walk{static_cast<std::size_t>(rng()) & (samples_.size() - 1),
              (static_cast<std::size_t>(rng()) & (samples_.size() - 1)) | 1};
}

ComplexTensor synth_csi(const SceneConfig& cfg, const ComplexTensor& background, std::optional<Point> target,
                        std::uint64_t noise_seed, const NoiseBank* bank) {
  const Shape want{cfg.antennas, cfg.subcarriers, cfg.dmrs_symbols};
  if (background.shape() != want) {
    throw SceneError("background shape " + shape_to_string(background.shape()) + " does not match scene " +
                     shape_to_string(want));
  }
  ComplexTensor out = background;
  if (target) add_target(cfg, *target, out);
  if (std::isinf(cfg.snr_db)) return out;

  double p_ref = mean_active_power(cfg, background);
  if (p_ref <= 0.0) p_ref = 1.0;
  const double sigma = std::sqrt(p_ref / std::pow(10.0, cfg.snr_db / 10.0) / 2.0);
  if (bank) {
    const auto w = bank->walk(noise_seed);
    const double scale = sigma * std::numbers::sqrt2;
    std::size_t pos = w.offset;
    for (std::uint32_t a = 0; a < cfg.antennas; ++a) {
      for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
        if (!cfg.active_subcarrier(k)) continue;
        for (std::uint32_t s = 0; s < cfg.dmrs_symbols; ++s) {
          const auto z = bank->at(pos);
          pos += w.stride;
          out[idx3(out.shape(), a, k, s)] += std::complex<double>(z.real() * scale, z.imag() * scale);
        }
      }
    }
    return out;
  }
  auto rng = seeded_rng(noise_seed, 0x4e01'5e00);
  std::normal_distribution<double> n(0.0, sigma);
  for (std::uint32_t a = 0; a < cfg.antennas; ++a) {
    for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
      if (!cfg.active_subcarrier(k)) continue;
      for (std::uint32_t s = 0; s < cfg.dmrs_symbols; ++s) {
        const double re = n(rng);
        const double im = n(rng);
        out[idx3(out.shape(), a, k, s)] += std::complex<double>(re, im);
      }
    }
  }
  return out;
}

std::uint64_t noise_seed_for_tti(const SceneConfig& cfg, std::uint64_t tti) {
  auto rng = seeded_rng(cfg.noise_seed, tti);
  return rng();
}

telemetry::HestTensor to_hest(const ComplexTensor& csi) {
  telemetry::HestTensor out(csi.shape());
  for (std::size_t i = 0; i < csi.size(); ++i) {
    out[i] = std::complex<float>(static_cast<float>(csi[i].real()), static_cast<float>(csi[i].imag()));
  }
  return out;
}

std::vector<std::uint32_t> dmrs_symbol_positions(std::uint32_t dmrs_symbols) {
  // Common additional-position layouts; others are spread evenly.
  switch (dmrs_symbols) {
    case 1: return {2};
    case 2: return {2, 11};
    case 3: return {2, 7, 11};
    case 4: return {2, 5, 8, 11};
    default: break;
  }
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < dmrs_symbols; ++i) out.push_back(i * 14 / dmrs_symbols);
  return out;
}

telemetry::IqTensor synth_iq(const SceneConfig& cfg, const ComplexTensor& csi, std::uint64_t seed) {
  constexpr std::uint32_t kSymbols = 14;
  const auto dmrs = dmrs_symbol_positions(cfg.dmrs_symbols);
  std::vector<std::uint32_t> nearest(kSymbols);
  for (std::uint32_t sym = 0; sym < kSymbols; ++sym) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < dmrs.size(); ++i) {
      const auto d = [&](std::uint32_t j) { return std::abs(static_cast<int>(dmrs[j]) - static_cast<int>(sym)); };
      if (d(i) < d(best)) best = i;
    }
    nearest[sym] = best;
  }

  auto rng = seeded_rng(seed, 0x1a'0000);
  double p_ref = mean_active_power(cfg, csi);
  if (p_ref <= 0.0) p_ref = 1.0;
  const double sigma =
      std::isinf(cfg.snr_db) ? 0.0 : std::sqrt(p_ref / std::pow(10.0, cfg.snr_db / 10.0) / 2.0);
  std::normal_distribution<float> n(0.0f, static_cast<float>(sigma));
  const std::complex<double> qpsk[4] = {{M_SQRT1_2, M_SQRT1_2}, {-M_SQRT1_2, M_SQRT1_2},
                                        {-M_SQRT1_2, -M_SQRT1_2}, {M_SQRT1_2, -M_SQRT1_2}};

  telemetry::IqTensor iq({cfg.antennas, kSymbols, cfg.prbs(), 12, 2}, Half::from_bits(0));
  std::uint64_t bits = 0;
  int bits_left = 0;
  for (std::uint32_t a = 0; a < cfg.antennas; ++a) {
    for (std::uint32_t sym = 0; sym < kSymbols; ++sym) {
      for (std::uint32_t k = 0; k < cfg.subcarriers; ++k) {
        if (!cfg.active_subcarrier(k)) continue;
        if (bits_left == 0) {
          bits = rng();
          bits_left = 32;
        }
        const auto x = qpsk[bits & 3];
        bits >>= 2;
        --bits_left;
        auto v = csi[idx3(csi.shape(), a, k, nearest[sym])] * x;
        if (sigma > 0.0) v += std::complex<double>(n(rng), n(rng));
        const std::size_t base = ((static_cast<std::size_t>(a) * kSymbols + sym) * cfg.subcarriers + k) * 2;
        iq[base] = Half::from_float(static_cast<float>(v.real()));
        iq[base + 1] = Half::from_float(static_cast<float>(v.imag()));
      }
    }
  }
  return iq;
}

telemetry::FapiMeta fapi_meta(const SceneConfig& cfg) {
  return telemetry::FapiMeta{cfg.cell_id, cfg.rnti, static_cast<std::uint16_t>(cfg.prb_start),
                             static_cast<std::uint16_t>(cfg.active_prb_count())};
}

}  // namespace cusense::emulator
