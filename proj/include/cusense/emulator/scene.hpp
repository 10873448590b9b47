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

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>
#include <stdexcept>

#include "cusense/common/tensor.hpp"
#include "cusense/telemetry/payloads.hpp"

namespace cusense::emulator {

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSpeedOfLight = 299792458.0;

struct Point {
  double x{0.0};
  double y{0.0};
  friend bool operator==(const Point&, const Point&) = default;
};

struct SceneConfig {
  std::uint32_t antennas{4};
  std::uint32_t subcarriers{3276};  // tensor width K; multiple of 12
  std::uint32_t dmrs_symbols{3};
  double width_m{6.78};
  double depth_m{10.06};
  std::uint32_t background_taps{8};
  double snr_db{20.0};  // relative to mean background power; +inf disables noise
  std::uint64_t rng_seed{1};  // environment (background taps, pilots)
  std::uint64_t noise_seed{2};
  double subcarrier_spacing_hz{30e3};
  double max_tap_delay_s{300e-9};
  double target_gain{10.0};  // target amplitude = target_gain / L^2, L in meters
  // Allocated PRBs; prb_count 0 means the whole grid.
  std::uint32_t prb_start{0};
  std::uint32_t prb_count{0};
  std::uint16_t cell_id{1};
  std::uint16_t rnti{0x4601};

  std::uint32_t prbs() const { return subcarriers / 12; }
  std::uint32_t active_prb_count() const { return prb_count == 0 ? prbs() : prb_count; }
  bool active_subcarrier(std::uint32_t k) const {
    const std::uint32_t p = k / 12;
    return p >= prb_start && p < prb_start + active_prb_count();
  }
  void validate() const;
};

// Bistatic layout: the receive array sits at the centre of the y = 0 edge with
// broadside along +y; the transmitting UE sits at the (0, 0) corner.
struct SceneGeometry {
  Point rx;
  Point tx;

  static SceneGeometry for_scene(const SceneConfig& cfg);
  double path_length(Point target) const;   // TX -> target -> RX
  double angle_of_arrival(Point target) const;  // radians from broadside, positive toward +x
};

// Baseband frequency offset of subcarrier k from the band centre.
double subcarrier_offset_hz(const SceneConfig& cfg, std::uint32_t k);

// Static multipath channel [A, K, S]; identical across DMRS symbols. Mean
// power over active bins is normalized to 1 when taps > 0.
ComplexTensor synth_background(const SceneConfig& cfg);

// Noiseless target-induced term [A, K, S] for a target at `pos`.
ComplexTensor target_response(const SceneConfig& cfg, Point pos);

// Pre-drawn unit-variance circular Gaussian samples. A slot reads the bank
// along a seed-chosen offset and odd stride, which replaces per-sample draws
// on the paced path; two slots coincide at a given bin with probability ~1/size.
class NoiseBank {
 public:
  explicit NoiseBank(std::uint64_t seed, unsigned size_log2 = 16);
  std::size_t size() const noexcept { return samples_.size(); }
  struct Walk {
    std::size_t offset;
    std::size_t stride;
  };
  Walk walk(std::uint64_t slot_seed) const;
  std::complex<float> at(std::size_t i) const noexcept { return samples_[i & (samples_.size() - 1)]; }

 private:
  std::vector<std::complex<float>> samples_;
};

// Background + optional target + circular Gaussian noise on active bins.
// Noise comes from std::normal_distribution, or from `bank` when given.
// Throws SceneError when the target lies outside the area.
ComplexTensor synth_csi(const SceneConfig& cfg, const ComplexTensor& background, std::optional<Point> target,
                        std::uint64_t noise_seed, const NoiseBank* bank = nullptr);

// Per-TTI noise seed derived from the scene's noise_seed.
std::uint64_t noise_seed_for_tti(const SceneConfig& cfg, std::uint64_t tti);

telemetry::HestTensor to_hest(const ComplexTensor& csi);

// DMRS symbol positions inside the 14-symbol slot.
std::vector<std::uint32_t> dmrs_symbol_positions(std::uint32_t dmrs_symbols);

// Uplink IQ grid [A, 14, PRB, 12, 2]: each symbol carries the channel of its
// nearest DMRS symbol times a QPSK pilot/data symbol, plus noise at snr_db.
telemetry::IqTensor synth_iq(const SceneConfig& cfg, const ComplexTensor& csi, std::uint64_t seed);

telemetry::FapiMeta fapi_meta(const SceneConfig& cfg);

}  // namespace cusense::emulator
