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

#include "cusense/emulator/emulator.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "cusense/common/clock.hpp"

namespace cusense::emulator {
namespace {

constexpr const char* kManifestHeader = "# cusense-manifest v1";

}  // namespace

telemetry::PlaneConfig emulator_plane_config(const SceneConfig& cfg, const std::string& name,
                                             std::uint32_t slots_per_buffer, bool iq,
                                             std::uint64_t tti_period_ns) {
  telemetry::PlaneConfig pc;
  pc.name = name;
  pc.tti_period_ns = tti_period_ns;
  pc.regions.push_back({DataType::kHest, slots_per_buffer,
                        static_cast<std::uint32_t>(
                            telemetry::hest_payload_bytes(cfg.antennas, cfg.subcarriers, cfg.dmrs_symbols))});
  if (iq) {
    pc.regions.push_back(
        {DataType::kIq, slots_per_buffer,
         static_cast<std::uint32_t>(telemetry::iq_payload_bytes(cfg.antennas, 14, cfg.prbs(), 12))});
  }
  pc.regions.push_back({DataType::kFapiMeta, slots_per_buffer, 8});
  return pc;
}

RunManifest run_emulator(const SceneConfig& cfg, const Trajectory* trajectory, telemetry::TelemetryPlane& plane,
                         std::uint64_t duration_ttis, const EmulatorOptions& options) {
  cfg.validate();
  if (!plane.is_writer()) throw EmulatorError("emulator needs the plane's writer lease");
  if (!plane.find_region(DataType::kHest)) throw EmulatorError("plane has no HEST region");
  if (options.iq_mode != IqMode::kOff && !plane.find_region(DataType::kIq)) {
    throw EmulatorError("plane has no IQ region");
  }
  if (options.tti_period_ns == 0) throw EmulatorError("tti period must be positive");
  const bool fapi = plane.find_region(DataType::kFapiMeta).has_value();

  RunManifest manifest;
  manifest.entries.reserve(duration_ttis);
  if (duration_ttis == 0) return manifest;

  const auto background = synth_background(cfg);
  std::optional<NoiseBank> bank;
  if (options.noise_bank && !std::isinf(cfg.snr_db)) bank.emplace(cfg.noise_seed);
  const NoiseBank* bank_ptr = bank ? &*bank : nullptr;
  auto position = [&](std::uint64_t i) -> std::optional<Point> {
    if (!trajectory) return std::nullopt;
    return trajectory->position_at(static_cast<double>(i * options.tti_period_ns) * 1e-9);
  };

  std::vector<std::vector<std::uint8_t>> iq_pool;
  if (options.iq_mode == IqMode::kPool) {
    const auto n = std::max<std::uint32_t>(1, options.iq_pool_size);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint64_t tti = options.first_tti + i;
      const auto csi = synth_csi(cfg, background, position(i), noise_seed_for_tti(cfg, tti), bank_ptr);
      iq_pool.emplace_back();
      telemetry::encode_iq(synth_iq(cfg, csi, noise_seed_for_tti(cfg, tti) ^ 0x5a5a5a5aull), iq_pool.back());
    }
  }
  const auto fapi_bytes = telemetry::encode_fapi(fapi_meta(cfg));

  std::vector<std::uint8_t> hest_bytes, iq_bytes;
  const std::uint64_t start = monotonic_ns() + options.tti_period_ns;
  std::uint64_t prev_publish = 0;
  double interval_sum = 0.0, late_sum = 0.0;

  for (std::uint64_t i = 0; i < duration_ttis; ++i) {
    if (options.stop && options.stop->load()) break;
    const std::uint64_t tti = options.first_tti + i;
    const auto pos = position(i);
    const auto seed = noise_seed_for_tti(cfg, tti);
    const auto csi = synth_csi(cfg, background, pos, seed, bank_ptr);
    telemetry::encode_hest(to_hest(csi), hest_bytes);
    if (options.iq_mode == IqMode::kLive) telemetry::encode_iq(synth_iq(cfg, csi, seed ^ 0x5a5a5a5aull), iq_bytes);

    if (options.before_write) options.before_write(tti);
    const std::uint64_t deadline = start + i * options.tti_period_ns;
    if (options.paced) {
      const auto now = monotonic_ns();
      if (now < deadline) std::this_thread::sleep_for(std::chrono::nanoseconds(deadline - now));
    }

    if (options.iq_mode == IqMode::kPool) plane.write_slot(DataType::kIq, tti, iq_pool[i % iq_pool.size()]);
    if (options.iq_mode == IqMode::kLive) plane.write_slot(DataType::kIq, tti, iq_bytes);
    if (fapi) plane.write_slot(DataType::kFapiMeta, tti, fapi_bytes);
    // HEST last: subscribers are driven by it, so the other records of the TTI are already in place.
    plane.write_slot(DataType::kHest, tti, hest_bytes);
    const std::uint64_t published = monotonic_ns();

    auto& p = manifest.pacing;
    ++p.writes;
    if (prev_publish != 0) interval_sum += static_cast<double>(published - prev_publish);
    prev_publish = published;
    if (options.paced) {
      const std::uint64_t late = published > deadline ? published - deadline : 0;
      late_sum += static_cast<double>(late);
      p.max_lateness_ns = std::max(p.max_lateness_ns, late);
      if (late > options.tti_period_ns) {
        ++p.overruns;
        if (options.overrun_budget && p.overruns > *options.overrun_budget) {
          throw EmulatorError("pacing overrun budget exceeded at tti " + std::to_string(tti));
        }
      }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    manifest.entries.push_back({tti, i * options.tti_period_ns, pos ? pos->x : nan, pos ? pos->y : nan});
  }
  auto& p = manifest.pacing;
  if (p.writes > 1) p.mean_interval_ns = interval_sum / static_cast<double>(p.writes - 1);
  if (p.writes > 0) p.mean_lateness_ns = late_sum / static_cast<double>(p.writes);
  return manifest;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw EmulatorError("cannot write manifest " + path);
  out << kManifestHeader << "\n" << "tti,t_ns,x_m,y_m\n";
  out.precision(17);
  for (const auto& e : manifest.entries) out << e.tti << ',' << e.t_ns << ',' << e.x_m << ',' << e.y_m << '\n';
  if (!out) throw EmulatorError("failed writing manifest " + path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmulatorError("cannot read manifest " + path);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw EmulatorError(path + ": missing or unsupported manifest header");
  }
  if (!std::getline(in, line) || line != "tti,t_ns,x_m,y_m") throw EmulatorError(path + ": missing column header");
  RunManifest m;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string field[4];
    for (int i = 0; i < 4; ++i) {
      if (!std::getline(ss, field[i], ',')) throw EmulatorError(path + ":" + std::to_string(lineno) + ": short row");
    }
    try {
      e.tti = std::stoull(field[0]);
      e.t_ns = std::stoull(field[1]);
      e.x_m = std::stod(field[2]);
      e.y_m = std::stod(field[3]);
    } catch (const std::exception&) {
      throw EmulatorError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    m.entries.push_back(e);
  }
  return m;
}

}  // namespace cusense::emulator
