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

#include "acceptance.hpp"
#include "cusense/dapp/harness.hpp"
#include "json.hpp"

namespace acceptance {

Outcome desk_localization() {
  using namespace cusense;
  dapp::E2eConfig cfg;
  cfg.scene.snr_db = 20.0;
  // Seed not used anywhere else in the tree (tests, docs, defaults).
  constexpr std::uint64_t kHeldOutSeed = 0x7e57ab1e;
  cfg.scene.noise_seed = kHeldOutSeed;
  cfg.trajectory.kind = emulator::TrajectoryKind::kLawnmower;
  cfg.trajectory.seed = kHeldOutSeed;
  // 5000 TTIs of 2 ms last 10 s; this speed sweeps the whole lawnmower path
  // (about 120 m at 0.5 m row pitch) once, so every part of the room is scored.
  cfg.trajectory.speed_mps = 12.0;
  cfg.ttis = 5000;
  cfg.tti_period_ns = 2'000'000;
  cfg.period_ttis = 2;
  cfg.backend = "matched_filter";

  const auto r = dapp::run_e2e(cfg);
  const auto json = nlohmann::json::parse(dapp::e2e_json(r, false));
  const auto& cats = json["metrics"]["averaged"]["categories"];
  std::uint64_t binned = json["metrics"]["averaged"]["beyond_10m"].get<std::uint64_t>();
  for (const auto& cat : cats) binned += cat["count"].get<std::uint64_t>();
  const bool histogram_ok = cats.size() == 4 && binned == r.averaged.count;

  const double cell_cm = 100.0 * std::max(cfg.grid.cell_width(), cfg.grid.cell_depth());
  const double mean_cells = r.averaged.mean_cm / cell_cm;
  const double within_1m = r.averaged.fraction_within(1.0);

  Checker c;
  c.note("samples", r.samples.size())
      .note("stale", r.summary.stale_skips)
      .note("mean_cm", r.averaged.mean_cm)
      .note("mean_cells", mean_cells)
      .note("median_cm", r.averaged.median_cm)
      .note("within_1m", within_1m)
      .note("raw_mean_cm", r.raw.mean_cm)
      .note("kalman_mean_cm", r.filtered.mean_cm);
  c.expect(r.samples.size() >= 2000, "too few scored samples (expected ~2500)");
  c.expect(mean_cells <= 2.0, "mean error above 2 cells");
  c.expect(within_1m >= 0.70, "fewer than 70% of samples within 1 m");
  c.expect(histogram_ok, "metrics JSON category histogram");
  return c.outcome();
}

}  // namespace acceptance
