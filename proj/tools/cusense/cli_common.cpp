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

#include "cli_common.hpp"

#include <csignal>
#include <cmath>
#include <algorithm>
#include <fstream>
#include <sstream>

namespace cusense::cli {

std::atomic<bool> g_stop{false};

namespace {

extern "C" void on_signal(int) { g_stop.store(true); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("criteria key '" + key + "' has a non-numeric value '" + v + "'");
  }
}

}  // namespace

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

void SceneFlags::add(CLI::App& app) {
  app.add_option("--antennas", scene.antennas, "Receive antennas")->capture_default_str();
  app.add_option("--subcarriers", scene.subcarriers, "Subcarriers (multiple of 12)")->capture_default_str();
  app.add_option("--dmrs-symbols", scene.dmrs_symbols, "DMRS symbols per slot")->capture_default_str();
  app.add_option("--snr-db", scene.snr_db, "Noise level relative to mean background power")->capture_default_str();
  app.add_option("--env-seed", scene.rng_seed, "Environment (multipath) seed")->capture_default_str();
  app.add_option("--background-taps", scene.background_taps, "Static multipath taps")->capture_default_str();
  app.add_option("--prb-start", scene.prb_start, "First allocated PRB")->capture_default_str();
  app.add_option("--prb-count", scene.prb_count, "Allocated PRBs (0 = all)")->capture_default_str();
  app.add_option("--width", scene.width_m, "Area width [m]")->capture_default_str();
  app.add_option("--depth", scene.depth_m, "Area depth [m]")->capture_default_str();
}

emulator::TrajectoryParams TrajectoryFlags::params(std::uint64_t seed) const {
  emulator::TrajectoryParams p;
  try {
    p.kind = emulator::parse_trajectory_kind(kind);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  p.speed_mps = speed;
  p.row_spacing_m = row_spacing;
  p.seed = seed;
  return p;
}

void TrajectoryFlags::add(CLI::App& app) {
  app.add_option("--trajectory", kind, "lawnmower | spiral | random_walk | stationary")->capture_default_str();
  app.add_option("--speed", speed, "Target speed [m/s]")->capture_default_str();
  app.add_option("--row-spacing", row_spacing, "Lawnmower row pitch [m]")->capture_default_str();
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

Criteria Criteria::load(const std::string& path) {
  Criteria c;
  for (const auto& [k, v] : read_key_values(path)) {
    if (k == "max_mean_error_cm") {
      c.max_mean_error_cm = parse_double(k, v);
    } else if (k == "max_mean_error_cells") {
      c.max_mean_error_cells = parse_double(k, v);
    } else if (k == "min_fraction_within_1m") {
      c.min_fraction_within_1m = parse_double(k, v);
    } else if (k == "max_median_error_cm") {
      c.max_median_error_cm = parse_double(k, v);
    } else if (k == "series") {
      if (v != "raw" && v != "averaged" && v != "kalman") throw UsageError("series must be raw, averaged or kalman");
      c.series = v;
    } else {
      throw UsageError("unknown criteria key '" + k + "'");
    }
  }
  return c;
}

std::vector<std::string> Criteria::check(const tracking::MetricsReport& r, const tracking::GridGeometry& grid) const {
  std::vector<std::string> bad;
  auto fail = [&bad](const std::string& what, double got, double limit) {
    std::ostringstream o;
    o << what << ": " << got << " vs limit " << limit;
    bad.push_back(o.str());
  };
  if (max_mean_error_cm && r.mean_cm > *max_mean_error_cm) fail("mean error [cm]", r.mean_cm, *max_mean_error_cm);
  if (max_median_error_cm && r.median_cm > *max_median_error_cm) {
    fail("median error [cm]", r.median_cm, *max_median_error_cm);
  }
  if (max_mean_error_cells) {
    // One cell = the longer cell side (31.4 cm on the default 32x32 grid).
    const double cell_cm = 100.0 * std::max(grid.cell_width(), grid.cell_depth());
    if (r.mean_cm > *max_mean_error_cells * cell_cm) {
      fail("mean error [cells]", r.mean_cm / cell_cm, *max_mean_error_cells);
    }
  }
  if (min_fraction_within_1m && r.fraction_within(1.0) < *min_fraction_within_1m) {
    fail("fraction within 1 m", r.fraction_within(1.0), *min_fraction_within_1m);
  }
  return bad;
}

std::vector<TimedPosition> read_positions_csv(const std::string& path, const std::string& x_col,
                                              const std::string& y_col) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty() && line[0] != '#') {
      header = split_csv(line);
      break;
    }
  }
  auto find = [&](std::initializer_list<std::string> names) -> std::optional<std::size_t> {
    for (const auto& n : names) {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == n) return i;
      }
    }
    return std::nullopt;
  };
  const auto xi = x_col.empty() ? find({"x_m", "x"}) : find({x_col});
  const auto yi = y_col.empty() ? find({"y_m", "y"}) : find({y_col});
  const auto ti = find({"tti"});
  if (!xi || !yi) throw UsageError(path + ": header must name x and y columns");
  std::vector<TimedPosition> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() < header.size()) throw UsageError(path + ":" + std::to_string(n) + ": short row");
    TimedPosition p;
    try {
      p.pos = {std::stod(cells[*xi]), std::stod(cells[*yi])};
      if (ti) p.tti = std::stoull(cells[*ti]);
    } catch (const std::exception&) {
      throw UsageError(path + ":" + std::to_string(n) + ": malformed number");
    }
    if (std::isnan(p.pos.x) || std::isnan(p.pos.y)) continue;
    out.push_back(p);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace cusense::cli
