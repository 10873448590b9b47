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

#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cli_common.hpp"
#include "cusense/dapp/backend.hpp"
#include "cusense/dapp/harness.hpp"
#include "cusense/dapp/runtime.hpp"
#include "cusense/e3/agent.hpp"
#include "cusense/emulator/emulator.hpp"
#include "cusense/labeling/dataset.hpp"
#include "cusense/labeling/labeling.hpp"
#include "cusense/nn/model.hpp"
#include "cusense/telemetry/plane.hpp"
#include "json.hpp"

namespace cusense::cli {
namespace {

using tracking::GridGeometry;
using tracking::Position;

std::uint64_t us_to_ns(double us) {
  if (!(us > 0.0)) throw UsageError("TTI period must be positive");
  return static_cast<std::uint64_t>(std::llround(us * 1e3));
}

GridGeometry grid_for(const emulator::SceneConfig& scene, std::size_t h, std::size_t w) {
  GridGeometry g;
  g.H = h;
  g.W = w;
  g.width_m = scene.width_m;
  g.depth_m = scene.depth_m;
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return g;
}

// Inputs every sensing backend may need, loaded from files given on the command line.
struct ModelInputs {
  std::string background_path;
  std::string weights_path;
  std::string norm_from;  // dataset whose header carries the train-split norm stats
  std::optional<double> mu, sigma;

  void add(CLI::App& app) {
    app.add_option("--background", background_path, "Background template file (CUSB0001)");
    app.add_option("--weights", weights_path, "Model weight file (CUSW0001)");
    app.add_option("--norm-from", norm_from, "Dataset file whose norm stats feed the model");
    app.add_option("--mu", mu, "z-score mean (overrides --norm-from)");
    app.add_option("--sigma", sigma, "z-score std (overrides --norm-from)");
  }

  std::optional<sensing::BackgroundTemplate> background() const {
    if (background_path.empty()) return std::nullopt;
    try {
      return sensing::load_background(background_path);
    } catch (const std::exception& e) {
      throw StartupError("cannot load background: " + std::string(e.what()));
    }
  }

  std::optional<nn::CusenseModel> model() const {
    if (weights_path.empty()) return std::nullopt;
    try {
      return nn::CusenseModel::load(weights_path);
    } catch (const std::exception& e) {
      throw StartupError("cannot load weights: " + std::string(e.what()));
    }
  }

  std::optional<sensing::NormStats> norm() const {
    std::optional<sensing::NormStats> n;
    if (!norm_from.empty()) {
      try {
        n = labeling::read_dataset(norm_from).header.norm;
      } catch (const std::exception& e) {
        throw StartupError("cannot read norm stats: " + std::string(e.what()));
      }
    }
    if (mu || sigma) {
      if (!n) n = sensing::NormStats{};
      if (mu) n->mu = *mu;
      if (sigma) n->sigma = *sigma;
    }
    return n;
  }
};

void require_model_inputs(const std::string& backend, const std::optional<nn::CusenseModel>& model,
                          const std::optional<sensing::NormStats>& norm) {
  if (backend != "cusense") return;
  if (!model) throw UsageError("backend cusense needs --weights");
  if (!norm) throw UsageError("backend cusense needs --norm-from or --mu/--sigma");
}

void check_backend_name(const std::string& name) {
  for (const auto& b : dapp::registered_backends()) {
    if (b == name) return;
  }
  std::string known;
  for (const auto& b : dapp::registered_backends()) known += (known.empty() ? "" : ", ") + b;
  throw UsageError("unknown backend '" + name + "' (known: " + known + ")");
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  fn(out);
}

// --- emulate ----------------------------------------------------------------

struct EmulateOpts {
  SceneFlags scene;
  TrajectoryFlags trajectory;
  std::string plane{telemetry::default_plane_name()};
  std::uint64_t ttis{1000};
  double tti_us{500.0};
  std::uint32_t slots{16};
  bool no_iq{false};
  bool empty_room{false};
  bool unpaced{false};
  std::uint64_t seed{7};
  std::string manifest_out;
};

void run_emulate(const EmulateOpts& o) {
  auto scene = o.scene.scene;
  scene.noise_seed = o.seed;
  const auto period = us_to_ns(o.tti_us);
  std::optional<emulator::Trajectory> traj;
  if (!o.empty_room) traj = emulator::Trajectory::build(o.trajectory.params(o.seed), scene.width_m, scene.depth_m);

  std::optional<telemetry::TelemetryPlane> plane;
  try {
    plane.emplace(telemetry::TelemetryPlane::create(
        emulator::emulator_plane_config(scene, o.plane, o.slots, !o.no_iq, period)));
  } catch (const std::exception& e) {
    throw StartupError("cannot create plane " + o.plane + ": " + e.what());
  }
  emulator::EmulatorOptions eo;
  eo.tti_period_ns = period;
  eo.paced = !o.unpaced;
  eo.iq_mode = o.no_iq ? emulator::IqMode::kOff : emulator::IqMode::kPool;
  eo.stop = &g_stop;
  std::cerr << "emulating " << o.ttis << " TTIs on " << o.plane << "\n";
  const auto manifest = emulator::run_emulator(scene, traj ? &*traj : nullptr, *plane, o.ttis, eo);
  if (!o.manifest_out.empty()) emulator::write_manifest(o.manifest_out, manifest);
  std::cout << "writes=" << manifest.pacing.writes << " mean_interval_us=" << manifest.pacing.mean_interval_ns / 1e3
            << " overruns=" << manifest.pacing.overruns << "\n";
  telemetry::TelemetryPlane::unlink(o.plane);
}

// --- agent ------------------------------------------------------------------

struct AgentOpts {
  std::string endpoint{"unix:/tmp/cusense_e3.sock"};
  std::string plane{telemetry::default_plane_name()};
  std::uint32_t agent_id{1};
  double wait_s{10.0};  // for the plane to appear
};

void run_agent(const AgentOpts& o) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(o.wait_s);
  while (true) {
    try {
      telemetry::TelemetryPlane::open(o.plane);
      break;
    } catch (const std::exception& e) {
      if (g_stop.load()) return;
      if (std::chrono::steady_clock::now() >= deadline) throw StartupError("plane " + o.plane + ": " + e.what());
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  e3::AgentConfig cfg;
  cfg.endpoint = o.endpoint;
  cfg.plane_name = o.plane;
  cfg.agent_id = o.agent_id;
  e3::E3Agent agent(cfg);
  try {
    agent.start();
  } catch (const std::exception& e) {
    throw StartupError("agent: " + std::string(e.what()));
  }
  std::cerr << "agent serving " << o.endpoint << " for " << o.plane << "\n";
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  agent.stop();
  const auto s = agent.stats();
  std::cout << "sessions=" << s.sessions_accepted << " indications_sent=" << s.indications_sent
            << " dropped=" << s.indications_dropped << " stale_skipped=" << s.stale_skipped
            << " control_requests=" << s.control_requests << "\n";
}

// --- dapp -------------------------------------------------------------------

struct DappOpts {
  std::string endpoint{"unix:/tmp/cusense_e3.sock"};
  std::string plane{telemetry::default_plane_name()};
  std::string backend{"matched_filter"};
  std::string data_type;  // default follows the backend
  std::uint32_t period_ttis{1};
  std::uint32_t duration_ttis{0};
  std::uint64_t max_iterations{0};
  std::uint32_t idle_timeout_ms{2000};
  bool control{false};
  double tti_us{500.0};
  std::size_t grid_h{32}, grid_w{32};
  std::size_t average_window{10};
  SceneFlags scene;
  ModelInputs inputs;
  std::string trace_out;
  std::string predictions_out;
};

void run_dapp(const DappOpts& o) {
  check_backend_name(o.backend);
  dapp::BackendOptions bo;
  bo.background = o.inputs.background();
  bo.model = o.inputs.model();
  bo.norm = o.inputs.norm();
  bo.scene = o.scene.scene;
  bo.grid = grid_for(o.scene.scene, o.grid_h, o.grid_w);
  require_model_inputs(o.backend, bo.model, bo.norm);
  if (o.backend != "iq_processor" && !bo.background) throw UsageError("backend " + o.backend + " needs --background");

  dapp::DappConfig dc;
  dc.endpoint = o.endpoint;
  dc.plane_name = o.plane;
  DataType type = o.backend == "iq_processor" ? DataType::kIq : DataType::kHest;
  if (!o.data_type.empty()) {
    const auto t = parse_data_type(o.data_type);
    if (!t) throw UsageError("unknown data type '" + o.data_type + "'");
    type = *t;
  }
  dc.subscriptions = {{type, o.period_ttis, o.duration_ttis}};
  dc.backend_id = o.backend;
  dc.control_enabled = o.control;
  dc.max_iterations = o.max_iterations;
  dc.idle_timeout = std::chrono::milliseconds(o.idle_timeout_ms);
  dc.grid = bo.grid;
  dc.average_window = o.average_window;
  try {
    dc.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  std::unique_ptr<dapp::InferenceBackend> backend;
  try {
    backend = dapp::make_backend(o.backend, std::move(bo));
  } catch (const std::exception& e) {
    throw StartupError("backend: " + std::string(e.what()));
  }
  dapp::DappRuntime runtime(dc, std::move(backend));
  std::ofstream preds;
  if (!o.predictions_out.empty()) {
    preds.open(o.predictions_out, std::ios::trunc);
    if (!preds) throw UsageError("cannot write " + o.predictions_out);
    preds << "tti,x_m,y_m,avg_x_m,avg_y_m,kalman_x_m,kalman_y_m\n";
  }
  bool ready = false;
  dapp::DappSummary summary;
  try {
    summary = runtime.run(
        &g_stop,
        [&](const dapp::IterationResult& r) {
          if (!preds.is_open() || !r.track) return;
          const auto& t = *r.track;
          preds << r.tti << ',' << t.raw.x << ',' << t.raw.y << ',' << t.averaged.x << ',' << t.averaged.y << ','
                << t.filtered.x << ',' << t.filtered.y << '\n';
        },
        [&] { ready = true; });
  } catch (const std::exception& e) {
    if (!ready) throw StartupError("dapp: " + std::string(e.what()));
    throw;
  }
  write_file(o.trace_out, [&](std::ostream& out) { dapp::write_trace_csv(out, runtime.trace()); });
  std::cout << dapp::to_string(summary) << "\n";
  if (!runtime.trace().empty()) {
    auto table = dapp::summarize_trace(runtime.trace());
    table.backend = o.backend;
    std::cout << dapp::format_stage_table(table);
  }
}

// --- background -------------------------------------------------------------

struct BackgroundOpts {
  SceneFlags scene;
  std::uint64_t ttis{200};
  std::uint64_t seed{0x0b5e};
  std::string out;
};

void run_background(const BackgroundOpts& o) {
  const auto tmpl = dapp::collect_background(o.scene.scene, o.ttis, o.seed);
  sensing::save_background(o.out, tmpl);
  std::cout << "background: " << o.ttis << " slots, " << tmpl.valid_bins().size() << " valid bins -> " << o.out
            << "\n";
}

// --- dataset ----------------------------------------------------------------

struct DatasetOpts {
  SceneFlags scene;
  TrajectoryFlags trajectory;
  std::uint64_t ttis{5000};
  double tti_us{500.0};
  std::uint64_t seed{7};
  std::uint64_t split_seed{11};
  double val_fraction{0.1}, test_fraction{0.1};
  std::string background_path;
  std::uint64_t background_ttis{200};
  std::uint64_t background_seed{0x0b5e};
  std::uint64_t window_us{2000};
  std::size_t grid_h{32}, grid_w{32};
  bool include_csi{false};
  // Camera labeling path.
  std::string detections;
  std::string homography;
  std::int64_t epoch_tai_ns{0};
  double tai_utc_offset_s{37.0};
  double clock_skew_s{0.0};
  double frame_period_s{1.0 / 30.0};
  bool unseen{false};
  std::string out;
  std::string csv_out;
};

// "u0 v0 x0 y0" style keys for the four correspondences: u0..u3, v0..v3, x0..x3, y0..y3.
labeling::Homography load_homography(const std::string& path) {
  const auto kv = read_key_values(path);
  std::array<labeling::ImagePoint, 4> img;
  std::array<Position, 4> world;
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw UsageError(path + ": missing key " + key);
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw UsageError(path + ": bad number for " + key);
    }
  };
  for (int i = 0; i < 4; ++i) {
    const auto n = std::to_string(i);
    img[i] = {get("u" + n), get("v" + n)};
    world[i] = {get("x" + n), get("y" + n)};
  }
  try {
    return labeling::estimate_homography(img, world);
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void run_dataset(const DatasetOpts& o) {
  auto scene = o.scene.scene;
  scene.noise_seed = o.seed;
  const auto period = us_to_ns(o.tti_us);
  const auto grid = grid_for(scene, o.grid_h, o.grid_w);
  sensing::BackgroundTemplate tmpl;
  if (!o.background_path.empty()) {
    try {
      tmpl = sensing::load_background(o.background_path);
    } catch (const std::exception& e) {
      throw StartupError("cannot load background: " + std::string(e.what()));
    }
  } else {
    tmpl = dapp::collect_background(scene, o.background_ttis, o.background_seed);
  }
  const auto traj = emulator::Trajectory::build(o.trajectory.params(o.seed), scene.width_m, scene.depth_m);
  const auto background = emulator::synth_background(scene);
  sensing::Preprocessor pre(tmpl, std::nullopt, o.window_us * 1000);

  labeling::Dataset ds;
  ds.header.antennas = scene.antennas;
  ds.header.symbols = scene.dmrs_symbols;
  ds.header.bins = pre.bins();
  ds.header.grid = grid;
  ds.header.has_csi = o.include_csi;

  for (std::uint64_t tti = 0; tti < o.ttis && !g_stop.load(); ++tti) {
    const std::uint64_t t_ns = tti * period;
    const auto p = traj.position_at(static_cast<double>(t_ns) * 1e-9);
    auto csi = emulator::synth_csi(scene, background, p, emulator::noise_seed_for_tti(scene, tti));
    labeling::DatasetRecord rec;
    rec.tti = tti;
    rec.timestamp_ns = t_ns;
    if (o.include_csi) {
      const auto& bins = pre.bins();
      const std::size_t K = csi.dim(1), S = csi.dim(2);
      ComplexTensor kept({scene.antennas, bins.size(), S});
      for (std::size_t a = 0; a < scene.antennas; ++a) {
        for (std::size_t k = 0; k < bins.size(); ++k) {
          for (std::size_t s = 0; s < S; ++s) kept[(a * bins.size() + k) * S + s] = csi[(a * K + bins[k]) * S + s];
        }
      }
      rec.csi = std::move(kept);
    }
    rec.features = pre.push({std::move(csi), tti, t_ns});
    rec.pos = {p.x, p.y};
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.size() < 10) throw UsageError("dataset needs at least 10 TTIs");

  if (!o.detections.empty()) {
    // Camera path: detections carry UTC frame times and pixel centroids.
    if (o.homography.empty()) throw UsageError("--detections needs --homography");
    const auto h = load_homography(o.homography);
    const auto dets = labeling::read_detections_csv(o.detections);
    std::vector<std::int64_t> frames, csi_tai;
    for (const auto& d : dets) frames.push_back(d.t_ns);
    for (const auto& r : ds.records) csi_tai.push_back(o.epoch_tai_ns + static_cast<std::int64_t>(r.timestamp_ns));
    labeling::SyncConfig sync{o.tai_utc_offset_s, o.frame_period_s, o.clock_skew_s};
    sync.validate();
    const auto aligned = labeling::align(csi_tai, frames, sync);
    std::vector<labeling::DatasetRecord> kept;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (aligned.frame_of[i] == labeling::kUnmatched) continue;
      auto r = std::move(ds.records[i]);
      r.pos = labeling::project(h, dets[aligned.frame_of[i]].centroid);
      kept.push_back(std::move(r));
    }
    std::cerr << "aligned " << aligned.matched << " records, dropped " << aligned.dropped << "\n";
    ds.records = std::move(kept);
    if (ds.records.size() < 10) throw UsageError("fewer than 10 records matched a camera frame");
  }

  for (auto& r : ds.records) {
    r.pos.x = std::clamp(r.pos.x, 0.0, grid.width_m);
    r.pos.y = std::clamp(r.pos.y, 0.0, grid.depth_m);
    r.cell = grid.cell_of(r.pos);
  }
  if (o.unseen) {
    for (auto& r : ds.records) r.split = labeling::Split::kUnseen;
  } else {
    labeling::SplitFractions f;
    f.val = o.val_fraction;
    f.test = o.test_fraction;
    f.train = 1.0 - f.val - f.test;
    const auto splits = labeling::make_splits(ds.records.size(), f, o.split_seed);
    for (std::size_t i = 0; i < splits.size(); ++i) ds.records[i].split = splits[i];
  }
  std::vector<RealTensor> train;
  for (const auto& r : ds.records) {
    if (r.split == labeling::Split::kTrain || o.unseen) train.push_back(r.features);
  }
  ds.header.norm = sensing::compute_norm_stats(train);

  labeling::write_dataset(o.out, ds);
  write_file(o.csv_out, [&](std::ostream& out) { labeling::write_dataset_csv(out, ds); });
  std::cout << "dataset: " << ds.records.size() << " records, K_v=" << ds.header.valid_bins()
            << ", mu=" << ds.header.norm.mu << ", sigma=" << ds.header.norm.sigma << " -> " << o.out << "\n";
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateOpts {
  std::string predictions;
  std::string truth;
  std::string pred_x, pred_y;
  std::string label{"run"};
  std::string json_out, csv_out, cdf_out;
  std::string criteria;
  double width_m{tracking::kAreaWidthM}, depth_m{tracking::kAreaDepthM};
  std::size_t grid_h{32}, grid_w{32};
};

void run_evaluate(const EvaluateOpts& o) {
  const auto pred = read_positions_csv(o.predictions, o.pred_x, o.pred_y);
  const auto truth = read_positions_csv(o.truth);
  std::vector<Position> p, t;
  const bool keyed = !pred.empty() && pred.front().tti && !truth.empty() && truth.front().tti;
  if (keyed) {
    std::unordered_map<std::uint64_t, Position> by_tti;
    for (const auto& r : truth) by_tti[*r.tti] = r.pos;
    for (const auto& r : pred) {
      const auto it = by_tti.find(*r.tti);
      if (it == by_tti.end()) continue;
      p.push_back(r.pos);
      t.push_back(it->second);
    }
  } else {
    if (pred.size() != truth.size()) throw UsageError("row counts differ and no tti column to join on");
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p.push_back(pred[i].pos);
      t.push_back(truth[i].pos);
    }
  }
  if (p.empty()) throw UsageError("no prediction matches a ground-truth row");
  const auto report = tracking::evaluate(t, p);
  const auto json = tracking::to_json(report);
  std::cout << json << "\n";
  if (!o.json_out.empty()) write_text(o.json_out, json + "\n");
  write_file(o.csv_out, [&](std::ostream& out) {
    tracking::write_metrics_csv_header(out);
    tracking::write_metrics_csv_row(out, o.label, report);
  });
  write_file(o.cdf_out, [&](std::ostream& out) { tracking::write_cdf_csv(out, report); });
  if (!o.criteria.empty()) {
    GridGeometry g;
    g.H = o.grid_h;
    g.W = o.grid_w;
    g.width_m = o.width_m;
    g.depth_m = o.depth_m;
    const auto bad = Criteria::load(o.criteria).check(report, g);
    if (!bad.empty()) {
      std::string msg = "thresholds violated:";
      for (const auto& b : bad) msg += "\n  " + b;
      throw ThresholdError(msg);
    }
  }
}

// --- bench ------------------------------------------------------------------

struct BenchOpts {
  std::size_t iterations{10'000};
  std::string backend{"iq_processor"};
  double tti_us{2000.0};
  double copy_delay_us{0.0};
  double notify_delay_us{0.0};
  bool no_control{false};
  std::uint32_t slots{16};
  SceneFlags scene;
  std::string table_out, trace_out, json_out;
};

void run_bench(const BenchOpts& o) {
  check_backend_name(o.backend);
  if (o.backend == "cusense") throw UsageError("bench supports iq_processor and matched_filter");
  if (o.iterations < dapp::kMinBenchIterations) {
    throw UsageError("insufficient iterations: " + std::to_string(o.iterations) + " (need at least " +
                     std::to_string(dapp::kMinBenchIterations) + ")");
  }
  dapp::BenchConfig bc;
  bc.iterations = o.iterations;
  bc.backend = o.backend;
  bc.tti_period_ns = us_to_ns(o.tti_us);
  bc.copy_delay_ns = static_cast<std::uint64_t>(std::llround(o.copy_delay_us * 1e3));
  bc.notify_delay_ns = static_cast<std::uint64_t>(std::llround(o.notify_delay_us * 1e3));
  bc.control = !o.no_control;
  bc.slots_per_buffer = o.slots;
  bc.scene = o.scene.scene;
  bc.stop = &g_stop;
  const auto report = dapp::bench_loop(bc);
  std::cout << dapp::format_stage_table(report);
  write_file(o.table_out, [&](std::ostream& out) { dapp::write_stage_table_csv(out, report); });
  write_file(o.trace_out, [&](std::ostream& out) { dapp::write_trace_csv(out, report.trace); });
  if (!o.json_out.empty()) {
    nlohmann::ordered_json j;
    j["backend"] = report.backend;
    j["iterations"] = report.iterations;
    j["total_median_us"] = report.total_median_us;
    j["total_p99_us"] = report.total_p99_us;
    j["shm_read_preproc_median_us"] = report.shm_read_preproc_median_us;
    for (const auto& r : report.rows) {
      j["rows"].push_back({{"operation", r.operation},
                           {"protocol", r.protocol},
                           {"measured", r.measured},
                           {"median_us", r.median_us},
                           {"p99_us", r.p99_us},
                           {"cumulative_us", r.cumulative_us}});
    }
    write_text(o.json_out, j.dump(2) + "\n");
  }
}

// --- e2e --------------------------------------------------------------------

struct E2eOpts {
  SceneFlags scene;
  TrajectoryFlags trajectory;
  std::uint64_t ttis{5000};
  double tti_us{2000.0};
  std::uint32_t period_ttis{2};
  std::uint64_t seed{7};
  std::string backend{"matched_filter"};
  std::uint64_t background_ttis{200};
  std::uint64_t background_seed{0x0b5e};
  std::size_t grid_h{32}, grid_w{32};
  std::size_t average_window{10};
  bool control{false};
  bool no_timestamps{false};
  bool realtime{false};
  ModelInputs inputs;
  std::string metrics_out, trace_out, trajectory_out, cdf_out, table_out;
  std::string criteria;
};

void run_e2e_cmd(const E2eOpts& o) {
  check_backend_name(o.backend);
  std::optional<Criteria> criteria;
  if (!o.criteria.empty()) criteria = Criteria::load(o.criteria);

  dapp::E2eConfig ec;
  ec.scene = o.scene.scene;
  ec.scene.noise_seed = o.seed;
  ec.trajectory = o.trajectory.params(o.seed);
  ec.ttis = o.ttis;
  ec.tti_period_ns = us_to_ns(o.tti_us);
  ec.period_ttis = o.period_ttis;
  ec.backend = o.backend;
  ec.background_ttis = o.background_ttis;
  ec.background_seed = o.background_seed;
  ec.background = o.inputs.background();
  ec.model = o.inputs.model();
  ec.norm = o.inputs.norm();
  require_model_inputs(o.backend, ec.model, ec.norm);
  ec.control = o.control;
  ec.grid = grid_for(ec.scene, o.grid_h, o.grid_w);
  ec.average_window = o.average_window;
  ec.lossless = !o.realtime;
  ec.stop = &g_stop;
  if (o.period_ttis == 0) throw UsageError("--period-ttis must be >= 1");

  dapp::E2eResult result;
  try {
    result = dapp::run_e2e(ec);
  } catch (const telemetry::PlaneError& e) {
    throw StartupError(e.what());
  } catch (const e3::TransportError& e) {
    throw StartupError(e.what());
  }
  const auto json = dapp::e2e_json(result, !o.no_timestamps);
  if (!o.metrics_out.empty()) write_text(o.metrics_out, json + "\n");
  write_file(o.trace_out, [&](std::ostream& out) { dapp::write_trace_csv(out, result.trace); });
  write_file(o.trajectory_out, [&](std::ostream& out) { dapp::write_trajectory_csv(out, result.samples); });
  write_file(o.cdf_out, [&](std::ostream& out) { tracking::write_cdf_csv(out, result.averaged); });
  if (!result.trace.empty()) {
    auto table = dapp::summarize_trace(result.trace);
    table.backend = result.backend;
    write_file(o.table_out, [&](std::ostream& out) { dapp::write_stage_table_csv(out, table); });
  }

  std::cout << "backend=" << result.backend << " samples=" << result.samples.size() << " "
            << dapp::to_string(result.summary) << "\n";
  std::cout << "raw      mean " << result.raw.mean_cm << " cm, within 1 m " << result.raw.fraction_within(1.0) << "\n";
  std::cout << "averaged mean " << result.averaged.mean_cm << " cm, within 1 m "
            << result.averaged.fraction_within(1.0) << "\n";
  std::cout << "kalman   mean " << result.filtered.mean_cm << " cm, within 1 m "
            << result.filtered.fraction_within(1.0) << "\n";
  if (g_stop.load()) throw std::runtime_error("interrupted");
  if (criteria) {
    const auto& series = criteria->series == "raw"      ? result.raw
                         : criteria->series == "kalman" ? result.filtered
                                                        : result.averaged;
    const auto bad = criteria->check(series, ec.grid);
    if (!bad.empty()) {
      std::string msg = "thresholds violated (" + criteria->series + "):";
      for (const auto& b : bad) msg += "\n  " + b;
      throw ThresholdError(msg);
    }
    std::cout << "criteria hold\n";
  }
}

void add_grid(CLI::App& app, std::size_t& h, std::size_t& w) {
  app.add_option("--grid-h", h, "Grid rows")->capture_default_str();
  app.add_option("--grid-w", w, "Grid columns")->capture_default_str();
}

}  // namespace

void add_emulate(CLI::App& app) {
  auto o = std::make_shared<EmulateOpts>();
  auto* c = app.add_subcommand("emulate", "Synthesize telemetry into a shared-memory plane");
  o->scene.add(*c);
  o->trajectory.add(*c);
  c->add_option("--plane", o->plane, "Plane name")->capture_default_str();
  c->add_option("--ttis", o->ttis, "TTIs to write")->capture_default_str();
  c->add_option("--tti-us", o->tti_us, "TTI period [us]")->capture_default_str();
  c->add_option("--slots", o->slots, "Slots per ping-pong buffer")->capture_default_str();
  c->add_option("--seed", o->seed, "Trajectory and noise seed")->capture_default_str();
  c->add_option("--manifest-out", o->manifest_out, "Ground-truth manifest CSV");
  c->add_flag("--no-iq", o->no_iq, "Skip the IQ region");
  c->add_flag("--empty-room", o->empty_room, "No target");
  c->add_flag("--unpaced", o->unpaced, "Write as fast as possible");
  c->callback([o] { run_emulate(*o); });
}

void add_agent(CLI::App& app) {
  auto o = std::make_shared<AgentOpts>();
  auto* c = app.add_subcommand("agent", "Serve E3 sessions for a telemetry plane until interrupted");
  c->add_option("--endpoint", o->endpoint, "unix:<path> or tcp:<host>:<port>")->capture_default_str();
  c->add_option("--plane", o->plane, "Plane name")->capture_default_str();
  c->add_option("--agent-id", o->agent_id)->capture_default_str();
  c->add_option("--wait", o->wait_s, "Seconds to wait for the plane")->capture_default_str();
  c->callback([o] { run_agent(*o); });
}

void add_dapp(CLI::App& app) {
  auto o = std::make_shared<DappOpts>();
  auto* c = app.add_subcommand("dapp", "Run a dApp against an agent");
  o->scene.add(*c);
  o->inputs.add(*c);
  add_grid(*c, o->grid_h, o->grid_w);
  c->add_option("--endpoint", o->endpoint)->capture_default_str();
  c->add_option("--plane", o->plane)->capture_default_str();
  c->add_option("--backend", o->backend, "iq_processor | matched_filter | cusense")->capture_default_str();
  c->add_option("--data-type", o->data_type, "IQ | HEST (default follows the backend)");
  c->add_option("--period-ttis", o->period_ttis)->capture_default_str();
  c->add_option("--duration-ttis", o->duration_ttis, "0 = unbounded")->capture_default_str();
  c->add_option("--max-iterations", o->max_iterations, "0 = unbounded")->capture_default_str();
  c->add_option("--idle-timeout-ms", o->idle_timeout_ms, "0 = wait forever")->capture_default_str();
  c->add_option("--average-window", o->average_window)->capture_default_str();
  c->add_option("--trace-out", o->trace_out, "Latency trace CSV");
  c->add_option("--predictions-out", o->predictions_out, "Per-iteration position CSV");
  c->add_flag("--control", o->control, "Send a control request per iteration");
  c->callback([o] { run_dapp(*o); });
}

void add_background(CLI::App& app) {
  auto o = std::make_shared<BackgroundOpts>();
  auto* c = app.add_subcommand("background", "Collect an empty-room background template");
  o->scene.add(*c);
  c->add_option("--ttis", o->ttis, "Empty-room slots")->capture_default_str();
  c->add_option("--seed", o->seed, "Noise seed")->capture_default_str();
  c->add_option("--out", o->out, "Template file")->required();
  c->callback([o] { run_background(*o); });
}

void add_dataset(CLI::App& app) {
  auto o = std::make_shared<DatasetOpts>();
  auto* c = app.add_subcommand("dataset", "Build a labeled feature dataset for training");
  o->scene.add(*c);
  o->trajectory.add(*c);
  add_grid(*c, o->grid_h, o->grid_w);
  c->add_option("--ttis", o->ttis)->capture_default_str();
  c->add_option("--tti-us", o->tti_us)->capture_default_str();
  c->add_option("--seed", o->seed, "Trajectory and noise seed")->capture_default_str();
  c->add_option("--split-seed", o->split_seed)->capture_default_str();
  c->add_option("--val-fraction", o->val_fraction)->capture_default_str();
  c->add_option("--test-fraction", o->test_fraction)->capture_default_str();
  c->add_option("--background", o->background_path, "Template file (default: collect one)");
  c->add_option("--background-ttis", o->background_ttis)->capture_default_str();
  c->add_option("--background-seed", o->background_seed)->capture_default_str();
  c->add_option("--window-us", o->window_us, "Coherent averaging window")->capture_default_str();
  c->add_option("--detections", o->detections, "Camera detections CSV (t_ns,u,v,confidence)");
  c->add_option("--homography", o->homography, "Four correspondences u0..u3 v0..v3 x0..x3 y0..y3");
  c->add_option("--epoch-tai-ns", o->epoch_tai_ns, "TAI time of TTI 0")->capture_default_str();
  c->add_option("--tai-utc-offset", o->tai_utc_offset_s)->capture_default_str();
  c->add_option("--clock-skew", o->clock_skew_s)->capture_default_str();
  c->add_option("--frame-period", o->frame_period_s)->capture_default_str();
  c->add_flag("--unseen", o->unseen, "Mark every record as the unseen split");
  c->add_flag("--include-csi", o->include_csi, "Store raw CSI on valid bins");
  c->add_option("--out", o->out, "Binary dataset")->required();
  c->add_option("--csv-out", o->csv_out, "CSV dataset");
  c->callback([o] { run_dataset(*o); });
}

void add_evaluate(CLI::App& app) {
  auto o = std::make_shared<EvaluateOpts>();
  auto* c = app.add_subcommand("evaluate", "Localization error metrics from prediction and truth CSVs");
  c->add_option("--predictions", o->predictions)->required();
  c->add_option("--truth", o->truth, "Manifest or ground-truth CSV")->required();
  c->add_option("--pred-x", o->pred_x, "Prediction x column (default x_m or x)");
  c->add_option("--pred-y", o->pred_y, "Prediction y column (default y_m or y)");
  c->add_option("--label", o->label)->capture_default_str();
  c->add_option("--json-out", o->json_out);
  c->add_option("--csv-out", o->csv_out);
  c->add_option("--cdf-out", o->cdf_out);
  c->add_option("--criteria", o->criteria, "Threshold file (key = value)");
  c->add_option("--width", o->width_m)->capture_default_str();
  c->add_option("--depth", o->depth_m)->capture_default_str();
  add_grid(*c, o->grid_h, o->grid_w);
  c->callback([o] { run_evaluate(*o); });
}

void add_bench(CLI::App& app) {
  auto o = std::make_shared<BenchOpts>();
  auto* c = app.add_subcommand("bench", "Per-stage latency of the closed loop");
  o->scene.add(*c);
  c->add_option("--iterations", o->iterations)->capture_default_str();
  c->add_option("--backend", o->backend)->capture_default_str();
  c->add_option("--tti-us", o->tti_us)->capture_default_str();
  c->add_option("--copy-delay-us", o->copy_delay_us, "Emulated host copy delay")->capture_default_str();
  c->add_option("--notify-delay-us", o->notify_delay_us, "Emulated notification delay")->capture_default_str();
  c->add_option("--slots", o->slots)->capture_default_str();
  c->add_flag("--no-control", o->no_control);
  c->add_option("--table-out", o->table_out, "Stage table CSV");
  c->add_option("--trace-out", o->trace_out, "Latency trace CSV");
  c->add_option("--json-out", o->json_out);
  c->callback([o] { run_bench(*o); });
}

void add_e2e(CLI::App& app) {
  auto o = std::make_shared<E2eOpts>();
  auto* c = app.add_subcommand("e2e", "Emulator, agent, dApp, tracking and evaluation in one run");
  o->scene.add(*c);
  o->trajectory.add(*c);
  o->inputs.add(*c);
  add_grid(*c, o->grid_h, o->grid_w);
  c->add_option("--ttis", o->ttis)->capture_default_str();
  c->add_option("--tti-us", o->tti_us)->capture_default_str();
  c->add_option("--period-ttis", o->period_ttis, "Indication period")->capture_default_str();
  c->add_option("--seed", o->seed, "Trajectory and noise seed")->capture_default_str();
  c->add_option("--backend", o->backend)->capture_default_str();
  c->add_option("--background-ttis", o->background_ttis)->capture_default_str();
  c->add_option("--background-seed", o->background_seed)->capture_default_str();
  c->add_option("--average-window", o->average_window)->capture_default_str();
  c->add_flag("--control", o->control);
  c->add_flag("--no-timestamps", o->no_timestamps, "Leave wall-clock fields out of the metrics JSON");
  c->add_flag("--realtime", o->realtime,
              "Free-running emulator: a dApp that falls behind skips lapped slots (results depend on host load)");
  c->add_option("--metrics-out", o->metrics_out, "Metrics JSON");
  c->add_option("--trace-out", o->trace_out, "Latency trace CSV");
  c->add_option("--trajectory-out", o->trajectory_out, "Predicted and true positions CSV");
  c->add_option("--cdf-out", o->cdf_out, "Error CDF CSV (averaged series)");
  c->add_option("--table-out", o->table_out, "Stage table CSV");
  c->add_option("--criteria", o->criteria, "Threshold file (key = value)");
  c->callback([o] { run_e2e_cmd(*o); });
}

}  // namespace cusense::cli
