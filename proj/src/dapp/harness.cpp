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

#include "cusense/dapp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "cusense/e3/agent.hpp"
#include "json.hpp"

namespace cusense::dapp {
namespace {

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Plane writer, agent and emulator thread for one in-process run.
class LiveStack {
 public:
  LiveStack(const emulator::SceneConfig& scene, const StackNames& names, std::uint64_t tti_period_ns,
            std::uint32_t slots, bool iq)
      : names_(names),
        plane_(telemetry::TelemetryPlane::create(
            emulator::emulator_plane_config(scene, names.plane, slots, iq, tti_period_ns))),
        agent_(e3::AgentConfig{names.endpoint, names.plane}) {
    agent_.start();
  }

  ~LiveStack() {
    stop_.store(true);
    if (emulator_.joinable()) emulator_.join();
    agent_.stop();
  }

  void start_emulator(const emulator::SceneConfig& scene, std::optional<emulator::Trajectory> trajectory,
                      std::uint64_t ttis, emulator::EmulatorOptions options) {
    trajectory_ = std::move(trajectory);
    options.stop = &stop_;
    emulator_ = std::thread([this, scene, ttis, options] {
      try {
        manifest_ = emulator::run_emulator(scene, trajectory_ ? &*trajectory_ : nullptr, plane_, ttis, options);
      } catch (const std::exception& e) {
        error_ = e.what();
      }
      done_.store(true);
    });
  }

  bool emulator_done() const { return done_.load(); }
  void join_emulator() {
    if (emulator_.joinable()) emulator_.join();
    if (!error_.empty()) throw DappError("emulator failed: " + error_);
  }
  void request_stop() { stop_.store(true); }
  const emulator::RunManifest& manifest() const { return manifest_; }
  const StackNames& names() const { return names_; }

 private:
  StackNames names_;
  telemetry::TelemetryPlane plane_;
  e3::E3Agent agent_;
  std::optional<emulator::Trajectory> trajectory_;
  std::thread emulator_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> done_{false};
  emulator::RunManifest manifest_;
  std::string error_;
};

std::uint64_t delta(std::uint64_t later, std::uint64_t earlier) { return later >= earlier ? later - earlier : 0; }

}  // namespace

sensing::BackgroundTemplate collect_background(const emulator::SceneConfig& scene, std::uint64_t ttis,
                                               std::uint64_t seed) {
  if (ttis == 0) throw DappError("background collection needs at least one TTI");
  auto cfg = scene;
  cfg.noise_seed = seed;
  const auto background = emulator::synth_background(cfg);
  std::vector<sensing::CsiTensor> samples;
  samples.reserve(ttis);
  for (std::uint64_t i = 0; i < ttis; ++i) {
    samples.push_back({emulator::synth_csi(cfg, background, std::nullopt, emulator::noise_seed_for_tti(cfg, i)), i, 0});
  }
  return sensing::background_template(samples);
}

StackNames StackNames::unique(const std::string& stem) {
  static std::atomic<unsigned> counter{0};
  const auto tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
  return {"/" + stem + "_" + tag, "unix:/tmp/" + stem + "_" + tag + ".sock"};
}

StageTable summarize_trace(std::span<const LatencyRow> trace, std::uint64_t copy_delay_ns,
                             std::uint64_t notify_delay_ns) {
  StageTable r;
  r.iterations = trace.size();
  r.emulated_copy_ns = copy_delay_ns;
  r.emulated_notify_ns = notify_delay_ns;
  const bool control = std::any_of(trace.begin(), trace.end(), [](const LatencyRow& x) { return x.control_acked; });

  struct Def {
    const char* op;
    const char* proto;
    bool measured;
    std::uint64_t (*fn)(const LatencyRow&);
  };
  const std::vector<Def> defs = {
      {"1. Telemetry copy from accelerator to host", "memcpy", false, nullptr},
      {"2. Producer notified that data is ready", "atomic", false, nullptr},
      {"3. Writer copies slot into SHM", "memcpy", true, [](const LatencyRow& x) { return delta(x.t_publish, x.t_ready); }},
      {"4. E3 Agent sends pointers to E3 Manager", "socket", true,
       [](const LatencyRow& x) { return delta(x.indication_rx, x.t_publish); }},
      {"5. E3 Manager sends request to inference", "n/a (in-process)", false, nullptr},
      {"6a. dApp reads SHM slot", "SHM", true, [](const LatencyRow& x) { return delta(x.shm_read_done, x.indication_rx); }},
      {"6b. dApp prepares input data", "CPU", true, [](const LatencyRow& x) { return delta(x.preproc_done, x.shm_read_done); }},
      {"7. Model performs inference", "CPU", true, [](const LatencyRow& x) { return delta(x.infer_done, x.preproc_done); }},
      {"8. Results post-processed (return hop n/a, in-process)", "CPU", true,
       [](const LatencyRow& x) { return delta(x.postproc_done, x.infer_done); }},
      {"9. E3 Manager sends control, E3 Agent acks", "socket", true,
       [](const LatencyRow& x) { return delta(x.control_acked, x.postproc_done); }},
  };
  double cumulative = 0.0;
  for (const auto& d : defs) {
    StageStat s{d.op, d.proto, d.measured};
    if (d.fn) {
      if (std::string(d.op).rfind("9.", 0) == 0 && !control) {
        s.measured = false;
        s.protocol = "n/a (control disabled)";
      } else {
        std::vector<double> v;
        v.reserve(trace.size());
        for (const auto& x : trace) v.push_back(static_cast<double>(d.fn(x)) * 1e-3);
        s.median_us = percentile(v, 0.5);
        s.p99_us = percentile(v, 0.99);
      }
    } else if (std::string(d.op).rfind("1.", 0) == 0) {
      s.median_us = s.p99_us = static_cast<double>(copy_delay_ns) * 1e-3;
      s.protocol += " (emulated)";
    } else if (std::string(d.op).rfind("2.", 0) == 0) {
      s.median_us = s.p99_us = static_cast<double>(notify_delay_ns) * 1e-3;
      s.protocol += " (emulated)";
    }
    cumulative += s.median_us;
    s.cumulative_us = cumulative;
    r.rows.push_back(s);
  }
  std::vector<double> total, shm_pre;
  for (const auto& x : trace) {
    total.push_back(static_cast<double>(copy_delay_ns + notify_delay_ns + delta(x.end(), x.t_ready)) * 1e-3);
    shm_pre.push_back(static_cast<double>(delta(x.preproc_done, x.indication_rx)) * 1e-3);
  }
  r.total_median_us = percentile(total, 0.5);
  r.total_p99_us = percentile(total, 0.99);
  r.shm_read_preproc_median_us = percentile(shm_pre, 0.5);
  return r;
}

std::string format_stage_table(const StageTable& r) {
  std::ostringstream o;
  o << "backend " << r.backend << ", " << r.iterations << " iterations\n";
  o << std::left << std::setw(58) << "Operation" << std::setw(26) << "Protocol" << std::right << std::setw(12)
    << "median[us]" << std::setw(12) << "p99[us]" << std::setw(14) << "cumul.[us]" << '\n';
  o << std::fixed << std::setprecision(1);
  for (const auto& s : r.rows) {
    o << std::left << std::setw(58) << s.operation << std::setw(26) << s.protocol << std::right;
    if (s.measured || s.median_us > 0.0) {
      o << std::setw(12) << s.median_us << std::setw(12) << s.p99_us;
    } else {
      o << std::setw(12) << "n/a" << std::setw(12) << "n/a";
    }
    o << std::setw(14) << s.cumulative_us << '\n';
  }
  o << "total per iteration: median " << r.total_median_us << " us, p99 " << r.total_p99_us << " us\n";
  o << "SHM read + preprocess: median " << r.shm_read_preproc_median_us << " us\n";
  return o.str();
}

void write_stage_table_csv(std::ostream& out, const StageTable& r) {
  out << "operation,protocol,measured,median_us,p99_us,cumulative_us\n" << std::setprecision(10);
  for (const auto& s : r.rows) {
    out << '"' << s.operation << "\"," << '"' << s.protocol << "\"," << (s.measured ? 1 : 0) << ',' << s.median_us
        << ',' << s.p99_us << ',' << s.cumulative_us << '\n';
  }
  out << "\"total\",\"\",1," << r.total_median_us << ',' << r.total_p99_us << ",\n";
}

StageTable bench_loop(const BenchConfig& cfg) {
  if (cfg.iterations < kMinBenchIterations) {
    throw DappError("insufficient iterations: " + std::to_string(cfg.iterations) + " (need at least " +
                    std::to_string(kMinBenchIterations) + ")");
  }
  const bool iq = cfg.backend == "iq_processor";
  BackendOptions opts;
  opts.scene = cfg.scene;
  if (iq) {
    opts.iq_dims = {cfg.scene.antennas, 14, cfg.scene.prbs(), 12, 2};
  } else {
    opts.background = collect_background(cfg.scene, cfg.background_ttis, cfg.scene.noise_seed ^ 0x0b5eull);
  }
  auto backend = make_backend(cfg.backend, std::move(opts));
  const auto names = StackNames::unique("cusense_bench");
  LiveStack stack(cfg.scene, names, cfg.tti_period_ns, cfg.slots_per_buffer, iq);

  DappConfig dc;
  dc.endpoint = names.endpoint;
  dc.plane_name = names.plane;
  dc.subscriptions = {{iq ? DataType::kIq : DataType::kHest, 1, 0}};
  dc.backend_id = cfg.backend;
  dc.control_enabled = cfg.control;
  dc.max_iterations = cfg.iterations;
  dc.idle_timeout = std::chrono::milliseconds(3000);
  DappRuntime runtime(dc, std::move(backend));

  emulator::EmulatorOptions eo;
  eo.tti_period_ns = cfg.tti_period_ns;
  eo.iq_mode = iq ? emulator::IqMode::kPool : emulator::IqMode::kOff;
  const auto summary = runtime.run(cfg.stop, {}, [&] {
    // A few spare TTIs cover indications lost to stale reads.
    stack.start_emulator(cfg.scene, std::nullopt, cfg.iterations + cfg.iterations / 20 + 50, eo);
  });
  stack.request_stop();
  stack.join_emulator();

  auto report = summarize_trace(runtime.trace(), cfg.copy_delay_ns, cfg.notify_delay_ns);
  report.backend = cfg.backend;
  report.summary = summary;
  report.trace = runtime.trace();
  return report;
}

E2eResult run_e2e(const E2eConfig& cfg) {
  cfg.scene.validate();
  auto scene = cfg.scene;
  BackendOptions opts;
  opts.scene = scene;
  opts.grid = cfg.grid;
  opts.background = cfg.background ? *cfg.background
                                   : collect_background(scene, cfg.background_ttis, cfg.background_seed);
  opts.model = cfg.model;
  opts.norm = cfg.norm;
  auto backend = make_backend(cfg.backend, std::move(opts));
  if (!backend->produces_grid()) throw DappError("e2e needs a localization backend, got '" + cfg.backend + "'");

  const auto trajectory = emulator::Trajectory::build(cfg.trajectory, scene.width_m, scene.depth_m);
  const auto names = StackNames::unique("cusense_e2e");
  LiveStack stack(scene, names, cfg.tti_period_ns, cfg.slots_per_buffer, false);

  DappConfig dc;
  dc.endpoint = names.endpoint;
  dc.plane_name = names.plane;
  dc.subscriptions = {{DataType::kHest, cfg.period_ttis, 0}};
  dc.backend_id = cfg.backend;
  dc.control_enabled = cfg.control;
  dc.max_iterations = (cfg.ttis + cfg.period_ttis - 1) / cfg.period_ttis;
  dc.idle_timeout = std::chrono::milliseconds(3000);
  dc.grid = cfg.grid;
  dc.kalman = cfg.kalman;
  dc.average_window = cfg.average_window;
  DappRuntime runtime(dc, std::move(backend));

  emulator::EmulatorOptions eo;
  eo.tti_period_ns = cfg.tti_period_ns;
  eo.iq_mode = emulator::IqMode::kOff;
  // Next TTI the dApp has not finished with; the writer stays less than one
  // buffer ahead of it, which keeps every unread slot out of reach.
  std::atomic<std::uint64_t> frontier{0};
  std::atomic<bool> dapp_done{false};
  if (cfg.lossless) {
    eo.before_write = [&, lead = std::uint64_t{cfg.slots_per_buffer}](std::uint64_t tti) {
      const auto give_up = std::chrono::steady_clock::now() + dc.idle_timeout;
      while (tti >= frontier.load() + lead && !dapp_done.load() && std::chrono::steady_clock::now() < give_up) {
        if (cfg.stop && cfg.stop->load()) return;
        std::this_thread::sleep_for(std::chrono::microseconds(100));
      }
    };
  }
  std::map<std::uint64_t, tracking::TrackPoint> predictions;
  const auto summary = runtime.run(
      cfg.stop,
      [&](const IterationResult& it) {
        predictions[it.tti] = *it.track;
        frontier.store(it.tti + 1);
      },
      [&] { stack.start_emulator(scene, trajectory, cfg.ttis, eo); });
  dapp_done.store(true);
  if (cfg.stop && cfg.stop->load()) stack.request_stop();
  stack.join_emulator();

  E2eResult out;
  out.backend = cfg.backend;
  out.summary = summary;
  out.trace = runtime.trace();
  out.pacing = stack.manifest().pacing;
  out.ttis = cfg.ttis;
  std::vector<tracking::Position> raw, avg, filt, truth;
  for (const auto& e : stack.manifest().entries) {
    const auto it = predictions.find(e.tti);
    if (it == predictions.end() || std::isnan(e.x_m)) continue;
    const tracking::Position gt{e.x_m, e.y_m};
    out.samples.push_back({e.tti, it->second.raw, it->second.averaged, it->second.filtered, gt});
    raw.push_back(it->second.raw);
    avg.push_back(it->second.averaged);
    filt.push_back(it->second.filtered);
    truth.push_back(gt);
  }
  if (truth.empty()) throw DappError("e2e produced no predictions (" + to_string(summary) + ")");
  out.raw = tracking::evaluate(raw, truth);
  out.averaged = tracking::evaluate(avg, truth);
  out.filtered = tracking::evaluate(filt, truth);
  return out;
}

std::string e2e_json(const E2eResult& r, bool include_timestamps) {
  nlohmann::ordered_json j;
  j["backend"] = r.backend;
  j["ttis"] = r.ttis;
  j["samples"] = r.samples.size();
  j["primary_series"] = "averaged";
  j["metrics"] = {{"raw", nlohmann::ordered_json::parse(tracking::to_json(r.raw, -1, false))},
                  {"averaged", nlohmann::ordered_json::parse(tracking::to_json(r.averaged, -1, false))},
                  {"kalman", nlohmann::ordered_json::parse(tracking::to_json(r.filtered, -1, false))}};
  j["cdf_averaged"] = nlohmann::ordered_json::parse(tracking::to_json(r.averaged, -1, true))["cdf"];
  j["dapp"] = {{"indications", r.summary.indications},
               {"processed", r.summary.processed},
               {"stale_skips", r.summary.stale_skips},
               {"mismatch_skips", r.summary.mismatch_skips}};
  if (include_timestamps) {
    j["generated_unix_s"] = static_cast<std::int64_t>(std::time(nullptr));
    j["pacing"] = {{"writes", r.pacing.writes},
                   {"mean_interval_ns", r.pacing.mean_interval_ns},
                   {"mean_lateness_ns", r.pacing.mean_lateness_ns},
                   {"overruns", r.pacing.overruns}};
    const auto table = summarize_trace(r.trace);
    j["latency"] = {{"total_median_us", table.total_median_us},
                    {"total_p99_us", table.total_p99_us},
                    {"shm_read_preproc_median_us", table.shm_read_preproc_median_us}};
  }
  return j.dump(2);
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectorySample> samples) {
  out << "sample,tti,raw_x,raw_y,avg_x,avg_y,kalman_x,kalman_y,gt_x,gt_y\n" << std::setprecision(9);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out << i << ',' << s.tti << ',' << s.raw.x << ',' << s.raw.y << ',' << s.averaged.x << ',' << s.averaged.y << ','
        << s.filtered.x << ',' << s.filtered.y << ',' << s.truth.x << ',' << s.truth.y << '\n';
  }
}

}  // namespace cusense::dapp
