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

#include "cusense/dapp/runtime.hpp"

#include <ostream>
#include <sstream>

#include "cusense/common/clock.hpp"
#include "cusense/e3/manager.hpp"

namespace cusense::dapp {

void DappConfig::validate() const {
  if (subscriptions.empty()) throw DappError("at least one subscription is required");
  for (const auto& s : subscriptions) {
    if (s.period_ttis == 0) throw DappError("period_ttis must be >= 1");
  }
  if (average_window == 0) throw DappError("average_window must be >= 1");
  grid.validate();
}

bool LatencyRow::monotonic() const noexcept {
  const std::uint64_t seq[] = {t_ready, t_publish, indication_rx, shm_read_done, preproc_done, infer_done,
                               postproc_done};
  for (std::size_t i = 1; i < std::size(seq); ++i) {
    if (seq[i] < seq[i - 1]) return false;
  }
  if (control_acked && (control_sent < postproc_done || control_acked < control_sent)) return false;
  return agent_tx == 0 || (agent_tx >= t_publish && agent_tx <= indication_rx);
}

void write_trace_csv(std::ostream& out, std::span<const LatencyRow> rows) {
  out << "iteration,tti,t_ready_ns,t_publish_ns,agent_tx_ns,indication_rx_ns,shm_read_done_ns,preproc_done_ns,"
         "infer_done_ns,postproc_done_ns,control_sent_ns,control_acked_ns\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.tti << ',' << r.t_ready << ',' << r.t_publish << ',' << r.agent_tx << ','
        << r.indication_rx << ',' << r.shm_read_done << ',' << r.preproc_done << ',' << r.infer_done << ','
        << r.postproc_done << ',' << r.control_sent << ',' << r.control_acked << '\n';
  }
}

std::string to_string(const DappSummary& s) {
  std::ostringstream o;
  o << "indications=" << s.indications << " processed=" << s.processed << " stale_skips=" << s.stale_skips
    << " mismatch_skips=" << s.mismatch_skips << " control_ok=" << s.control_ok
    << " control_failed=" << s.control_failed << (s.disconnected ? " disconnected" : "");
  if (!s.first_diagnostic.empty()) o << " first_diagnostic=\"" << s.first_diagnostic << '"';
  return o.str();
}

DappRuntime::DappRuntime(DappConfig config, std::unique_ptr<InferenceBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
  config_.validate();
  if (!backend_) throw DappError("no backend");
  if (!config_.backend_id.empty() && config_.backend_id != backend_->name()) {
    throw DappError("backend '" + config_.backend_id + "' requested but '" + backend_->name() + "' given");
  }
}

DappSummary DappRuntime::run(const std::atomic<bool>* stop, const Callback& callback,
                             const std::function<void()>& ready) {
  const std::string plane_name = config_.plane_name.empty() ? telemetry::default_plane_name() : config_.plane_name;
  const auto plane = telemetry::TelemetryPlane::open(plane_name);
  const std::uint64_t tti_ns = plane.header().tti_period_ns;

  e3::E3Manager manager(e3::ManagerConfig{config_.manager_id});
  const auto setup = manager.connect(config_.endpoint);
  const std::uint32_t agent = setup.agent_id;
  std::vector<std::uint32_t> periods;
  for (std::size_t i = 0; i < config_.subscriptions.size(); ++i) {
    const auto& s = config_.subscriptions[i];
    const auto sub_id = static_cast<std::uint32_t>(i + 1);
    const auto st = manager.subscribe(agent, {sub_id, s.data_type, s.period_ttis, s.duration_ttis});
    if (st != e3::Status::kOk) {
      throw DappError("subscription " + std::to_string(sub_id) + " to " + std::string(to_string(s.data_type)) +
                      " refused with status " + std::to_string(static_cast<int>(st)));
    }
    periods.push_back(s.period_ttis);
  }
  if (ready) ready();

  const auto contract = backend_->contract();
  std::optional<tracking::GridTracker> tracker;
  if (backend_->produces_grid()) tracker.emplace(config_.grid, config_.kalman, config_.average_window);

  DappSummary summary;
  telemetry::SlotSnapshot snap;
  std::optional<std::uint64_t> last_tti;
  auto note = [&summary](const std::string& what) {
    if (summary.first_diagnostic.empty()) summary.first_diagnostic = what;
  };
  auto last_activity = std::chrono::steady_clock::now();

  while (!(stop && stop->load())) {
    if (config_.max_iterations && summary.indications >= config_.max_iterations) break;
    auto got = manager.recv(std::chrono::milliseconds(20));
    if (!got) {
      if (!manager.connected(agent)) {
        summary.disconnected = true;
        break;
      }
      if (config_.idle_timeout.count() > 0 &&
          std::chrono::steady_clock::now() - last_activity > config_.idle_timeout) {
        break;
      }
      continue;
    }
    last_activity = std::chrono::steady_clock::now();
    ++summary.indications;
    const auto& ind = got->indication;
    if (!ind.slot_ref) {
      ++summary.inline_only;
      continue;
    }
    if (ind.slot_ref->data_type != contract.data_type) {
      ++summary.mismatch_skips;
      note(backend_->name() + " expects " + std::string(to_string(contract.data_type)) + " but received " +
           std::string(to_string(ind.slot_ref->data_type)));
      continue;
    }

    LatencyRow row;
    row.iteration = summary.indications - 1;
    row.tti = ind.tti;
    row.agent_tx = ind.agent_tx_ns;
    row.indication_rx = got->rx_ns;
    if (plane.read_slot(*ind.slot_ref, snap) != telemetry::ReadStatus::kOk || snap.meta.tti != ind.tti) {
      ++summary.stale_skips;
      continue;
    }
    row.shm_read_done = monotonic_ns();
    row.t_ready = snap.meta.t_ready_ns;
    row.t_publish = snap.meta.t_publish_ns;

    BackendInput input;
    try {
      input = backend_->preprocess(snap, snap.meta.tti * tti_ns);
    } catch (const DimensionMismatch& e) {
      ++summary.mismatch_skips;
      note(e.what());
      continue;
    }
    row.preproc_done = monotonic_ns();
    const FloatTensor out = backend_->infer(input);
    row.infer_done = monotonic_ns();

    IterationResult result{ind.tti, &out, std::nullopt};
    if (tracker) {
      const std::uint32_t period = ind.sub_id >= 1 && ind.sub_id <= periods.size() ? periods[ind.sub_id - 1] : 1;
      const std::uint64_t gap = last_tti && ind.tti > *last_tti ? ind.tti - *last_tti : period;
      result.track = tracker->push(out.values(), static_cast<double>(gap * tti_ns) * 1e-9);
    }
    last_tti = ind.tti;
    row.postproc_done = monotonic_ns();

    if (config_.control_enabled) {
      e3::ControlRequest req;
      req.ctrl_id = static_cast<std::uint32_t>(row.iteration + 1);
      req.action_code = config_.control_action;
      for (int b = 0; b < 8; ++b) req.payload.push_back(static_cast<std::uint8_t>(ind.tti >> (8 * b)));
      row.control_sent = monotonic_ns();
      e3::Status st = e3::Status::kError;
      try {
        st = manager.control(agent, req);
      } catch (const std::exception& e) {
        note(std::string("control failed: ") + e.what());
      }
      row.control_acked = monotonic_ns();
      if (st == e3::Status::kOk) {
        ++summary.control_ok;
      } else {
        ++summary.control_failed;
      }
    }
    ++summary.processed;
    trace_.push_back(row);
    if (callback) callback(result);
  }
  manager.close();
  return summary;
}

}  // namespace cusense::dapp
