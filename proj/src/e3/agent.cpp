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

#include "cusense/e3/agent.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <unistd.h>

#include "cusense/common/clock.hpp"
#include "cusense/telemetry/plane.hpp"

namespace cusense::e3 {

struct E3Agent::Session {
  struct Subscription {
    SubscriptionRequest req;
    std::uint64_t next_write{0};
    std::optional<std::uint64_t> t0;
    bool done{false};
  };

  Socket sock;
  std::thread rx;
  std::atomic<bool> alive{true};
  std::mutex mu;  // guards everything below
  bool setup_done{false};
  std::vector<std::uint8_t> pending;
  std::map<std::uint32_t, Subscription> subs;

  void flush_locked() {
    while (!pending.empty()) {
      const auto n = send_nonblocking(sock.fd(), pending);
      if (n == 0) return;
      pending.erase(pending.begin(), pending.begin() + static_cast<long>(n));
    }
  }
};

E3Agent::E3Agent(AgentConfig config, ControlHook hook) : config_(std::move(config)), hook_(std::move(hook)) {
  if (!hook_) hook_ = [](const ControlRequest&) { return Status::kOk; };
}

E3Agent::~E3Agent() { stop(); }

void E3Agent::start() {
  if (running_.load()) return;
  const auto plane_name = config_.plane_name.empty() ? telemetry::default_plane_name() : config_.plane_name;
  plane_ = std::make_unique<telemetry::TelemetryPlane>(telemetry::TelemetryPlane::open(plane_name));
  listener_ = listen_on(Endpoint::parse(config_.endpoint));
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  indicator_ = std::thread([this] { indication_loop(); });
}

void E3Agent::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown();
  if (acceptor_.joinable()) acceptor_.join();
  if (indicator_.joinable()) indicator_.join();
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    sessions.swap(sessions_);
  }
  for (auto& s : sessions) {
    s->sock.shutdown();
    if (s->rx.joinable()) s->rx.join();
  }
  listener_.close();
  const auto ep = Endpoint::parse(config_.endpoint);
  if (ep.kind == Endpoint::Kind::kUnix) ::unlink(ep.path.c_str());
  plane_.reset();
}

AgentStats E3Agent::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

std::size_t E3Agent::active_sessions() const {
  std::lock_guard lock(sessions_mu_);
  std::size_t n = 0;
  for (const auto& s : sessions_) n += s->alive.load() ? 1 : 0;
  return n;
}

void E3Agent::reap_sessions() {
  std::vector<std::shared_ptr<Session>> dead;
  {
    std::lock_guard lock(sessions_mu_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (!(*it)->alive.load()) {
        dead.push_back(*it);
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : dead) {
    if (s->rx.joinable()) s->rx.join();
  }
}

void E3Agent::accept_loop() {
  while (running_.load()) {
    Socket sock;
    try {
      sock = accept_from(listener_);
    } catch (const TransportError&) {
      break;  // listener shut down
    }
    if (!running_.load()) break;
    reap_sessions();
    auto session = std::make_shared<Session>();
    session->sock = std::move(sock);
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.sessions_accepted;
    }
    std::lock_guard lock(sessions_mu_);
    sessions_.push_back(session);
    session->rx = std::thread([this, session] { session_loop(session); });
  }
}

void E3Agent::session_loop(std::shared_ptr<Session> session) {
  FrameAssembler assembler;
  std::vector<std::uint8_t> buf(64 * 1024);
  try {
    for (;;) {
      const auto n = recv_some(session->sock.fd(), buf);
      if (n == 0) break;
      assembler.feed(std::span<const std::uint8_t>(buf.data(), n));
      while (auto msg = assembler.next()) handle(*session, *msg);
    }
  } catch (const std::exception&) {
    // Protocol violation or socket error: drop the connection.
  }
  {
    std::lock_guard lock(session->mu);
    session->subs.clear();
    session->pending.clear();
  }
  session->alive = false;
  session->sock.shutdown();
}

void E3Agent::handle(Session& session, const E3Message& msg) {
  auto reply = [&session](const E3Message& out) {
    std::lock_guard lock(session.mu);
    encode_into(out, session.pending);
    session.flush_locked();
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(1);
    while (!session.pending.empty() && std::chrono::steady_clock::now() < deadline) {
      wait_writable(session.sock.fd(), std::chrono::milliseconds(10));
      session.flush_locked();
    }
  };

  if (const auto* setup = std::get_if<SetupRequest>(&msg)) {
    (void)setup;
    {
      std::lock_guard lock(session.mu);
      session.setup_done = true;
    }
    reply(SetupResponse{config_.agent_id, config_.functions});
  } else if (const auto* req = std::get_if<SubscriptionRequest>(&msg)) {
    Status status = Status::kOk;
    {
      std::lock_guard lock(session.mu);
      const auto& plane = *plane_;
      if (!session.setup_done || !plane.find_region(req->data_type)) {
        status = Status::kError;
      } else if (session.subs.count(req->sub_id) != 0) {
        status = Status::kRejected;
      } else {
        Session::Subscription sub;
        sub.req = *req;
        sub.next_write = plane.state(req->data_type).write_count;
        session.subs.emplace(req->sub_id, sub);
      }
    }
    reply(SubscriptionResponse{req->sub_id, status});
  } else if (const auto* ctrl = std::get_if<ControlRequest>(&msg)) {
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.control_requests;
    }
    Status status = Status::kError;
    try {
      status = hook_(*ctrl);
    } catch (const std::exception&) {
      status = Status::kError;
    }
    reply(ControlAck{ctrl->ctrl_id, status});
  } else {
    throw CodecError(CodecErrc::kInvalidField, "message not valid in the agent direction");
  }
}

void E3Agent::indication_loop() {
  const auto& plane = *plane_;
  std::uint32_t seen = plane.doorbell();
  std::vector<std::uint8_t> frame;
  while (running_.load()) {
    plane.wait_doorbell(seen, std::chrono::milliseconds(20));
    seen = plane.doorbell();

    std::vector<std::shared_ptr<Session>> sessions;
    {
      std::lock_guard lock(sessions_mu_);
      sessions = sessions_;
    }
    AgentStats delta;
    for (auto& s : sessions) {
      if (!s->alive.load()) continue;
      std::lock_guard lock(s->mu);
      try {
        s->flush_locked();
      } catch (const TransportError&) {
        continue;  // the session thread will notice the broken socket
      }
      for (auto& [id, sub] : s->subs) {
        if (sub.done) continue;
        const auto type = sub.req.data_type;
        const std::uint64_t count = plane.state(type).write_count;
        for (std::uint64_t k = sub.next_write; k < count && !sub.done; ++k) {
          const auto ref = plane.ref_for_write(type, k);
          telemetry::SlotMeta meta;
          if (plane.read_meta(ref, meta) != telemetry::ReadStatus::kOk) {
            ++delta.stale_skipped;
            continue;
          }
          if (!sub.t0) sub.t0 = meta.tti;
          if (meta.tti < *sub.t0) continue;
          const std::uint64_t d = meta.tti - *sub.t0;
          if (sub.req.duration_ttis != 0 && d >= sub.req.duration_ttis) {
            sub.done = true;
            break;
          }
          if (d % sub.req.period_ttis != 0) continue;
          Indication ind;
          ind.sub_id = id;
          ind.tti = meta.tti;
          ind.slot_ref = ref;
          ind.agent_tx_ns = monotonic_ns();
          frame.clear();
          encode_into(ind, frame);
          if (s->pending.size() + frame.size() > config_.send_buffer_limit) {
            ++delta.indications_dropped;
            continue;
          }
          s->pending.insert(s->pending.end(), frame.begin(), frame.end());
          ++delta.indications_sent;
        }
        sub.next_write = std::max(sub.next_write, count);
      }
      try {
        s->flush_locked();
      } catch (const TransportError&) {
      }
    }
    if (delta.indications_sent || delta.indications_dropped || delta.stale_skipped) {
      std::lock_guard lock(stats_mu_);
      stats_.indications_sent += delta.indications_sent;
      stats_.indications_dropped += delta.indications_dropped;
      stats_.stale_skipped += delta.stale_skipped;
    }
  }
}

}  // namespace cusense::e3
