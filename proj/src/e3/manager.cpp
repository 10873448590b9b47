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

#include "cusense/e3/manager.hpp"

#include <poll.h>
#include <vector>

#include "cusense/common/clock.hpp"

namespace cusense::e3 {

struct E3Manager::Link {
  std::uint32_t agent_id{0};
  Socket sock;
  FrameAssembler assembler;
  std::mutex send_mu;
  bool alive{true};  // guarded by E3Manager::mu_
  std::string error;
  // Responses keyed by (msg_type, sub_id/ctrl_id); guarded by E3Manager::mu_.
  std::map<std::pair<MsgType, std::uint32_t>, E3Message> responses;
};

E3Manager::E3Manager(ManagerConfig config) : config_(config) {
  rx_ = std::thread([this] { rx_loop(); });
}

E3Manager::~E3Manager() { close(); }

void E3Manager::close() {
  if (!running_.exchange(false)) return;
  if (rx_.joinable()) rx_.join();
  std::lock_guard lock(mu_);
  for (auto& [id, link] : links_) {
    link->alive = false;
    link->sock.close();
  }
  cv_.notify_all();
}

SetupResponse E3Manager::connect(const std::string& endpoint) {
  const auto deadline = std::chrono::steady_clock::now() + config_.handshake_timeout;
  auto sock = connect_to(Endpoint::parse(endpoint), config_.handshake_timeout);
  send_all(sock.fd(), encode(SetupRequest{config_.manager_id}));

  FrameAssembler assembler;
  std::vector<std::uint8_t> buf(4096);
  std::optional<E3Message> msg;
  while (!msg) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0 || !wait_readable(sock.fd(), left)) {
      throw TimeoutError("setup handshake with " + endpoint + " timed out");
    }
    const auto n = recv_some(sock.fd(), buf);
    if (n == 0) throw TransportError("agent at " + endpoint + " closed the connection during setup");
    assembler.feed(std::span<const std::uint8_t>(buf.data(), n));
    msg = assembler.next();
  }
  const auto* resp = std::get_if<SetupResponse>(&*msg);
  if (!resp) throw CodecError(CodecErrc::kInvalidField, "expected SetupResponse from " + endpoint);

  auto link = std::make_shared<Link>();
  link->agent_id = resp->agent_id;
  link->sock = std::move(sock);
  link->assembler = std::move(assembler);
  std::lock_guard lock(mu_);
  auto it = links_.find(resp->agent_id);
  if (it != links_.end() && it->second->alive) {
    throw TransportError("agent_id " + std::to_string(resp->agent_id) + " is already connected");
  }
  links_[resp->agent_id] = link;
  // Frames that arrived together with the SetupResponse.
  while (auto extra = link->assembler.next()) dispatch(*link, std::move(*extra));
  return *resp;
}

std::shared_ptr<E3Manager::Link> E3Manager::find_link(std::uint32_t agent_id) const {
  std::lock_guard lock(mu_);
  auto it = links_.find(agent_id);
  if (it == links_.end() || !it->second->alive) {
    throw TransportError("agent " + std::to_string(agent_id) + " is not connected");
  }
  return it->second;
}

E3Message E3Manager::await_response(Link& link, MsgType type, std::uint32_t id) {
  std::unique_lock lock(mu_);
  const auto key = std::make_pair(type, id);
  const bool ok = cv_.wait_for(lock, config_.response_timeout,
                               [&] { return link.responses.count(key) != 0 || !link.alive; });
  auto it = link.responses.find(key);
  if (it != link.responses.end()) {
    auto msg = std::move(it->second);
    link.responses.erase(it);
    return msg;
  }
  if (!ok) throw TimeoutError("no response from agent " + std::to_string(link.agent_id));
  throw TransportError("agent " + std::to_string(link.agent_id) + " disconnected: " + link.error);
}

Status E3Manager::subscribe(std::uint32_t agent_id, const SubscriptionRequest& req) {
  auto link = find_link(agent_id);
  const auto frame = encode(req);
  {
    std::lock_guard lock(link->send_mu);
    send_all(link->sock.fd(), frame);
  }
  auto msg = await_response(*link, MsgType::kSubscriptionResponse, req.sub_id);
  return std::get<SubscriptionResponse>(msg).status;
}

Status E3Manager::control(std::uint32_t agent_id, const ControlRequest& req) {
  auto link = find_link(agent_id);
  const auto frame = encode(req);
  {
    std::lock_guard lock(link->send_mu);
    send_all(link->sock.fd(), frame);
  }
  auto msg = await_response(*link, MsgType::kControlAck, req.ctrl_id);
  return std::get<ControlAck>(msg).status;
}

std::optional<ReceivedIndication> E3Manager::recv(std::chrono::nanoseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !indications_.empty(); })) return std::nullopt;
  auto out = std::move(indications_.front());
  indications_.pop_front();
  return out;
}

std::size_t E3Manager::pending_indications() const {
  std::lock_guard lock(mu_);
  return indications_.size();
}

bool E3Manager::connected(std::uint32_t agent_id) const {
  std::lock_guard lock(mu_);
  auto it = links_.find(agent_id);
  return it != links_.end() && it->second->alive;
}

std::size_t E3Manager::connected_agents() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [id, link] : links_) n += link->alive ? 1 : 0;
  return n;
}

// Called with mu_ held.
void E3Manager::dispatch(Link& link, E3Message msg) {
  if (auto* ind = std::get_if<Indication>(&msg)) {
    indications_.push_back(ReceivedIndication{link.agent_id, std::move(*ind), monotonic_ns()});
  } else if (auto* sr = std::get_if<SubscriptionResponse>(&msg)) {
    link.responses[{MsgType::kSubscriptionResponse, sr->sub_id}] = msg;
  } else if (auto* ack = std::get_if<ControlAck>(&msg)) {
    link.responses[{MsgType::kControlAck, ack->ctrl_id}] = msg;
  } else {
    throw CodecError(CodecErrc::kInvalidField, "message not valid in the manager direction");
  }
  cv_.notify_all();
}

// Called with mu_ held.
void E3Manager::drop_link(Link& link, const std::string& why) {
  link.alive = false;
  link.error = why;
  link.sock.shutdown();
  cv_.notify_all();
}

void E3Manager::rx_loop() {
  std::vector<std::uint8_t> buf(256 * 1024);
  std::vector<pollfd> fds;
  std::vector<std::shared_ptr<Link>> polled;
  while (running_.load()) {
    fds.clear();
    polled.clear();
    {
      std::lock_guard lock(mu_);
      for (auto& [id, link] : links_) {
        if (!link->alive) continue;
        fds.push_back(pollfd{link->sock.fd(), POLLIN, 0});
        polled.push_back(link);
      }
    }
    // Short timeout so newly connected agents join the poll set promptly.
    const int rc = ::poll(fds.data(), fds.size(), 5);
    if (rc <= 0) continue;
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].revents == 0) continue;
      auto& link = *polled[i];
      std::size_t n = 0;
      std::string error;
      try {
        n = recv_some(link.sock.fd(), buf);
        if (n == 0) error = "connection closed";
      } catch (const TransportError& e) {
        error = e.what();
      }
      std::lock_guard lock(mu_);
      if (!error.empty()) {
        drop_link(link, error);
        continue;
      }
      try {
        link.assembler.feed(std::span<const std::uint8_t>(buf.data(), n));
        while (auto msg = link.assembler.next()) dispatch(link, std::move(*msg));
      } catch (const CodecError& e) {
        drop_link(link, std::string("protocol violation: ") + e.what());
      }
    }
  }
}

}  // namespace cusense::e3
