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
#include <atomic>
#include <chrono>
#include <cstring>
#include <random>
#include <set>
#include <thread>
#include <unistd.h>

#include "cusense/e3/agent.hpp"
#include "cusense/e3/manager.hpp"
#include "cusense/e3/messages.hpp"
#include "doctest.h"

using namespace cusense;
using namespace cusense::e3;
using namespace std::chrono_literals;

namespace {

std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t max_len) {
  std::vector<std::uint8_t> out(rng() % (max_len + 1));
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

E3Message random_message(std::mt19937_64& rng) {
  auto u32 = [&] { return static_cast<std::uint32_t>(rng()); };
  auto status = [&] { return static_cast<Status>(rng() % 3); };
  auto dtype = [&] { return static_cast<DataType>(rng() % 4); };
  switch (rng() % 7) {
    case 0: return SetupRequest{u32()};
    case 1: {
      SetupResponse m{u32(), {}};
      const auto n = rng() % 5;
      for (std::size_t i = 0; i < n; ++i) {
        std::string name(rng() % 256, 'x');
        for (auto& c : name) c = static_cast<char>(rng());
        m.functions.push_back({u32(), name});
      }
      return m;
    }
    case 2: return SubscriptionRequest{u32(), dtype(), 1 + u32() % 1000, u32()};
    case 3: return SubscriptionResponse{u32(), status()};
    case 4: {
      Indication m;
      m.sub_id = u32();
      m.tti = rng();
      m.agent_tx_ns = rng();
      const auto mode = rng() % 3;
      if (mode != 1) {
        telemetry::SlotRef ref;
        ref.data_type = dtype();
        ref.buffer_index = static_cast<std::uint32_t>(rng() % 2);
        ref.slot_offset_ttis = u32();
        ref.payload_bytes = rng();
        ref.seq = rng();
        m.slot_ref = ref;
      }
      if (mode != 0) m.inline_payload = random_bytes(rng, 64);
      return m;
    }
    case 5: return ControlRequest{u32(), static_cast<std::uint16_t>(rng()), random_bytes(rng, 128)};
    default: return ControlAck{u32(), status()};
  }
}

CodecErrc decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode(bytes);
  } catch (const CodecError& e) {
    return e.code();
  }
  FAIL("decode accepted malformed input");
  return CodecErrc::kInvalidField;
}

}  // namespace

TEST_CASE("subscription response has the documented byte layout") {
  const auto bytes = encode(SubscriptionResponse{7, Status::kOk});
  const std::vector<std::uint8_t> expected{0x06, 0, 0, 0, 0x04, 0x07, 0, 0, 0, 0x00};
  CHECK(bytes == expected);
  CHECK(std::get<SubscriptionResponse>(decode(bytes)) == SubscriptionResponse{7, Status::kOk});
}

TEST_CASE("control ack with id zero round-trips") {
  const E3Message m = ControlAck{0, Status::kOk};
  CHECK(decode(encode(m)) == m);
  CHECK(message_type(m) == MsgType::kControlAck);
}

TEST_CASE("randomized messages round-trip structurally") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_message(rng);
    const auto bytes = encode(m);
    std::uint32_t length = 0;
    std::memcpy(&length, bytes.data(), 4);
    REQUIRE(length == bytes.size() - 4);
    REQUIRE(bytes[4] == static_cast<std::uint8_t>(message_type(m)));
    const auto back = decode(bytes);
    REQUIRE(back == m);
    REQUIRE(encode(back) == bytes);
  }
}

TEST_CASE("decode rejects malformed frames with specific errors") {
  auto bytes = encode(ControlRequest{3, 9, {1, 2, 3}});

  auto longer = bytes;
  longer[0] += 1;  // declared length exceeds the buffer
  CHECK(decode_error(longer) == CodecErrc::kTruncated);

  auto bad_type = bytes;
  bad_type[4] = 0xFF;
  CHECK(decode_error(bad_type) == CodecErrc::kUnknownType);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(decode_error(trailing) == CodecErrc::kTrailingBytes);

  // Declared length consistent with the buffer but the payload count overruns it.
  auto overrun = bytes;
  overrun[11] = 200;
  CHECK(decode_error(overrun) == CodecErrc::kLengthMismatch);

  // Extra body bytes the message does not account for.
  auto padded = encode(ControlAck{1, Status::kOk});
  padded.push_back(0);
  padded[0] += 1;
  CHECK(decode_error(padded) == CodecErrc::kLengthMismatch);

  auto huge = bytes;
  const std::uint32_t too_big = kMaxFrameLength + 1;
  std::memcpy(huge.data(), &too_big, 4);
  CHECK(decode_error(huge) == CodecErrc::kTooLarge);

  auto bad_status = encode(ControlAck{1, Status::kOk});
  bad_status.back() = 3;
  CHECK(decode_error(bad_status) == CodecErrc::kInvalidField);

  auto zero_period = encode(SubscriptionRequest{1, DataType::kHest, 1, 0});
  zero_period[10] = 0;
  CHECK(decode_error(zero_period) == CodecErrc::kInvalidField);

  CHECK(decode_error(std::vector<std::uint8_t>{1, 0}) == CodecErrc::kTruncated);
}

TEST_CASE("encode rejects invalid messages") {
  SetupResponse long_name{1, {{1, std::string(256, 'a')}}};
  CHECK_THROWS_AS(encode(long_name), CodecError);
  CHECK_NOTHROW(encode(SetupResponse{1, {{1, std::string(255, 'a')}}}));
  CHECK_THROWS_AS(encode(SubscriptionRequest{1, DataType::kIq, 0, 0}), CodecError);
  CHECK_THROWS_AS(encode(Indication{}), CodecError);

  // A failed encode leaves an append buffer untouched.
  std::vector<std::uint8_t> out{9, 9};
  CHECK_THROWS_AS(encode_into(long_name, out), CodecError);
  CHECK(out == std::vector<std::uint8_t>{9, 9});
}

TEST_CASE("fuzzed inputs only ever raise codec errors") {
  std::mt19937_64 rng(5);
  std::size_t accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<std::uint8_t> bytes;
    if (i % 2 == 0) {
      bytes = random_bytes(rng, 48);
      if (bytes.size() >= 5 && rng() % 2) {
        const std::uint32_t len = static_cast<std::uint32_t>(bytes.size() - 4);
        std::memcpy(bytes.data(), &len, 4);
        bytes[4] = static_cast<std::uint8_t>(1 + rng() % 7);
      }
    } else {
      bytes = encode(random_message(rng));
      const auto flips = 1 + rng() % 4;
      for (std::size_t f = 0; f < flips; ++f) bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      if (rng() % 4 == 0) bytes.resize(rng() % bytes.size());
    }
    try {
      const auto m = decode(bytes);
      // Anything accepted must re-encode to the same bytes.
      REQUIRE(encode(m) == bytes);
      ++accepted;
    } catch (const CodecError&) {
    }
  }
  MESSAGE("accepted " << accepted << " of 100000 fuzzed frames");
}

TEST_CASE("frame assembler reassembles a byte-at-a-time stream") {
  std::mt19937_64 rng(2);
  std::vector<E3Message> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(random_message(rng));
    encode_into(sent.back(), stream);
  }
  FrameAssembler fa;
  std::vector<E3Message> got;
  for (auto b : stream) {
    fa.feed(std::span<const std::uint8_t>(&b, 1));
    while (auto m = fa.next()) got.push_back(*m);
  }
  CHECK(got == sent);
  CHECK(fa.buffered() == 0);

  FrameAssembler bad;
  const std::uint8_t huge[4] = {0xff, 0xff, 0xff, 0xff};
  bad.feed(huge);
  CHECK_THROWS_AS(bad.next(), CodecError);
}

TEST_CASE("endpoint parsing") {
  auto u = Endpoint::parse("unix:/tmp/x.sock");
  CHECK(u.kind == Endpoint::Kind::kUnix);
  CHECK(u.path == "/tmp/x.sock");
  auto t = Endpoint::parse("tcp:127.0.0.1:5005");
  CHECK(t.kind == Endpoint::Kind::kTcp);
  CHECK(t.port == 5005);
  CHECK(t.to_string() == "tcp:127.0.0.1:5005");
  CHECK_THROWS_AS(Endpoint::parse("udp:1"), TransportError);
  CHECK_THROWS_AS(Endpoint::parse("tcp:127.0.0.1:0"), TransportError);
  CHECK_THROWS_AS(Endpoint::parse("tcp:nohost"), TransportError);
}

namespace {

// Owns a small plane and publishes one HEST record per tick from a thread.
class PacedWriter {
 public:
  PacedWriter(const std::string& name, std::chrono::microseconds tick)
      : plane_(telemetry::TelemetryPlane::create(config(name))), tick_(tick) {}
  ~PacedWriter() { stop(); }

  void start() {
    thread_ = std::thread([this] {
      std::vector<std::uint8_t> payload(32);
      auto next = std::chrono::steady_clock::now();
      while (!stop_.load()) {
        const std::uint64_t t = tti_.load();
        std::memcpy(payload.data(), &t, sizeof(t));
        plane_.write_slot(DataType::kHest, t, payload);
        tti_.store(t + 1);
        next += tick_;
        std::this_thread::sleep_until(next);
      }
    });
  }
  void stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
  }
  std::uint64_t ttis_written() const { return tti_.load(); }
  const telemetry::TelemetryPlane& plane() const { return plane_; }

 private:
  static telemetry::PlaneConfig config(const std::string& name) {
    telemetry::PlaneConfig c;
    c.name = name;
    c.regions = {{DataType::kHest, 16, 64}};
    return c;
  }
  telemetry::TelemetryPlane plane_;
  std::chrono::microseconds tick_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> tti_{0};
  std::thread thread_;
};

std::string unique(const std::string& stem) { return stem + std::to_string(::getpid()); }

std::vector<ReceivedIndication> collect(E3Manager& m, std::size_t n, std::chrono::milliseconds budget) {
  std::vector<ReceivedIndication> out;
  const auto deadline = std::chrono::steady_clock::now() + budget;
  while (out.size() < n && std::chrono::steady_clock::now() < deadline) {
    if (auto r = m.recv(20ms)) out.push_back(*r);
  }
  return out;
}

}  // namespace

TEST_CASE("agent and manager: setup, cadence, duration, duplicates, control") {
  const auto plane_name = "/" + unique("cusense_e3_test_");
  PacedWriter writer(plane_name, 1000us);

  std::vector<ControlRequest> seen;
  std::mutex seen_mu;
  AgentConfig ac;
  ac.endpoint = "unix:/tmp/" + unique("cusense_e3_a_") + ".sock";
  ac.plane_name = plane_name;
  ac.agent_id = 42;
  E3Agent agent(ac, [&](const ControlRequest& r) {
    std::lock_guard lock(seen_mu);
    seen.push_back(r);
    return Status::kOk;
  });
  agent.start();
  writer.start();

  E3Manager manager;
  const auto setup = manager.connect(ac.endpoint);
  CHECK(setup.agent_id == 42);
  REQUIRE(!setup.functions.empty());
  CHECK(setup.functions[0] == RanFunction{kDuLowTelemetry, "DU-Low-telemetry"});

  SUBCASE("period 1 for 10 TTIs yields exactly 10 consecutive indications") {
    REQUIRE(manager.subscribe(42, {1, DataType::kHest, 1, 10}) == Status::kOk);
    auto got = collect(manager, 11, 300ms);
    REQUIRE(got.size() == 10);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].indication.tti == got[i - 1].indication.tti + 1);
    for (const auto& r : got) {
      CHECK(r.agent_id == 42);
      REQUIRE(r.indication.slot_ref.has_value());
      telemetry::SlotSnapshot snap;
      const auto st = writer.plane().read_slot(*r.indication.slot_ref, snap);
      if (st == telemetry::ReadStatus::kOk) {
        std::uint64_t t = 0;
        std::memcpy(&t, snap.payload.data(), sizeof(t));
        CHECK(t == r.indication.tti);
      }
    }
  }

  SUBCASE("period 4 indications share a residue and step by 4") {
    REQUIRE(manager.subscribe(42, {2, DataType::kHest, 4, 0}) == Status::kOk);
    auto got = collect(manager, 12, 1000ms);
    REQUIRE(got.size() == 12);
    for (std::size_t i = 1; i < got.size(); ++i) {
      CHECK(got[i].indication.tti % 4 == got[0].indication.tti % 4);
      CHECK(got[i].indication.tti - got[i - 1].indication.tti == 4);
    }
  }

  SUBCASE("reusing a sub_id is rejected; an unknown region is an error") {
    REQUIRE(manager.subscribe(42, {5, DataType::kHest, 1, 1}) == Status::kOk);
    CHECK(manager.subscribe(42, {5, DataType::kHest, 2, 0}) == Status::kRejected);
    CHECK(manager.subscribe(42, {6, DataType::kIq, 1, 0}) == Status::kError);
  }

  SUBCASE("control requests reach the hook and are acknowledged") {
    CHECK(manager.control(42, {9, 3, {1, 2, 3}}) == Status::kOk);
    std::lock_guard lock(seen_mu);
    REQUIRE(seen.size() == 1);
    CHECK(seen[0] == ControlRequest{9, 3, {1, 2, 3}});
    CHECK(agent.stats().control_requests == 1);
  }

  SUBCASE("closing the manager cancels its session") {
    REQUIRE(manager.subscribe(42, {1, DataType::kHest, 1, 0}) == Status::kOk);
    CHECK(agent.active_sessions() == 1);
    manager.close();
    for (int i = 0; i < 100 && agent.active_sessions() != 0; ++i) std::this_thread::sleep_for(10ms);
    CHECK(agent.active_sessions() == 0);
  }
  writer.stop();
}

TEST_CASE("two managers with different periods each get their own cadence") {
  const auto plane_name = "/" + unique("cusense_e3_two_");
  PacedWriter writer(plane_name, 1000us);
  AgentConfig ac;
  ac.endpoint = "unix:/tmp/" + unique("cusense_e3_b_") + ".sock";
  ac.plane_name = plane_name;
  E3Agent agent(ac);
  agent.start();
  writer.start();

  E3Manager m1({.manager_id = 1});
  E3Manager m2({.manager_id = 2});
  m1.connect(ac.endpoint);
  m2.connect(ac.endpoint);
  REQUIRE(m1.subscribe(ac.agent_id, {1, DataType::kHest, 2, 0}) == Status::kOk);
  REQUIRE(m2.subscribe(ac.agent_id, {1, DataType::kHest, 5, 0}) == Status::kOk);
  const auto a = collect(m1, 10, 1000ms);
  const auto b = collect(m2, 10, 1000ms);
  REQUIRE(a.size() == 10);
  REQUIRE(b.size() == 10);
  for (std::size_t i = 1; i < 10; ++i) {
    CHECK(a[i].indication.tti - a[i - 1].indication.tti == 2);
    CHECK(b[i].indication.tti - b[i - 1].indication.tti == 5);
  }
  writer.stop();
}

TEST_CASE("one manager registered with two agents sees both agent ids") {
  const auto plane_name = "/" + unique("cusense_e3_multi_");
  PacedWriter writer(plane_name, 1000us);
  AgentConfig a1;
  a1.endpoint = "unix:/tmp/" + unique("cusense_e3_c1_") + ".sock";
  a1.plane_name = plane_name;
  a1.agent_id = 1;
  AgentConfig a2 = a1;
  a2.endpoint = "tcp:127.0.0.1:" + std::to_string(20000 + ::getpid() % 20000);
  a2.agent_id = 2;
  E3Agent agent1(a1), agent2(a2);
  agent1.start();
  agent2.start();
  writer.start();

  E3Manager m;
  CHECK(m.connect(a1.endpoint).agent_id == 1);
  CHECK(m.connect(a2.endpoint).agent_id == 2);
  CHECK(m.connected_agents() == 2);
  REQUIRE(m.subscribe(1, {1, DataType::kHest, 1, 20}) == Status::kOk);
  REQUIRE(m.subscribe(2, {1, DataType::kHest, 1, 20}) == Status::kOk);
  const auto got = collect(m, 40, 1000ms);
  REQUIRE(got.size() == 40);
  std::map<std::uint32_t, std::vector<std::uint64_t>> per_agent;
  for (const auto& r : got) per_agent[r.agent_id].push_back(r.indication.tti);
  CHECK(per_agent[1].size() == 20);
  CHECK(per_agent[2].size() == 20);
  for (auto& [id, ttis] : per_agent) CHECK(std::is_sorted(ttis.begin(), ttis.end()));
  writer.stop();
}

TEST_CASE("connecting to a dead endpoint times out") {
  E3Manager m({.manager_id = 1, .handshake_timeout = 2000ms});
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(m.connect("unix:/tmp/" + unique("cusense_nobody_") + ".sock"), TimeoutError);
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  CHECK(elapsed >= 1900ms);
  CHECK(elapsed < 4000ms);
}
