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

#include <sys/resource.h>
#include <time.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <random>
#include <thread>

#include "acceptance.hpp"
#include "cusense/telemetry/payloads.hpp"
#include "cusense/telemetry/plane.hpp"

namespace acceptance {
namespace {

using namespace cusense;
using namespace cusense::telemetry;
using Clock = std::chrono::steady_clock;

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Word 0 = tti, words 1..n-2 pseudo-random from tti, last word = FNV-1a over the rest.
void fill(std::vector<std::uint64_t>& w, std::uint64_t tti) {
  std::uint64_t s = tti;
  w[0] = tti;
  for (std::size_t i = 1; i + 1 < w.size(); ++i) w[i] = splitmix(s);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) h = (h ^ w[i]) * 0x100000001b3ull;
  w.back() = h;
}

bool verify(const std::vector<std::uint8_t>& bytes, std::uint64_t tti) {
  if (bytes.size() % 8 != 0 || bytes.size() < 16) return false;
  const std::size_t n = bytes.size() / 8;
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::uint64_t w0 = 0, last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t w;
    std::memcpy(&w, bytes.data() + 8 * i, 8);
    if (i == 0) w0 = w;
    if (i + 1 < n) {
      h = (h ^ w) * 0x100000001b3ull;
    } else {
      last = w;
    }
  }
  return w0 == tti && last == h;
}

// Writer-side timing of a paced run. `blocked` counts write_slot calls during
// which the thread gave up the CPU voluntarily (waited on something); the
// wall-clock counters also include preemption by the host scheduler.
struct WriterStats {
  std::uint64_t blocked{0}, cpu_over{0}, wall_over{0}, late_over{0}, wrap_errors{0};
  std::int64_t max_cpu_ns{0}, max_write_ns{0}, max_late_ns{0};
};

std::int64_t thread_cpu_ns() {
  timespec ts{};
  ::clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return std::int64_t{ts.tv_sec} * 1'000'000'000 + ts.tv_nsec;
}

long voluntary_switches() {
  rusage ru{};
  ::getrusage(RUSAGE_THREAD, &ru);
  return ru.ru_nvcsw;
}

WriterStats paced_writes(TelemetryPlane& plane, std::uint64_t slots, std::size_t payload_bytes,
                         std::uint32_t per_buffer, std::chrono::nanoseconds tti) {
  WriterStats w;
  std::vector<std::uint64_t> words(payload_bytes / 8);
  const auto start = Clock::now() + std::chrono::milliseconds(10);
  for (std::uint64_t k = 0; k < slots; ++k) {
    fill(words, k);
    const auto deadline = start + k * tti;
    std::this_thread::sleep_until(deadline);
    const long sw0 = voluntary_switches();
    const auto cpu0 = thread_cpu_ns();
    const auto t0 = Clock::now();
    const auto ref = plane.write_slot(
        DataType::kHest, k, std::span(reinterpret_cast<const std::uint8_t*>(words.data()), payload_bytes));
    const auto t1 = Clock::now();
    const auto cpu_ns = thread_cpu_ns() - cpu0;
    if (voluntary_switches() != sw0) ++w.blocked;
    const auto write_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    const auto late_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - deadline).count();
    w.max_cpu_ns = std::max<std::int64_t>(w.max_cpu_ns, cpu_ns);
    w.max_write_ns = std::max<std::int64_t>(w.max_write_ns, write_ns);
    w.max_late_ns = std::max<std::int64_t>(w.max_late_ns, late_ns);
    w.cpu_over += cpu_ns > tti.count();
    w.wall_over += write_ns > tti.count();
    w.late_over += late_ns > tti.count();
    // Ping-pong model: S slots per buffer, buffers alternate, seq advances by 2 per full ring.
    const bool wrap_ok = ref.buffer_index == (k / per_buffer) % 2 && ref.slot_offset_ttis == k % per_buffer &&
                         ref.seq == 2 * (k / (2 * per_buffer) + 1) && ref.payload_bytes == payload_bytes;
    w.wrap_errors += !wrap_ok;
  }
  return w;
}

}  // namespace

Outcome telemetry_safety() {
  constexpr std::uint64_t kSlots = 100'000;
  constexpr std::uint64_t kBaselineSlots = 10'000;
  constexpr std::uint32_t kPerBuffer = 16;
  constexpr auto kTti = std::chrono::nanoseconds(2'000'000);
  // Full-band HEST slot: 4 antennas x 3276 subcarriers x 3 DMRS symbols.
  const std::size_t payload_bytes = (hest_payload_bytes(4, 3276, 3) + 7) / 8 * 8;

  PlaneConfig cfg;
  cfg.regions = {{DataType::kHest, kPerBuffer, payload_bytes}};
  cfg.tti_period_ns = 2'000'000;

  // Same writer with nobody reading: how late this host wakes a paced thread.
  cfg.name = "/" + unique_name("cusense_acc_base");
  WriterStats base;
  {
    auto plane = TelemetryPlane::create(cfg);
    base = paced_writes(plane, kBaselineSlots, payload_bytes, kPerBuffer, kTti);
  }

  cfg.name = "/" + unique_name("cusense_acc_plane");
  auto plane = TelemetryPlane::create(cfg);
  std::atomic<bool> done{false};
  std::atomic<std::uint64_t> ok{0}, stale{0}, empty{0}, torn{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&, r] {
      // The writer stands in for a DU thread with its own core. On a host with
      // fewer cores than threads, readers yield the CPU to it instead.
      ::setpriority(PRIO_PROCESS, static_cast<id_t>(::gettid()), 19);
      auto view = TelemetryPlane::open(cfg.name);
      std::mt19937_64 rng(static_cast<std::uint64_t>(r) + 1);
      SlotSnapshot snap;
      std::uint32_t seen = view.doorbell();
      auto check = [&](const SlotRef& ref) {
        switch (view.read_slot(ref, snap)) {
          case ReadStatus::kOk:
            (verify(snap.payload, snap.meta.tti) ? ok : torn).fetch_add(1);
            break;
          case ReadStatus::kStale: stale.fetch_add(1); break;
          case ReadStatus::kEmpty: empty.fetch_add(1); break;
        }
      };
      while (!done.load()) {
        view.wait_doorbell(seen, std::chrono::milliseconds(20));
        seen = view.doorbell();
        const auto count = view.state(DataType::kHest).write_count;
        if (count == 0) continue;
        // Latest write, then the oldest one still in the ring (next to be overwritten).
        check(view.ref_for_write(DataType::kHest, count - 1));
        const std::uint64_t span = std::min<std::uint64_t>(count, 2 * kPerBuffer);
        check(view.ref_for_write(DataType::kHest, count - span + rng() % 2));
      }
    });
  }

  const auto w = paced_writes(plane, kSlots, payload_bytes, kPerBuffer, kTti);
  done.store(true);
  for (auto& t : readers) t.join();
  const auto st = plane.state(DataType::kHest);
  TelemetryPlane::unlink(cfg.name);

  Checker c;
  c.note("ok_reads", ok.load())
      .note("stale", stale.load())
      .note("torn", torn.load())
      .note("blocked_writes", w.blocked)
      .note("cpu_over_tti", w.cpu_over)
      .note("max_write_cpu_us", w.max_cpu_ns / 1000)
      .note("max_write_us", w.max_write_ns / 1000)
      .note("late_over_tti", w.late_over)
      .note("max_late_us", w.max_late_ns / 1000)
      .note("baseline_late_over_tti_per_1e4", base.late_over)
      .note("baseline_max_late_us", base.max_late_ns / 1000);
  c.expect(torn.load() == 0, "torn reads observed");
  c.expect(ok.load() > kSlots, "readers verified too few slots");
  c.expect(w.blocked == 0 && w.cpu_over == 0, "writer stalled");
  c.expect(w.wrap_errors == 0 && base.wrap_errors == 0, "wrap algebra mismatch");
  c.expect(st.write_count == kSlots && st.swap_generation == kSlots / kPerBuffer &&
               st.active_buffer == (kSlots / kPerBuffer) % 2 && st.write_slot_index == kSlots % kPerBuffer,
           "final ping-pong state");
  return c.outcome();
}

}  // namespace acceptance
