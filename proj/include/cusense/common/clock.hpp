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

#pragma once

#include <cstdint>
#include <ctime>

namespace cusense {

// CLOCK_MONOTONIC in nanoseconds; comparable across processes on one host.
inline std::uint64_t monotonic_ns() noexcept {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::uint64_t>(ts.tv_sec) * 1'000'000'000ull +
         static_cast<std::uint64_t>(ts.tv_nsec);
}

// CLOCK_TAI in nanoseconds (falls back to CLOCK_REALTIME + 37 s when the kernel
// has no TAI offset configured).
inline std::uint64_t tai_ns() noexcept {
  timespec tai{};
  timespec utc{};
  clock_gettime(CLOCK_TAI, &tai);
  clock_gettime(CLOCK_REALTIME, &utc);
  const auto to_ns = [](const timespec& t) {
    return static_cast<std::uint64_t>(t.tv_sec) * 1'000'000'000ull +
           static_cast<std::uint64_t>(t.tv_nsec);
  };
  const std::uint64_t t = to_ns(tai);
  const std::uint64_t u = to_ns(utc);
  if (t > u + 1'000'000'000ull) return t;
  return u + 37ull * 1'000'000'000ull;
}

}  // namespace cusense
