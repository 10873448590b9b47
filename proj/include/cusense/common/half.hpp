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

#include <array>
#include <bit>
#include <cstdint>

namespace cusense {

// IEEE-754 binary16 storage type. Arithmetic is done after widening to float.
struct Half {
  std::uint16_t bits{0};

  Half() = default;
  static constexpr Half from_bits(std::uint16_t b) noexcept {
    Half h;
    h.bits = b;
    return h;
  }
  static Half from_float(float f) noexcept;
  float to_float() const noexcept;

  friend bool operator==(Half a, Half b) noexcept { return a.bits == b.bits; }
};

static_assert(sizeof(Half) == 2);

namespace detail {

constexpr float half_bits_to_float(std::uint16_t h) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  std::uint32_t out = 0;
  if (exp == 0) {
    if (mant == 0) {
      out = sign;
    } else {
      // subnormal: renormalize
      std::int32_t e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      mant &= 0x3ffu;
      out = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    out = sign | 0x7f800000u | (mant << 13);
  } else {
    out = sign | ((exp + (127 - 15)) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(out);
}

}  // namespace detail

// Decode table covering all 65536 encodings; used by the hot IQ path.
const std::array<float, 65536>& half_decode_table() noexcept;

inline float Half::to_float() const noexcept { return half_decode_table()[bits]; }

inline Half Half::from_float(float f) noexcept {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t abs = x & 0x7fffffffu;
  if (abs >= 0x7f800000u) {
    // inf or nan (keep a quiet nan payload bit)
    const std::uint32_t nan_bit = abs > 0x7f800000u ? 0x200u : 0u;
    return from_bits(static_cast<std::uint16_t>(sign | 0x7c00u | nan_bit));
  }
  if (abs >= 0x477ff000u) {
    // rounds to >= 65520 -> overflow to inf
    return from_bits(static_cast<std::uint16_t>(sign | 0x7c00u));
  }
  if (abs < 0x38800000u) {
    // result is subnormal or zero
    if (abs < 0x33000000u) return from_bits(static_cast<std::uint16_t>(sign));
    const std::uint32_t e = abs >> 23;
    const std::uint32_t m = (abs & 0x7fffffu) | 0x800000u;
    const std::uint32_t shift = 126 - e;  // 14 + (113 - e) - 1 => aligns to 2^-24 units
    std::uint32_t half_m = m >> shift;
    const std::uint32_t rem = m & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1u);
    if (rem > halfway || (rem == halfway && (half_m & 1u))) ++half_m;
    return from_bits(static_cast<std::uint16_t>(sign | half_m));
  }
  std::uint32_t r = abs - 0x38000000u;  // rebias exponent 127 -> 15
  const std::uint32_t rem = r & 0x1fffu;
  r >>= 13;
  if (rem > 0x1000u || (rem == 0x1000u && (r & 1u))) ++r;
  return from_bits(static_cast<std::uint16_t>(sign | r));
}

}  // namespace cusense
