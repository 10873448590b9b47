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

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "cusense/common/half.hpp"
#include "cusense/common/tensor.hpp"

namespace cusense::telemetry {

// Slot payload layouts. Each starts with a 16-byte little-endian header of
// four u32 dimensions followed by row-major element data.
//   HEST : dims (A, K, S, 0), then complex<float> as interleaved (re, im) f32
//   IQ   : dims (A, symbols, PRB, subcarriers), then f16 pairs (I, Q)
//   FAPI : cell_id u16, rnti u16, prb_start u16, prb_count u16 (8 bytes, no header)
inline constexpr std::size_t kPayloadHeaderBytes = 16;

class PayloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using HestTensor = Tensor<std::complex<float>>;  // [A, K, S]
using IqTensor = Tensor<Half>;                   // [A, 14, PRB, 12, 2]

struct FapiMeta {
  std::uint16_t cell_id{0};
  std::uint16_t rnti{0};
  std::uint16_t prb_start{0};
  std::uint16_t prb_count{0};

  friend bool operator==(const FapiMeta&, const FapiMeta&) = default;
};

std::size_t hest_payload_bytes(std::size_t antennas, std::size_t subcarriers, std::size_t symbols);
std::size_t iq_payload_bytes(std::size_t antennas, std::size_t symbols, std::size_t prbs, std::size_t subcarriers);

void encode_hest(const HestTensor& hest, std::vector<std::uint8_t>& out);
HestTensor decode_hest(std::span<const std::uint8_t> bytes);

void encode_iq(const IqTensor& iq, std::vector<std::uint8_t>& out);
IqTensor decode_iq(std::span<const std::uint8_t> bytes);
// Dimensions from an IQ/HEST payload header without decoding the body.
Shape peek_payload_dims(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_fapi(const FapiMeta& meta);
FapiMeta decode_fapi(std::span<const std::uint8_t> bytes);

}  // namespace cusense::telemetry
