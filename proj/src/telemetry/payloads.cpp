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

#include "cusense/telemetry/payloads.hpp"

#include <array>
#include <cstring>

#include "cusense/common/byte_io.hpp"

namespace cusense::telemetry {
namespace {

void put_header(std::vector<std::uint8_t>& out, std::uint32_t d0, std::uint32_t d1, std::uint32_t d2,
                std::uint32_t d3) {
  const std::uint32_t dims[4] = {d0, d1, d2, d3};
  std::memcpy(out.data(), dims, sizeof(dims));
}

std::array<std::uint32_t, 4> get_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPayloadHeaderBytes) throw PayloadError("payload shorter than its header");
  std::array<std::uint32_t, 4> dims{};
  std::memcpy(dims.data(), bytes.data(), sizeof(dims));
  return dims;
}

}  // namespace

std::size_t hest_payload_bytes(std::size_t antennas, std::size_t subcarriers, std::size_t symbols) {
  return kPayloadHeaderBytes + antennas * subcarriers * symbols * sizeof(std::complex<float>);
}

std::size_t iq_payload_bytes(std::size_t antennas, std::size_t symbols, std::size_t prbs, std::size_t subcarriers) {
  return kPayloadHeaderBytes + antennas * symbols * prbs * subcarriers * 2 * sizeof(Half);
}

void encode_hest(const HestTensor& hest, std::vector<std::uint8_t>& out) {
  if (hest.rank() != 3) throw PayloadError("HEST tensor must be rank 3 [A, K, S]");
  out.resize(hest_payload_bytes(hest.dim(0), hest.dim(1), hest.dim(2)));
  put_header(out, static_cast<std::uint32_t>(hest.dim(0)), static_cast<std::uint32_t>(hest.dim(1)),
             static_cast<std::uint32_t>(hest.dim(2)), 0);
  std::memcpy(out.data() + kPayloadHeaderBytes, hest.data(), hest.size() * sizeof(std::complex<float>));
}

HestTensor decode_hest(std::span<const std::uint8_t> bytes) {
  const auto dims = get_header(bytes);
  const std::size_t expected = hest_payload_bytes(dims[0], dims[1], dims[2]);
  if (bytes.size() != expected || dims[3] != 0) {
    throw PayloadError("HEST payload of " + std::to_string(bytes.size()) + " bytes does not match header dims");
  }
  HestTensor t({dims[0], dims[1], dims[2]});
  std::memcpy(t.data(), bytes.data() + kPayloadHeaderBytes, t.size() * sizeof(std::complex<float>));
  return t;
}

void encode_iq(const IqTensor& iq, std::vector<std::uint8_t>& out) {
  if (iq.rank() != 5 || iq.dim(4) != 2) throw PayloadError("IQ tensor must be rank 5 [A, sym, PRB, sc, 2]");
  out.resize(iq_payload_bytes(iq.dim(0), iq.dim(1), iq.dim(2), iq.dim(3)));
  put_header(out, static_cast<std::uint32_t>(iq.dim(0)), static_cast<std::uint32_t>(iq.dim(1)),
             static_cast<std::uint32_t>(iq.dim(2)), static_cast<std::uint32_t>(iq.dim(3)));
  std::memcpy(out.data() + kPayloadHeaderBytes, iq.data(), iq.size() * sizeof(Half));
}

IqTensor decode_iq(std::span<const std::uint8_t> bytes) {
  const auto dims = get_header(bytes);
  const std::size_t expected = iq_payload_bytes(dims[0], dims[1], dims[2], dims[3]);
  if (bytes.size() != expected) {
    throw PayloadError("IQ payload of " + std::to_string(bytes.size()) + " bytes does not match header dims");
  }
  IqTensor t({dims[0], dims[1], dims[2], dims[3], 2});
  std::memcpy(t.data(), bytes.data() + kPayloadHeaderBytes, t.size() * sizeof(Half));
  return t;
}

Shape peek_payload_dims(std::span<const std::uint8_t> bytes) {
  const auto d = get_header(bytes);
  return {d[0], d[1], d[2], d[3]};
}

std::vector<std::uint8_t> encode_fapi(const FapiMeta& meta) {
  ByteWriter w;
  w.put(meta.cell_id);
  w.put(meta.rnti);
  w.put(meta.prb_start);
  w.put(meta.prb_count);
  return w.take();
}

FapiMeta decode_fapi(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != 8) throw PayloadError("FAPI metadata payload must be 8 bytes");
  ByteReader r(bytes);
  FapiMeta m;
  m.cell_id = r.get<std::uint16_t>();
  m.rnti = r.get<std::uint16_t>();
  m.prb_start = r.get<std::uint16_t>();
  m.prb_count = r.get<std::uint16_t>();
  return m;
}

}  // namespace cusense::telemetry
