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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cusense/common/data_type.hpp"

namespace cusense::telemetry {

// Byte layout of the shared region. Every field is little-endian and at a
// fixed offset; docs/shm-layout.md is the normative description.
inline constexpr char kPlaneMagic[8] = {'D', 'A', 'P', 'P', 'S', 'H', 'M', '1'};
inline constexpr std::uint32_t kPlaneVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;
inline constexpr std::size_t kDescriptorBytes = 128;
inline constexpr std::size_t kDescriptorStaticBytes = 64;
inline constexpr std::size_t kSlotHeaderBytes = 64;
inline constexpr std::uint64_t kDefaultCapacityCap = 1ull << 30;
inline constexpr std::uint64_t kDefaultTtiPeriodNs = 500'000;  // numerology 1

enum class PlaneErrc {
  kEmptyConfig,
  kInvalidConfig,
  kCapacityExceeded,
  kNameCollision,
  kNotFound,
  kOsError,
  kBadHeader,
  kPayloadTooLarge,
  kNotWriter,
  kWriterConflict,
  kLeaseLost,
  kOutOfBounds,
  kUnknownRegion,
};

class PlaneError : public std::runtime_error {
 public:
  PlaneError(PlaneErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  PlaneErrc code() const noexcept { return code_; }

 private:
  PlaneErrc code_;
};

struct RegionRequest {
  DataType data_type{DataType::kHest};
  std::uint32_t slots_per_buffer{16};
  std::uint64_t slot_payload_bytes{64 * 1024};
};

struct PlaneConfig {
  std::string name;  // POSIX shm name; a leading '/' is added when missing
  std::vector<RegionRequest> regions;
  std::uint64_t tti_period_ns{kDefaultTtiPeriodNs};
  std::uint64_t capacity_cap_bytes{kDefaultCapacityCap};
};

struct ShmHeader {
  std::uint32_t version{0};
  std::uint32_t region_count{0};
  std::uint64_t tti_period_ns{0};
  std::uint64_t total_bytes{0};
};

struct RegionDescriptor {
  DataType data_type{DataType::kIq};
  std::uint32_t slots_per_buffer{0};
  std::uint64_t slot_payload_bytes{0};
  std::uint64_t ping_offset{0};
  std::uint64_t pong_offset{0};
  std::uint64_t slot_stride{0};

  friend bool operator==(const RegionDescriptor&, const RegionDescriptor&) = default;
};

struct PingPongState {
  std::uint32_t active_buffer{0};  // 0 = ping, 1 = pong
  std::uint32_t write_slot_index{0};
  std::uint64_t swap_generation{0};
  std::uint64_t write_count{0};
};

// Where one write landed. `seq` is the stable sequence value the writer
// published for that write; a reader holding a stale ref sees a different
// value once the slot has been lapped. seq == 0 means "accept any stable value".
struct SlotRef {
  DataType data_type{DataType::kIq};
  std::uint32_t buffer_index{0};
  std::uint32_t slot_offset_ttis{0};
  std::uint64_t payload_bytes{0};
  std::uint64_t seq{0};

  friend bool operator==(const SlotRef&, const SlotRef&) = default;
};

enum class ReadStatus { kOk, kStale, kEmpty };

struct SlotMeta {
  std::uint64_t tti{0};
  std::uint32_t payload_len{0};
  std::uint64_t t_ready_ns{0};    // writer began the copy
  std::uint64_t t_publish_ns{0};  // writer made the record stable
  std::uint64_t seq{0};
};

// Reader-side snapshot; the payload buffer is reused between reads.
struct SlotSnapshot {
  SlotMeta meta;
  std::vector<std::uint8_t> payload;
};

enum class PlaneAccess { kReader, kWriter };

// Wrap algebra for the k-th write (0-based) into a region with S slots per buffer.
constexpr std::uint32_t buffer_index_for_write(std::uint64_t k, std::uint32_t slots_per_buffer) {
  return static_cast<std::uint32_t>((k / slots_per_buffer) % 2);
}
constexpr std::uint32_t slot_offset_for_write(std::uint64_t k, std::uint32_t slots_per_buffer) {
  return static_cast<std::uint32_t>(k % slots_per_buffer);
}
constexpr std::uint64_t seq_for_write(std::uint64_t k, std::uint32_t slots_per_buffer) {
  return 2 * (k / (2ull * slots_per_buffer) + 1);
}

// Region name from SENSE_PLANE_NAME, or a default.
std::string default_plane_name();

// Handle to a mapped telemetry plane. Move-only; unmaps on destruction. The
// creating handle owns the writer lease and unlinks the name when destroyed.
class TelemetryPlane {
 public:
  static TelemetryPlane create(const PlaneConfig& config);
  static TelemetryPlane open(const std::string& name, PlaneAccess access = PlaneAccess::kReader,
                             bool steal_lease = false);
  static bool unlink(const std::string& name) noexcept;

  TelemetryPlane(TelemetryPlane&& other) noexcept;
  TelemetryPlane& operator=(TelemetryPlane&& other) noexcept;
  TelemetryPlane(const TelemetryPlane&) = delete;
  TelemetryPlane& operator=(const TelemetryPlane&) = delete;
  ~TelemetryPlane();

  const std::string& name() const noexcept { return name_; }
  ShmHeader header() const;
  std::vector<RegionDescriptor> descriptors() const;
  std::optional<RegionDescriptor> find_region(DataType type) const;
  RegionDescriptor region(DataType type) const;
  PingPongState state(DataType type) const;
  bool is_writer() const noexcept { return lease_token_ != 0; }

  // Raw bytes of the immutable header and descriptor fields, for fidelity checks.
  std::vector<std::uint8_t> layout_bytes() const;

  // Single-writer publish. Throws PlaneError on oversize payloads, on a
  // read-only handle, or when another handle has taken the lease.
  SlotRef write_slot(DataType type, std::uint64_t tti, std::span<const std::uint8_t> payload);

  // Consistent snapshot or kStale/kEmpty; throws kOutOfBounds for bad refs.
  ReadStatus read_slot(const SlotRef& ref, SlotSnapshot& out) const;
  // Header-only variant of read_slot.
  ReadStatus read_meta(const SlotRef& ref, SlotMeta& out) const;

  // Ref for the k-th write into a region (no check that it happened yet).
  SlotRef ref_for_write(DataType type, std::uint64_t k) const;
  std::optional<SlotRef> latest(DataType type) const;

  // Futex-backed per-write notification shared across processes.
  std::uint32_t doorbell() const noexcept;
  // Returns true when the doorbell moved past `seen` before the timeout.
  bool wait_doorbell(std::uint32_t seen, std::chrono::nanoseconds timeout) const;

 private:
  TelemetryPlane() = default;
  void reset() noexcept;
  std::size_t region_index(DataType type) const;
  std::uint8_t* descriptor_ptr(std::size_t index) const;
  std::uint8_t* slot_ptr(std::size_t region, std::uint32_t buffer, std::uint32_t offset) const;
  void check_lease() const;
  void validate_layout(std::uint64_t mapped_bytes) const;

  std::string name_;
  int fd_{-1};
  std::uint8_t* base_{nullptr};
  std::size_t bytes_{0};
  bool owner_{false};
  std::uint64_t lease_token_{0};
  // Writer-private cache of per-region write counters (index = region slot).
  std::vector<std::uint64_t> write_counts_;
};

}  // namespace cusense::telemetry
