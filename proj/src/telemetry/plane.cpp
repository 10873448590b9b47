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

#include "cusense/telemetry/plane.hpp"

#include <fcntl.h>
#include <linux/futex.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <climits>
#include <cstdlib>
#include <cstring>
#include <random>

#include "cusense/common/clock.hpp"

namespace cusense::telemetry {
namespace {

// Header field offsets.
constexpr std::size_t kOffMagic = 0;
constexpr std::size_t kOffVersion = 8;
constexpr std::size_t kOffRegionCount = 12;
constexpr std::size_t kOffTtiPeriod = 16;
constexpr std::size_t kOffTotalBytes = 24;
constexpr std::size_t kOffLease = 32;
constexpr std::size_t kOffDoorbell = 40;
constexpr std::size_t kHeaderStaticBytes = 32;

// Descriptor field offsets (relative to the descriptor).
constexpr std::size_t kOffDataType = 0;
constexpr std::size_t kOffSlots = 4;
constexpr std::size_t kOffSlotPayload = 8;
constexpr std::size_t kOffPing = 16;
constexpr std::size_t kOffPong = 24;
constexpr std::size_t kOffStride = 32;
constexpr std::size_t kOffActive = 64;
constexpr std::size_t kOffWriteIndex = 68;
constexpr std::size_t kOffSwapGen = 72;
constexpr std::size_t kOffWriteCount = 80;

// Slot header offsets.
constexpr std::size_t kOffSeq = 0;
constexpr std::size_t kOffTti = 8;
constexpr std::size_t kOffLen = 16;
constexpr std::size_t kOffReady = 24;
constexpr std::size_t kOffPublish = 32;

constexpr std::uint64_t align_up(std::uint64_t x, std::uint64_t a) { return (x + a - 1) / a * a; }

template <class T>
std::atomic_ref<T> atomic_at(const std::uint8_t* base, std::size_t off) {
  static_assert(std::atomic_ref<T>::is_always_lock_free);
  return std::atomic_ref<T>(*reinterpret_cast<T*>(const_cast<std::uint8_t*>(base) + off));
}

template <class T>
T load_plain(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void store_plain(std::uint8_t* p, T v) {
  std::memcpy(p, &v, sizeof(T));
}

std::string normalize(const std::string& name) {
  if (name.empty()) throw PlaneError(PlaneErrc::kInvalidConfig, "plane name is empty");
  return name.front() == '/' ? name : "/" + name;
}

std::string os_message(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

std::uint64_t make_lease_token() {
  std::random_device rd;
  std::uint64_t t = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ monotonic_ns() ^
                    (static_cast<std::uint64_t>(::getpid()) << 17);
  return t == 0 ? 1 : t;
}

long futex(const std::uint32_t* addr, int op, std::uint32_t val, const timespec* timeout) {
  return ::syscall(SYS_futex, addr, op, val, timeout, nullptr, 0);
}

}  // namespace

std::string default_plane_name() {
  if (const char* env = std::getenv("SENSE_PLANE_NAME"); env && *env) return normalize(env);
  return "/cusense_plane";
}

TelemetryPlane TelemetryPlane::create(const PlaneConfig& config) {
  if (config.regions.empty()) throw PlaneError(PlaneErrc::kEmptyConfig, "empty config: no regions requested");
  if (config.tti_period_ns == 0) throw PlaneError(PlaneErrc::kInvalidConfig, "tti_period_ns must be > 0");

  // Lay out descriptors, then ping/pong arrays region by region.
  std::vector<RegionDescriptor> descs;
  std::uint64_t cursor = align_up(kHeaderBytes + kDescriptorBytes * config.regions.size(), 64);
  for (const auto& req : config.regions) {
    if (req.slots_per_buffer < 2) {
      throw PlaneError(PlaneErrc::kInvalidConfig, "slots_per_buffer must be >= 2");
    }
    if (req.slot_payload_bytes == 0 || req.slot_payload_bytes > config.capacity_cap_bytes) {
      throw PlaneError(PlaneErrc::kCapacityExceeded, "slot payload size exceeds the capacity cap");
    }
    for (const auto& d : descs) {
      if (d.data_type == req.data_type) {
        throw PlaneError(PlaneErrc::kInvalidConfig,
                         "duplicate region for data type " + std::string(to_string(req.data_type)));
      }
    }
    RegionDescriptor d;
    d.data_type = req.data_type;
    d.slots_per_buffer = req.slots_per_buffer;
    d.slot_payload_bytes = req.slot_payload_bytes;
    d.slot_stride = align_up(kSlotHeaderBytes + req.slot_payload_bytes, 64);
    const std::uint64_t buffer_bytes = d.slot_stride * req.slots_per_buffer;
    d.ping_offset = cursor;
    d.pong_offset = cursor + buffer_bytes;
    cursor += 2 * buffer_bytes;
    if (cursor > config.capacity_cap_bytes) {
      throw PlaneError(PlaneErrc::kCapacityExceeded, "plane needs " + std::to_string(cursor) +
                                                         " bytes, cap is " +
                                                         std::to_string(config.capacity_cap_bytes));
    }
    descs.push_back(d);
  }
  const std::uint64_t total = cursor;

  TelemetryPlane plane;
  plane.name_ = normalize(config.name);
  plane.fd_ = ::shm_open(plane.name_.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (plane.fd_ < 0) {
    if (errno == EEXIST) throw PlaneError(PlaneErrc::kNameCollision, "plane '" + plane.name_ + "' already exists");
    throw PlaneError(PlaneErrc::kOsError, os_message("shm_open(" + plane.name_ + ")"));
  }
  plane.owner_ = true;
  if (::ftruncate(plane.fd_, static_cast<off_t>(total)) != 0) {
    throw PlaneError(PlaneErrc::kOsError, os_message("ftruncate"));
  }
  void* addr = ::mmap(nullptr, total, PROT_READ | PROT_WRITE, MAP_SHARED, plane.fd_, 0);
  if (addr == MAP_FAILED) throw PlaneError(PlaneErrc::kOsError, os_message("mmap"));
  plane.base_ = static_cast<std::uint8_t*>(addr);
  plane.bytes_ = total;

  // ftruncate zero-fills, so every slot starts with seq == 0 (empty).
  std::uint8_t* h = plane.base_;
  std::memcpy(h + kOffMagic, kPlaneMagic, 8);
  store_plain<std::uint32_t>(h + kOffVersion, kPlaneVersion);
  store_plain<std::uint32_t>(h + kOffRegionCount, static_cast<std::uint32_t>(descs.size()));
  store_plain<std::uint64_t>(h + kOffTtiPeriod, config.tti_period_ns);
  store_plain<std::uint64_t>(h + kOffTotalBytes, total);
  for (std::size_t i = 0; i < descs.size(); ++i) {
    std::uint8_t* d = plane.descriptor_ptr(i);
    store_plain<std::uint32_t>(d + kOffDataType, static_cast<std::uint32_t>(descs[i].data_type));
    store_plain<std::uint32_t>(d + kOffSlots, descs[i].slots_per_buffer);
    store_plain<std::uint64_t>(d + kOffSlotPayload, descs[i].slot_payload_bytes);
    store_plain<std::uint64_t>(d + kOffPing, descs[i].ping_offset);
    store_plain<std::uint64_t>(d + kOffPong, descs[i].pong_offset);
    store_plain<std::uint64_t>(d + kOffStride, descs[i].slot_stride);
  }
  plane.write_counts_.assign(descs.size(), 0);
  plane.lease_token_ = make_lease_token();
  atomic_at<std::uint64_t>(h, kOffLease).store(plane.lease_token_, std::memory_order_release);
  return plane;
}

TelemetryPlane TelemetryPlane::open(const std::string& name, PlaneAccess access, bool steal_lease) {
  TelemetryPlane plane;
  plane.name_ = normalize(name);
  const bool writer = access == PlaneAccess::kWriter;
  plane.fd_ = ::shm_open(plane.name_.c_str(), writer ? O_RDWR : O_RDONLY, 0);
  if (plane.fd_ < 0) {
    if (errno == ENOENT) throw PlaneError(PlaneErrc::kNotFound, "plane '" + plane.name_ + "' does not exist");
    throw PlaneError(PlaneErrc::kOsError, os_message("shm_open(" + plane.name_ + ")"));
  }
  struct stat st {};
  if (::fstat(plane.fd_, &st) != 0) throw PlaneError(PlaneErrc::kOsError, os_message("fstat"));
  if (static_cast<std::uint64_t>(st.st_size) < kHeaderBytes) {
    throw PlaneError(PlaneErrc::kBadHeader, "plane '" + plane.name_ + "' is smaller than its header");
  }
  const auto mapped = static_cast<std::size_t>(st.st_size);
  void* addr = ::mmap(nullptr, mapped, writer ? PROT_READ | PROT_WRITE : PROT_READ, MAP_SHARED, plane.fd_, 0);
  if (addr == MAP_FAILED) throw PlaneError(PlaneErrc::kOsError, os_message("mmap"));
  plane.base_ = static_cast<std::uint8_t*>(addr);
  plane.bytes_ = mapped;
  plane.validate_layout(mapped);

  if (writer) {
    const std::uint64_t token = make_lease_token();
    auto lease = atomic_at<std::uint64_t>(plane.base_, kOffLease);
    std::uint64_t expected = 0;
    if (!lease.compare_exchange_strong(expected, token, std::memory_order_acq_rel)) {
      if (!steal_lease) {
        throw PlaneError(PlaneErrc::kWriterConflict, "plane '" + plane.name_ + "' already has a writer");
      }
      lease.store(token, std::memory_order_release);
    }
    plane.lease_token_ = token;
    const auto n = load_plain<std::uint32_t>(plane.base_ + kOffRegionCount);
    for (std::uint32_t i = 0; i < n; ++i) {
      plane.write_counts_.push_back(
          atomic_at<std::uint64_t>(plane.descriptor_ptr(i), kOffWriteCount).load(std::memory_order_acquire));
    }
  }
  return plane;
}

bool TelemetryPlane::unlink(const std::string& name) noexcept {
  try {
    return ::shm_unlink(normalize(name).c_str()) == 0;
  } catch (...) {
    return false;
  }
}

TelemetryPlane::TelemetryPlane(TelemetryPlane&& other) noexcept { *this = std::move(other); }

TelemetryPlane& TelemetryPlane::operator=(TelemetryPlane&& other) noexcept {
  if (this != &other) {
    reset();
    name_ = std::move(other.name_);
    fd_ = std::exchange(other.fd_, -1);
    base_ = std::exchange(other.base_, nullptr);
    bytes_ = std::exchange(other.bytes_, 0);
    owner_ = std::exchange(other.owner_, false);
    lease_token_ = std::exchange(other.lease_token_, 0);
    write_counts_ = std::move(other.write_counts_);
  }
  return *this;
}

TelemetryPlane::~TelemetryPlane() { reset(); }

void TelemetryPlane::reset() noexcept {
  if (base_ && lease_token_ != 0) {
    std::uint64_t expected = lease_token_;
    atomic_at<std::uint64_t>(base_, kOffLease).compare_exchange_strong(expected, 0, std::memory_order_acq_rel);
  }
  if (base_) ::munmap(base_, bytes_);
  if (fd_ >= 0) ::close(fd_);
  if (owner_ && !name_.empty()) ::shm_unlink(name_.c_str());
  base_ = nullptr;
  fd_ = -1;
  bytes_ = 0;
  owner_ = false;
  lease_token_ = 0;
}

void TelemetryPlane::validate_layout(std::uint64_t mapped_bytes) const {
  if (std::memcmp(base_ + kOffMagic, kPlaneMagic, 8) != 0) {
    throw PlaneError(PlaneErrc::kBadHeader, "plane '" + name_ + "': bad magic");
  }
  const auto version = load_plain<std::uint32_t>(base_ + kOffVersion);
  if (version != kPlaneVersion) {
    throw PlaneError(PlaneErrc::kBadHeader, "plane '" + name_ + "': version " + std::to_string(version) +
                                                " != " + std::to_string(kPlaneVersion));
  }
  const auto regions = load_plain<std::uint32_t>(base_ + kOffRegionCount);
  const auto tti = load_plain<std::uint64_t>(base_ + kOffTtiPeriod);
  const auto total = load_plain<std::uint64_t>(base_ + kOffTotalBytes);
  if (regions == 0 || tti == 0 || total > mapped_bytes ||
      kHeaderBytes + kDescriptorBytes * static_cast<std::uint64_t>(regions) > total) {
    throw PlaneError(PlaneErrc::kBadHeader, "plane '" + name_ + "': inconsistent header");
  }
  for (std::uint32_t i = 0; i < regions; ++i) {
    const std::uint8_t* d = descriptor_ptr(i);
    const auto type = load_plain<std::uint32_t>(d + kOffDataType);
    const auto slots = load_plain<std::uint32_t>(d + kOffSlots);
    const auto payload = load_plain<std::uint64_t>(d + kOffSlotPayload);
    const auto ping = load_plain<std::uint64_t>(d + kOffPing);
    const auto pong = load_plain<std::uint64_t>(d + kOffPong);
    const auto stride = load_plain<std::uint64_t>(d + kOffStride);
    const std::uint64_t span = stride * slots;
    const bool ok = is_valid_data_type(type) && slots >= 2 && stride >= kSlotHeaderBytes + payload &&
                    stride % 64 == 0 && ping % 64 == 0 && pong % 64 == 0 && ping + span <= total &&
                    pong + span <= total && (ping + span <= pong || pong + span <= ping);
    if (!ok) {
      throw PlaneError(PlaneErrc::kBadHeader, "plane '" + name_ + "': descriptor " + std::to_string(i) + " invalid");
    }
  }
}

ShmHeader TelemetryPlane::header() const {
  ShmHeader h;
  h.version = load_plain<std::uint32_t>(base_ + kOffVersion);
  h.region_count = load_plain<std::uint32_t>(base_ + kOffRegionCount);
  h.tti_period_ns = load_plain<std::uint64_t>(base_ + kOffTtiPeriod);
  h.total_bytes = load_plain<std::uint64_t>(base_ + kOffTotalBytes);
  return h;
}

std::uint8_t* TelemetryPlane::descriptor_ptr(std::size_t index) const {
  return base_ + kHeaderBytes + index * kDescriptorBytes;
}

std::vector<RegionDescriptor> TelemetryPlane::descriptors() const {
  std::vector<RegionDescriptor> out;
  const auto n = load_plain<std::uint32_t>(base_ + kOffRegionCount);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t* d = descriptor_ptr(i);
    RegionDescriptor r;
    r.data_type = static_cast<DataType>(load_plain<std::uint32_t>(d + kOffDataType));
    r.slots_per_buffer = load_plain<std::uint32_t>(d + kOffSlots);
    r.slot_payload_bytes = load_plain<std::uint64_t>(d + kOffSlotPayload);
    r.ping_offset = load_plain<std::uint64_t>(d + kOffPing);
    r.pong_offset = load_plain<std::uint64_t>(d + kOffPong);
    r.slot_stride = load_plain<std::uint64_t>(d + kOffStride);
    out.push_back(r);
  }
  return out;
}

std::vector<std::uint8_t> TelemetryPlane::layout_bytes() const {
  std::vector<std::uint8_t> out(base_, base_ + kHeaderStaticBytes);
  const auto n = load_plain<std::uint32_t>(base_ + kOffRegionCount);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t* d = descriptor_ptr(i);
    out.insert(out.end(), d, d + kDescriptorStaticBytes);
  }
  return out;
}

std::size_t TelemetryPlane::region_index(DataType type) const {
  const auto n = load_plain<std::uint32_t>(base_ + kOffRegionCount);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (load_plain<std::uint32_t>(descriptor_ptr(i) + kOffDataType) == static_cast<std::uint32_t>(type)) return i;
  }
  throw PlaneError(PlaneErrc::kUnknownRegion, "plane '" + name_ + "' has no " + std::string(to_string(type)) + " region");
}

std::optional<RegionDescriptor> TelemetryPlane::find_region(DataType type) const {
  for (const auto& d : descriptors()) {
    if (d.data_type == type) return d;
  }
  return std::nullopt;
}

RegionDescriptor TelemetryPlane::region(DataType type) const { return descriptors().at(region_index(type)); }

PingPongState TelemetryPlane::state(DataType type) const {
  const std::uint8_t* d = descriptor_ptr(region_index(type));
  PingPongState s;
  s.active_buffer = atomic_at<std::uint32_t>(d, kOffActive).load(std::memory_order_acquire);
  s.write_slot_index = atomic_at<std::uint32_t>(d, kOffWriteIndex).load(std::memory_order_acquire);
  s.swap_generation = atomic_at<std::uint64_t>(d, kOffSwapGen).load(std::memory_order_acquire);
  s.write_count = atomic_at<std::uint64_t>(d, kOffWriteCount).load(std::memory_order_acquire);
  return s;
}

std::uint8_t* TelemetryPlane::slot_ptr(std::size_t region, std::uint32_t buffer, std::uint32_t offset) const {
  const std::uint8_t* d = descriptor_ptr(region);
  const auto base_off = load_plain<std::uint64_t>(d + (buffer == 0 ? kOffPing : kOffPong));
  const auto stride = load_plain<std::uint64_t>(d + kOffStride);
  return base_ + base_off + stride * offset;
}

void TelemetryPlane::check_lease() const {
  if (lease_token_ == 0) throw PlaneError(PlaneErrc::kNotWriter, "plane handle is read-only");
  const auto current = atomic_at<std::uint64_t>(base_, kOffLease).load(std::memory_order_acquire);
  if (current != lease_token_) {
    throw PlaneError(PlaneErrc::kLeaseLost, "writer lease for '" + name_ + "' is held by another writer");
  }
}

SlotRef TelemetryPlane::write_slot(DataType type, std::uint64_t tti, std::span<const std::uint8_t> payload) {
  check_lease();
  const std::size_t ri = region_index(type);
  std::uint8_t* d = descriptor_ptr(ri);
  const auto slots = load_plain<std::uint32_t>(d + kOffSlots);
  const auto cap = load_plain<std::uint64_t>(d + kOffSlotPayload);
  if (payload.size() > cap) {
    throw PlaneError(PlaneErrc::kPayloadTooLarge, "payload of " + std::to_string(payload.size()) +
                                                      " bytes exceeds slot capacity " + std::to_string(cap));
  }

  const std::uint64_t k = write_counts_[ri];
  const std::uint32_t buffer = buffer_index_for_write(k, slots);
  const std::uint32_t offset = slot_offset_for_write(k, slots);
  std::uint8_t* slot = slot_ptr(ri, buffer, offset);

  const std::uint64_t t_ready = monotonic_ns();
  auto seq = atomic_at<std::uint64_t>(slot, kOffSeq);
  const std::uint64_t s = seq.load(std::memory_order_relaxed);
  seq.store(s + 1, std::memory_order_relaxed);
  std::atomic_thread_fence(std::memory_order_release);
  store_plain<std::uint64_t>(slot + kOffTti, tti);
  store_plain<std::uint32_t>(slot + kOffLen, static_cast<std::uint32_t>(payload.size()));
  store_plain<std::uint64_t>(slot + kOffReady, t_ready);
  if (!payload.empty()) std::memcpy(slot + kSlotHeaderBytes, payload.data(), payload.size());
  store_plain<std::uint64_t>(slot + kOffPublish, monotonic_ns());
  seq.store(s + 2, std::memory_order_release);

  // Advance the ping-pong state; swap when the active buffer fills up.
  const std::uint64_t next = k + 1;
  write_counts_[ri] = next;
  atomic_at<std::uint32_t>(d, kOffWriteIndex).store(slot_offset_for_write(next, slots), std::memory_order_release);
  if (next % slots == 0) {
    atomic_at<std::uint32_t>(d, kOffActive).store(buffer_index_for_write(next, slots), std::memory_order_release);
    atomic_at<std::uint64_t>(d, kOffSwapGen).store(next / slots, std::memory_order_release);
  }
  atomic_at<std::uint64_t>(d, kOffWriteCount).store(next, std::memory_order_release);

  auto bell = atomic_at<std::uint32_t>(base_, kOffDoorbell);
  bell.fetch_add(1, std::memory_order_acq_rel);
  futex(reinterpret_cast<std::uint32_t*>(base_ + kOffDoorbell), FUTEX_WAKE, INT_MAX, nullptr);

  return SlotRef{type, buffer, offset, payload.size(), s + 2};
}

ReadStatus TelemetryPlane::read_meta(const SlotRef& ref, SlotMeta& out) const {
  const std::size_t ri = region_index(ref.data_type);
  const std::uint8_t* d = descriptor_ptr(ri);
  const auto slots = load_plain<std::uint32_t>(d + kOffSlots);
  if (ref.buffer_index > 1 || ref.slot_offset_ttis >= slots) {
    throw PlaneError(PlaneErrc::kOutOfBounds, "slot ref out of bounds (buffer " + std::to_string(ref.buffer_index) +
                                                  ", offset " + std::to_string(ref.slot_offset_ttis) + ")");
  }
  const std::uint8_t* slot = slot_ptr(ri, ref.buffer_index, ref.slot_offset_ttis);
  auto seq = atomic_at<std::uint64_t>(slot, kOffSeq);
  const std::uint64_t s1 = seq.load(std::memory_order_acquire);
  if (s1 == 0) return ReadStatus::kEmpty;
  if ((s1 & 1u) || (ref.seq != 0 && s1 != ref.seq)) return ReadStatus::kStale;
  SlotMeta m;
  m.seq = s1;
  m.tti = load_plain<std::uint64_t>(slot + kOffTti);
  m.payload_len = load_plain<std::uint32_t>(slot + kOffLen);
  m.t_ready_ns = load_plain<std::uint64_t>(slot + kOffReady);
  m.t_publish_ns = load_plain<std::uint64_t>(slot + kOffPublish);
  std::atomic_thread_fence(std::memory_order_acquire);
  if (seq.load(std::memory_order_relaxed) != s1) return ReadStatus::kStale;
  out = m;
  return ReadStatus::kOk;
}

ReadStatus TelemetryPlane::read_slot(const SlotRef& ref, SlotSnapshot& out) const {
  const std::size_t ri = region_index(ref.data_type);
  const std::uint8_t* d = descriptor_ptr(ri);
  const auto slots = load_plain<std::uint32_t>(d + kOffSlots);
  const auto cap = load_plain<std::uint64_t>(d + kOffSlotPayload);
  if (ref.buffer_index > 1 || ref.slot_offset_ttis >= slots) {
    throw PlaneError(PlaneErrc::kOutOfBounds, "slot ref out of bounds (buffer " + std::to_string(ref.buffer_index) +
                                                  ", offset " + std::to_string(ref.slot_offset_ttis) + ")");
  }
  const std::uint8_t* slot = slot_ptr(ri, ref.buffer_index, ref.slot_offset_ttis);
  auto seq = atomic_at<std::uint64_t>(slot, kOffSeq);
  const std::uint64_t s1 = seq.load(std::memory_order_acquire);
  if (s1 == 0) return ReadStatus::kEmpty;
  if ((s1 & 1u) || (ref.seq != 0 && s1 != ref.seq)) return ReadStatus::kStale;
  SlotMeta m;
  m.seq = s1;
  m.tti = load_plain<std::uint64_t>(slot + kOffTti);
  m.payload_len = load_plain<std::uint32_t>(slot + kOffLen);
  m.t_ready_ns = load_plain<std::uint64_t>(slot + kOffReady);
  m.t_publish_ns = load_plain<std::uint64_t>(slot + kOffPublish);
  if (m.payload_len > cap) return ReadStatus::kStale;  // torn length
  out.payload.resize(m.payload_len);
  if (m.payload_len) std::memcpy(out.payload.data(), slot + kSlotHeaderBytes, m.payload_len);
  std::atomic_thread_fence(std::memory_order_acquire);
  if (seq.load(std::memory_order_relaxed) != s1) return ReadStatus::kStale;
  out.meta = m;
  return ReadStatus::kOk;
}

SlotRef TelemetryPlane::ref_for_write(DataType type, std::uint64_t k) const {
  const std::uint8_t* d = descriptor_ptr(region_index(type));
  const auto slots = load_plain<std::uint32_t>(d + kOffSlots);
  return SlotRef{type, buffer_index_for_write(k, slots), slot_offset_for_write(k, slots), 0,
                 seq_for_write(k, slots)};
}

std::optional<SlotRef> TelemetryPlane::latest(DataType type) const {
  const auto s = state(type);
  if (s.write_count == 0) return std::nullopt;
  return ref_for_write(type, s.write_count - 1);
}

std::uint32_t TelemetryPlane::doorbell() const noexcept {
  return atomic_at<std::uint32_t>(base_, kOffDoorbell).load(std::memory_order_acquire);
}

bool TelemetryPlane::wait_doorbell(std::uint32_t seen, std::chrono::nanoseconds timeout) const {
  if (doorbell() != seen) return true;
  timespec ts{};
  ts.tv_sec = static_cast<time_t>(timeout.count() / 1'000'000'000);
  ts.tv_nsec = static_cast<long>(timeout.count() % 1'000'000'000);
  futex(reinterpret_cast<const std::uint32_t*>(base_ + kOffDoorbell), FUTEX_WAIT, seen, &ts);
  return doorbell() != seen;
}

}  // namespace cusense::telemetry
