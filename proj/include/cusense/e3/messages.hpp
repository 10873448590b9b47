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
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cusense/common/data_type.hpp"
#include "cusense/telemetry/plane.hpp"

namespace cusense::e3 {

// Frame = u32 length (bytes after the length field) | u8 msg_type | body.
// Body fields are fixed-order little-endian; see docs/e3-wire.md.
inline constexpr std::uint32_t kMaxFrameLength = 16u << 20;
inline constexpr std::size_t kMaxNameLength = 255;

enum class MsgType : std::uint8_t {
  kSetupRequest = 0x01,
  kSetupResponse = 0x02,
  kSubscriptionRequest = 0x03,
  kSubscriptionResponse = 0x04,
  kIndication = 0x05,
  kControlRequest = 0x06,
  kControlAck = 0x07,
};

enum class Status : std::uint8_t { kOk = 0, kRejected = 1, kError = 2 };

// Function ids advertised by agents.
inline constexpr std::uint32_t kDuLowTelemetry = 1;

struct RanFunction {
  std::uint32_t id{0};
  std::string name;
  friend bool operator==(const RanFunction&, const RanFunction&) = default;
};

struct SetupRequest {
  std::uint32_t manager_id{0};
  friend bool operator==(const SetupRequest&, const SetupRequest&) = default;
};

struct SetupResponse {
  std::uint32_t agent_id{0};
  std::vector<RanFunction> functions;
  friend bool operator==(const SetupResponse&, const SetupResponse&) = default;
};

struct SubscriptionRequest {
  std::uint32_t sub_id{0};
  DataType data_type{DataType::kHest};
  std::uint32_t period_ttis{1};
  std::uint32_t duration_ttis{0};  // 0 = unbounded
  friend bool operator==(const SubscriptionRequest&, const SubscriptionRequest&) = default;
};

struct SubscriptionResponse {
  std::uint32_t sub_id{0};
  Status status{Status::kOk};
  friend bool operator==(const SubscriptionResponse&, const SubscriptionResponse&) = default;
};

struct Indication {
  std::uint32_t sub_id{0};
  std::uint64_t tti{0};
  std::uint64_t agent_tx_ns{0};  // agent monotonic clock at send time
  std::optional<telemetry::SlotRef> slot_ref;
  std::optional<std::vector<std::uint8_t>> inline_payload;
  friend bool operator==(const Indication&, const Indication&) = default;
};

struct ControlRequest {
  std::uint32_t ctrl_id{0};
  std::uint16_t action_code{0};
  std::vector<std::uint8_t> payload;
  friend bool operator==(const ControlRequest&, const ControlRequest&) = default;
};

struct ControlAck {
  std::uint32_t ctrl_id{0};
  Status status{Status::kOk};
  friend bool operator==(const ControlAck&, const ControlAck&) = default;
};

using E3Message = std::variant<SetupRequest, SetupResponse, SubscriptionRequest, SubscriptionResponse, Indication,
                               ControlRequest, ControlAck>;

MsgType message_type(const E3Message& msg) noexcept;

enum class CodecErrc {
  kTruncated,
  kUnknownType,
  kLengthMismatch,
  kTrailingBytes,
  kInvalidField,
  kTooLarge,
};

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CodecErrc code() const noexcept { return code_; }

 private:
  CodecErrc code_;
};

std::vector<std::uint8_t> encode(const E3Message& msg);
void encode_into(const E3Message& msg, std::vector<std::uint8_t>& out);  // appends
// Decodes exactly one complete frame; any byte beyond it is an error.
E3Message decode(std::span<const std::uint8_t> frame);

// Splits a byte stream into frames. Feed bytes as they arrive, then drain
// complete frames with next(). A length above kMaxFrameLength throws.
class FrameAssembler {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<E3Message> next();
  std::size_t buffered() const noexcept { return buf_.size() - start_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t start_{0};
};

}  // namespace cusense::e3
