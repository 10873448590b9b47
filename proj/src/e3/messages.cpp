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

#include "cusense/e3/messages.hpp"

#include <cstring>

#include "cusense/common/byte_io.hpp"

namespace cusense::e3 {
namespace {

constexpr std::uint8_t kHasSlotRef = 0x01;
constexpr std::uint8_t kHasInline = 0x02;

void require(bool ok, const std::string& what) {
  if (!ok) throw CodecError(CodecErrc::kInvalidField, what);
}

Status parse_status(std::uint8_t raw) {
  require(raw <= static_cast<std::uint8_t>(Status::kError), "invalid status " + std::to_string(raw));
  return static_cast<Status>(raw);
}

DataType parse_type(std::uint8_t raw) {
  require(is_valid_data_type(raw), "invalid data_type " + std::to_string(raw));
  return static_cast<DataType>(raw);
}

struct BodyWriter {
  ByteWriter& w;

  void operator()(const SetupRequest& m) { w.put(m.manager_id); }
  void operator()(const SetupResponse& m) {
    require(m.functions.size() <= 0xffff, "too many functions");
    w.put(m.agent_id);
    w.put(static_cast<std::uint16_t>(m.functions.size()));
    for (const auto& f : m.functions) {
      require(f.name.size() <= kMaxNameLength, "function name exceeds 255 bytes");
      w.put(f.id);
      w.put(static_cast<std::uint8_t>(f.name.size()));
      w.put_bytes(f.name.data(), f.name.size());
    }
  }
  void operator()(const SubscriptionRequest& m) {
    require(m.period_ttis >= 1, "period_ttis must be >= 1");
    w.put(m.sub_id);
    w.put(static_cast<std::uint8_t>(m.data_type));
    w.put(m.period_ttis);
    w.put(m.duration_ttis);
  }
  void operator()(const SubscriptionResponse& m) {
    w.put(m.sub_id);
    w.put(static_cast<std::uint8_t>(m.status));
  }
  void operator()(const Indication& m) {
    require(m.slot_ref.has_value() || m.inline_payload.has_value(),
            "indication needs a slot_ref or an inline payload");
    w.put(m.sub_id);
    w.put(m.tti);
    w.put(m.agent_tx_ns);
    std::uint8_t flags = 0;
    if (m.slot_ref) flags |= kHasSlotRef;
    if (m.inline_payload) flags |= kHasInline;
    w.put(flags);
    if (m.slot_ref) {
      const auto& r = *m.slot_ref;
      require(r.buffer_index <= 1, "buffer_index must be 0 or 1");
      w.put(static_cast<std::uint8_t>(r.data_type));
      w.put(static_cast<std::uint8_t>(r.buffer_index));
      w.put(r.slot_offset_ttis);
      w.put(r.payload_bytes);
      w.put(r.seq);
    }
    if (m.inline_payload) {
      w.put(static_cast<std::uint32_t>(m.inline_payload->size()));
      w.put_bytes(*m.inline_payload);
    }
  }
  void operator()(const ControlRequest& m) {
    w.put(m.ctrl_id);
    w.put(m.action_code);
    w.put(static_cast<std::uint32_t>(m.payload.size()));
    w.put_bytes(m.payload);
  }
  void operator()(const ControlAck& m) {
    w.put(m.ctrl_id);
    w.put(static_cast<std::uint8_t>(m.status));
  }
};

E3Message parse_body(MsgType type, ByteReader& r) {
  switch (type) {
    case MsgType::kSetupRequest: return SetupRequest{r.get<std::uint32_t>()};
    case MsgType::kSetupResponse: {
      SetupResponse m;
      m.agent_id = r.get<std::uint32_t>();
      const auto n = r.get<std::uint16_t>();
      for (std::uint16_t i = 0; i < n; ++i) {
        RanFunction f;
        f.id = r.get<std::uint32_t>();
        f.name = r.get_string(r.get<std::uint8_t>());
        m.functions.push_back(std::move(f));
      }
      return m;
    }
    case MsgType::kSubscriptionRequest: {
      SubscriptionRequest m;
      m.sub_id = r.get<std::uint32_t>();
      m.data_type = parse_type(r.get<std::uint8_t>());
      m.period_ttis = r.get<std::uint32_t>();
      m.duration_ttis = r.get<std::uint32_t>();
      require(m.period_ttis >= 1, "period_ttis must be >= 1");
      return m;
    }
    case MsgType::kSubscriptionResponse: {
      SubscriptionResponse m;
      m.sub_id = r.get<std::uint32_t>();
      m.status = parse_status(r.get<std::uint8_t>());
      return m;
    }
    case MsgType::kIndication: {
      Indication m;
      m.sub_id = r.get<std::uint32_t>();
      m.tti = r.get<std::uint64_t>();
      m.agent_tx_ns = r.get<std::uint64_t>();
      const auto flags = r.get<std::uint8_t>();
      require(flags != 0 && (flags & ~(kHasSlotRef | kHasInline)) == 0,
              "invalid indication flags " + std::to_string(flags));
      if (flags & kHasSlotRef) {
        telemetry::SlotRef ref;
        ref.data_type = parse_type(r.get<std::uint8_t>());
        ref.buffer_index = r.get<std::uint8_t>();
        require(ref.buffer_index <= 1, "buffer_index must be 0 or 1");
        ref.slot_offset_ttis = r.get<std::uint32_t>();
        ref.payload_bytes = r.get<std::uint64_t>();
        ref.seq = r.get<std::uint64_t>();
        m.slot_ref = ref;
      }
      if (flags & kHasInline) {
        const auto n = r.get<std::uint32_t>();
        auto raw = r.get_bytes(n);
        m.inline_payload = std::vector<std::uint8_t>(raw.begin(), raw.end());
      }
      return m;
    }
    case MsgType::kControlRequest: {
      ControlRequest m;
      m.ctrl_id = r.get<std::uint32_t>();
      m.action_code = r.get<std::uint16_t>();
      const auto n = r.get<std::uint32_t>();
      auto raw = r.get_bytes(n);
      m.payload.assign(raw.begin(), raw.end());
      return m;
    }
    case MsgType::kControlAck: {
      ControlAck m;
      m.ctrl_id = r.get<std::uint32_t>();
      m.status = parse_status(r.get<std::uint8_t>());
      return m;
    }
  }
  throw CodecError(CodecErrc::kUnknownType, "unknown msg_type");
}

bool known_type(std::uint8_t raw) { return raw >= 0x01 && raw <= 0x07; }

}  // namespace

MsgType message_type(const E3Message& msg) noexcept {
  return static_cast<MsgType>(msg.index() + 1);
}

void encode_into(const E3Message& msg, std::vector<std::uint8_t>& out) {
  const std::size_t start = out.size();
  ByteWriter w(out);
  w.put<std::uint32_t>(0);
  w.put(static_cast<std::uint8_t>(message_type(msg)));
  try {
    std::visit(BodyWriter{w}, msg);
  } catch (...) {
    out.resize(start);
    throw;
  }
  const std::size_t length = out.size() - start - 4;
  if (length > kMaxFrameLength) {
    out.resize(start);
    throw CodecError(CodecErrc::kTooLarge, "frame length " + std::to_string(length) + " exceeds 16 MiB");
  }
  w.patch<std::uint32_t>(start, static_cast<std::uint32_t>(length));
}

std::vector<std::uint8_t> encode(const E3Message& msg) {
  std::vector<std::uint8_t> out;
  encode_into(msg, out);
  return out;
}

E3Message decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < 5) throw CodecError(CodecErrc::kTruncated, "frame shorter than 5 bytes");
  std::uint32_t length = 0;
  std::memcpy(&length, frame.data(), 4);
  if (length > kMaxFrameLength) throw CodecError(CodecErrc::kTooLarge, "declared length exceeds 16 MiB");
  if (length == 0) throw CodecError(CodecErrc::kLengthMismatch, "zero-length frame");
  if (length > frame.size() - 4) {
    throw CodecError(CodecErrc::kTruncated, "declared length " + std::to_string(length) + " exceeds the " +
                                                std::to_string(frame.size() - 4) + " available bytes");
  }
  if (length < frame.size() - 4) {
    throw CodecError(CodecErrc::kTrailingBytes, std::to_string(frame.size() - 4 - length) + " trailing bytes");
  }
  const std::uint8_t raw_type = frame[4];
  if (!known_type(raw_type)) throw CodecError(CodecErrc::kUnknownType, "unknown msg_type " + std::to_string(raw_type));
  ByteReader r(frame.subspan(5, length - 1));
  E3Message msg;
  try {
    msg = parse_body(static_cast<MsgType>(raw_type), r);
  } catch (const TruncatedInput& e) {
    throw CodecError(CodecErrc::kLengthMismatch, std::string("body shorter than its fields: ") + e.what());
  }
  if (!r.at_end()) {
    throw CodecError(CodecErrc::kLengthMismatch, std::to_string(r.remaining()) + " unparsed body bytes");
  }
  return msg;
}

void FrameAssembler::feed(std::span<const std::uint8_t> bytes) {
  if (start_ > 0 && start_ == buf_.size()) {
    buf_.clear();
    start_ = 0;
  } else if (start_ > (1u << 20)) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(start_));
    start_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<E3Message> FrameAssembler::next() {
  const std::size_t avail = buf_.size() - start_;
  if (avail < 4) return std::nullopt;
  std::uint32_t length = 0;
  std::memcpy(&length, buf_.data() + start_, 4);
  if (length > kMaxFrameLength) throw CodecError(CodecErrc::kTooLarge, "declared length exceeds 16 MiB");
  if (avail < 4ull + length) return std::nullopt;
  auto frame = std::span<const std::uint8_t>(buf_.data() + start_, 4ull + length);
  start_ += 4ull + length;
  return decode(frame);
}

}  // namespace cusense::e3
