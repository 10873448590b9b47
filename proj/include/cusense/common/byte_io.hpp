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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace cusense {

static_assert(std::endian::native == std::endian::little,
              "on-wire and shared-memory layouts assume a little-endian host");

// Thrown by ByteReader when a read would run past the end of its buffer.
class TruncatedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Appends little-endian scalars to a growable buffer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::vector<std::uint8_t>& sink) : out_(&sink) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buffer().insert(buffer().end(), raw, raw + sizeof(T));
  }

  void put_bytes(std::span<const std::uint8_t> bytes) {
    buffer().insert(buffer().end(), bytes.begin(), bytes.end());
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer().insert(buffer().end(), p, p + n);
  }

  std::size_t size() const { return out_ ? out_->size() : own_.size(); }
  std::vector<std::uint8_t>& buffer() { return out_ ? *out_ : own_; }
  std::vector<std::uint8_t> take() { return std::move(buffer()); }

  // Overwrites an already-written scalar (used to back-patch length fields).
  template <class T>
    requires std::is_arithmetic_v<T>
  void patch(std::size_t offset, T value) {
    std::memcpy(buffer().data() + offset, &value, sizeof(T));
  }

 private:
  std::vector<std::uint8_t>* out_{nullptr};
  std::vector<std::uint8_t> own_;
};

// Bounds-checked little-endian cursor over a byte span.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    require(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::string get_string(std::size_t n) {
    auto raw = get_bytes(n);
    return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(std::size_t n) const {
    if (n > bytes_.size() - pos_) {
      throw TruncatedInput("need " + std::to_string(n) + " bytes at offset " +
                           std::to_string(pos_) + ", have " +
                           std::to_string(bytes_.size() - pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_{0};
};

}  // namespace cusense
