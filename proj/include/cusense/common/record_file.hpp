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
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cusense/common/tensor.hpp"

namespace cusense {

// Container for named, typed tensors. Used by model weights, background
// templates and anything else that persists tensors. Layout in docs/weights.md.
enum class RecordDType : std::uint8_t {
  kF32 = 1,
  kF64 = 2,
  kI64 = 3,
};

std::size_t dtype_size(RecordDType t);
std::string_view to_string(RecordDType t);

class RecordFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorRecord {
  std::string name;
  RecordDType dtype{RecordDType::kF32};
  Shape dims;
  std::vector<std::uint8_t> raw;  // little-endian element bytes

  static TensorRecord from_f32(std::string name, Shape dims, std::span<const float> values);
  static TensorRecord from_f64(std::string name, Shape dims, std::span<const double> values);
  static TensorRecord from_i64(std::string name, Shape dims, std::span<const std::int64_t> values);

  std::vector<float> to_f32() const;
  std::vector<double> to_f64() const;
  std::vector<std::int64_t> to_i64() const;
  std::size_t elements() const { return shape_elements(dims); }
};

struct RecordFile {
  std::string magic;  // exactly 8 bytes
  std::vector<TensorRecord> records;

  const TensorRecord* find(std::string_view name) const;
  // Throws RecordFileError naming the record when it is absent.
  const TensorRecord& require(std::string_view name) const;
};

std::vector<std::uint8_t> encode_record_file(const RecordFile& file);
// Parses a complete image; expected_magic may be empty to accept any tag.
RecordFile decode_record_file(std::span<const std::uint8_t> bytes, std::string_view expected_magic);

void write_record_file(const std::filesystem::path& path, const RecordFile& file);
RecordFile read_record_file(const std::filesystem::path& path, std::string_view expected_magic);

}  // namespace cusense
