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

#include "cusense/common/record_file.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "cusense/common/byte_io.hpp"

namespace cusense {
namespace {

constexpr std::uint32_t kMaxRecords = 1u << 16;
constexpr std::uint8_t kMaxRank = 8;

template <class T>
std::vector<std::uint8_t> to_raw(std::span<const T> values) {
  std::vector<std::uint8_t> raw(values.size_bytes());
  if (!raw.empty()) std::memcpy(raw.data(), values.data(), raw.size());
  return raw;
}

template <class T>
std::vector<T> from_raw(const TensorRecord& r, RecordDType want) {
  if (r.dtype != want) {
    throw RecordFileError("record '" + r.name + "' has dtype " + std::string(to_string(r.dtype)) +
                          ", expected " + std::string(to_string(want)));
  }
  std::vector<T> out(r.raw.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), r.raw.data(), r.raw.size());
  return out;
}

}  // namespace

std::size_t dtype_size(RecordDType t) {
  switch (t) {
    case RecordDType::kF32: return 4;
    case RecordDType::kF64: return 8;
    case RecordDType::kI64: return 8;
  }
  throw RecordFileError("unknown dtype");
}

std::string_view to_string(RecordDType t) {
  switch (t) {
    case RecordDType::kF32: return "f32";
    case RecordDType::kF64: return "f64";
    case RecordDType::kI64: return "i64";
  }
  return "?";
}

TensorRecord TensorRecord::from_f32(std::string name, Shape dims, std::span<const float> values) {
  if (values.size() != shape_elements(dims)) throw RecordFileError("record '" + name + "': size/shape mismatch");
  return {std::move(name), RecordDType::kF32, std::move(dims), to_raw(values)};
}
TensorRecord TensorRecord::from_f64(std::string name, Shape dims, std::span<const double> values) {
  if (values.size() != shape_elements(dims)) throw RecordFileError("record '" + name + "': size/shape mismatch");
  return {std::move(name), RecordDType::kF64, std::move(dims), to_raw(values)};
}
TensorRecord TensorRecord::from_i64(std::string name, Shape dims, std::span<const std::int64_t> values) {
  if (values.size() != shape_elements(dims)) throw RecordFileError("record '" + name + "': size/shape mismatch");
  return {std::move(name), RecordDType::kI64, std::move(dims), to_raw(values)};
}

std::vector<float> TensorRecord::to_f32() const { return from_raw<float>(*this, RecordDType::kF32); }
std::vector<double> TensorRecord::to_f64() const { return from_raw<double>(*this, RecordDType::kF64); }
std::vector<std::int64_t> TensorRecord::to_i64() const {
  return from_raw<std::int64_t>(*this, RecordDType::kI64);
}

const TensorRecord* RecordFile::find(std::string_view name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const TensorRecord& RecordFile::require(std::string_view name) const {
  if (const auto* r = find(name)) return *r;
  throw RecordFileError("missing record '" + std::string(name) + "'");
}

std::vector<std::uint8_t> encode_record_file(const RecordFile& file) {
  if (file.magic.size() != 8) throw RecordFileError("magic must be exactly 8 bytes");
  ByteWriter w;
  w.put_bytes(file.magic.data(), 8);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(file.records.size()));
  for (const auto& r : file.records) {
    if (r.name.size() > 0xffff) throw RecordFileError("record name too long");
    if (r.dims.size() > kMaxRank) throw RecordFileError("record '" + r.name + "': rank too large");
    const std::uint64_t bytes = shape_elements(r.dims) * dtype_size(r.dtype);
    if (bytes != r.raw.size()) throw RecordFileError("record '" + r.name + "': payload/shape mismatch");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.name.size()));
    w.put_bytes(r.name.data(), r.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(r.dtype));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(bytes);
    w.put_bytes(r.raw);
  }
  return w.take();
}

RecordFile decode_record_file(std::span<const std::uint8_t> bytes, std::string_view expected_magic) {
  RecordFile file;
  try {
    ByteReader r(bytes);
    file.magic = r.get_string(8);
    if (!expected_magic.empty() && file.magic != expected_magic) {
      throw RecordFileError("bad magic '" + file.magic + "', expected '" + std::string(expected_magic) + "'");
    }
    const auto count = r.get<std::uint32_t>();
    if (count > kMaxRecords) throw RecordFileError("record count " + std::to_string(count) + " too large");
    file.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      TensorRecord rec;
      const auto name_len = r.get<std::uint16_t>();
      rec.name = r.get_string(name_len);
      const auto dtype = r.get<std::uint8_t>();
      if (dtype < 1 || dtype > 3) {
        throw RecordFileError("record '" + rec.name + "': unknown dtype " + std::to_string(dtype));
      }
      rec.dtype = static_cast<RecordDType>(dtype);
      const auto rank = r.get<std::uint8_t>();
      if (rank > kMaxRank) throw RecordFileError("record '" + rec.name + "': rank too large");
      for (std::uint8_t d = 0; d < rank; ++d) rec.dims.push_back(r.get<std::uint64_t>());
      const auto nbytes = r.get<std::uint64_t>();
      if (nbytes != shape_elements(rec.dims) * dtype_size(rec.dtype)) {
        throw RecordFileError("record '" + rec.name + "': byte count does not match dims");
      }
      if (nbytes > r.remaining()) {
        throw RecordFileError("record '" + rec.name + "': truncated payload");
      }
      auto raw = r.get_bytes(nbytes);
      rec.raw.assign(raw.begin(), raw.end());
      file.records.push_back(std::move(rec));
    }
    if (!r.at_end()) throw RecordFileError(std::to_string(r.remaining()) + " trailing bytes after last record");
  } catch (const TruncatedInput& e) {
    throw RecordFileError(std::string("truncated record file: ") + e.what());
  }
  return file;
}

void write_record_file(const std::filesystem::path& path, const RecordFile& file) {
  const auto bytes = encode_record_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RecordFileError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RecordFileError("write failed for '" + path.string() + "'");
}

RecordFile read_record_file(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RecordFileError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_record_file(bytes, expected_magic);
}

}  // namespace cusense
