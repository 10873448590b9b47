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
#include <string_view>

namespace cusense {

// Telemetry categories exported by the RAN node.
enum class DataType : std::uint32_t {
  kIq = 0,
  kHest = 1,
  kMacPdu = 2,
  kFapiMeta = 3,
};

inline constexpr std::uint32_t kDataTypeCount = 4;

inline constexpr std::string_view to_string(DataType t) noexcept {
  switch (t) {
    case DataType::kIq: return "IQ";
    case DataType::kHest: return "HEST";
    case DataType::kMacPdu: return "MAC_PDU";
    case DataType::kFapiMeta: return "FAPI_META";
  }
  return "UNKNOWN";
}

inline constexpr bool is_valid_data_type(std::uint32_t raw) noexcept { return raw < kDataTypeCount; }

inline std::optional<DataType> parse_data_type(std::string_view s) noexcept {
  if (s == "IQ" || s == "iq") return DataType::kIq;
  if (s == "HEST" || s == "hest") return DataType::kHest;
  if (s == "MAC_PDU" || s == "mac_pdu") return DataType::kMacPdu;
  if (s == "FAPI_META" || s == "fapi_meta") return DataType::kFapiMeta;
  return std::nullopt;
}

}  // namespace cusense
