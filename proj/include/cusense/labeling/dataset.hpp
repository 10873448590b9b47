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
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "cusense/common/tensor.hpp"
#include "cusense/labeling/labeling.hpp"
#include "cusense/sensing/pipeline.hpp"
#include "cusense/tracking/tracking.hpp"

namespace cusense::labeling {

inline constexpr char kDatasetMagic[8] = {'C', 'U', 'S', 'D', '0', '0', '0', '1'};

struct DatasetHeader {
  std::uint32_t antennas{4};
  std::uint32_t symbols{3};
  std::vector<std::uint32_t> bins;  // valid subcarrier indices; K_v = bins.size()
  tracking::GridGeometry grid;
  sensing::NormStats norm;  // computed on the train split
  bool has_csi{false};

  std::size_t valid_bins() const noexcept { return bins.size(); }
  std::size_t feature_count() const noexcept { return antennas * bins.size(); }
};

struct DatasetRecord {
  std::uint64_t tti{0};
  std::uint64_t timestamp_ns{0};
  ComplexTensor csi;   // [A, K_v, S]; empty unless the header says has_csi
  RealTensor features; // [A, K_v], background-subtracted, before z-score
  Position pos;
  tracking::Cell cell;
  Split split{Split::kTrain};
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

// Streams records to the binary file; the count is patched in on close().
class DatasetWriter {
 public:
  DatasetWriter(const std::string& path, DatasetHeader header);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void write(const DatasetRecord& record);
  void close();
  std::uint64_t count() const noexcept { return count_; }

 private:
  std::ofstream out_;
  DatasetHeader header_;
  std::uint64_t count_{0};
  std::streampos count_pos_{};
  bool closed_{false};
};

Dataset read_dataset(const std::string& path);
void write_dataset(const std::string& path, const Dataset& dataset);

// CSV for the trainer: '#' header lines carry dims and norm stats, then
// tti,timestamp_ns,x_m,y_m,cell_i,cell_j,split,f0..f{A*K_v-1} (features row-major).
void write_dataset_csv(std::ostream& out, const Dataset& dataset);

}  // namespace cusense::labeling
