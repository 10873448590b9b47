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

#include "cusense/labeling/dataset.hpp"

#include <iomanip>
#include <ostream>

#include "cusense/common/byte_io.hpp"

namespace cusense::labeling {
namespace {

constexpr std::uint32_t kFlagCsi = 1;

void check_record(const DatasetHeader& h, const DatasetRecord& r) {
  const Shape feat{h.antennas, h.bins.size()};
  if (r.features.shape() != feat) {
    throw LabelingError("record features " + shape_to_string(r.features.shape()) + " do not match " +
                        shape_to_string(feat));
  }
  if (h.has_csi) {
    const Shape csi{h.antennas, h.bins.size(), h.symbols};
    if (r.csi.shape() != csi) {
      throw LabelingError("record csi " + shape_to_string(r.csi.shape()) + " does not match " + shape_to_string(csi));
    }
  }
  if (r.cell.i >= h.grid.H || r.cell.j >= h.grid.W) throw LabelingError("record cell outside the grid");
}

std::vector<std::uint8_t> header_bytes(const DatasetHeader& h) {
  ByteWriter w;
  w.put_bytes(kDatasetMagic, 8);
  w.put(h.antennas);
  w.put(static_cast<std::uint32_t>(h.bins.size()));
  w.put(h.symbols);
  w.put(static_cast<std::uint32_t>(h.grid.H));
  w.put(static_cast<std::uint32_t>(h.grid.W));
  w.put(h.has_csi ? kFlagCsi : 0u);
  w.put(h.grid.width_m);
  w.put(h.grid.depth_m);
  w.put(h.norm.mu);
  w.put(h.norm.sigma);
  w.put(h.norm.eps);
  for (auto b : h.bins) w.put(b);
  return w.take();
}

void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) throw LabelingError(std::string("dataset truncated in ") + what);
}

template <class T>
T read_scalar(std::istream& in, const char* what) {
  T v{};
  read_exact(in, &v, sizeof(T), what);
  return v;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::string& path, DatasetHeader header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(std::move(header)) {
  if (!out_) throw LabelingError("cannot create " + path);
  header_.grid.validate();
  const auto bytes = header_bytes(header_);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  count_pos_ = out_.tellp();
  const std::uint64_t zero = 0;
  out_.write(reinterpret_cast<const char*>(&zero), sizeof zero);
}

DatasetWriter::~DatasetWriter() {
  try {
    close();
  } catch (...) {
  }
}

void DatasetWriter::write(const DatasetRecord& r) {
  if (closed_) throw LabelingError("dataset writer is closed");
  check_record(header_, r);
  ByteWriter w;
  w.put(r.tti);
  w.put(r.timestamp_ns);
  w.put(r.pos.x);
  w.put(r.pos.y);
  w.put(static_cast<std::uint32_t>(r.cell.i));
  w.put(static_cast<std::uint32_t>(r.cell.j));
  w.put(static_cast<std::uint8_t>(r.split));
  for (double v : r.features.values()) w.put(static_cast<float>(v));
  if (header_.has_csi) {
    for (const auto& c : r.csi.values()) {
      w.put(static_cast<float>(c.real()));
      w.put(static_cast<float>(c.imag()));
    }
  }
  const auto& b = w.buffer();
  out_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out_) throw LabelingError("dataset write failed");
  ++count_;
}

void DatasetWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.seekp(count_pos_);
  out_.write(reinterpret_cast<const char*>(&count_), sizeof count_);
  out_.close();
  if (!out_) throw LabelingError("dataset close failed");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LabelingError("cannot open " + path);
  char magic[8];
  read_exact(in, magic, 8, "magic");
  if (std::string_view(magic, 8) != std::string_view(kDatasetMagic, 8)) throw LabelingError("not a dataset file");
  Dataset d;
  auto& h = d.header;
  h.antennas = read_scalar<std::uint32_t>(in, "header");
  const auto kv = read_scalar<std::uint32_t>(in, "header");
  h.symbols = read_scalar<std::uint32_t>(in, "header");
  h.grid.H = read_scalar<std::uint32_t>(in, "header");
  h.grid.W = read_scalar<std::uint32_t>(in, "header");
  h.has_csi = (read_scalar<std::uint32_t>(in, "header") & kFlagCsi) != 0;
  h.grid.width_m = read_scalar<double>(in, "header");
  h.grid.depth_m = read_scalar<double>(in, "header");
  h.norm.mu = read_scalar<double>(in, "header");
  h.norm.sigma = read_scalar<double>(in, "header");
  h.norm.eps = read_scalar<double>(in, "header");
  h.bins.resize(kv);
  read_exact(in, h.bins.data(), kv * sizeof(std::uint32_t), "bins");
  h.grid.validate();
  const auto count = read_scalar<std::uint64_t>(in, "count");

  const std::size_t nf = h.feature_count();
  const std::size_t nc = h.has_csi ? nf * h.symbols : 0;
  std::vector<float> fbuf(nf), cbuf(2 * nc);
  for (std::uint64_t n = 0; n < count; ++n) {
    DatasetRecord r;
    r.tti = read_scalar<std::uint64_t>(in, "record");
    r.timestamp_ns = read_scalar<std::uint64_t>(in, "record");
    r.pos.x = read_scalar<double>(in, "record");
    r.pos.y = read_scalar<double>(in, "record");
    r.cell.i = read_scalar<std::uint32_t>(in, "record");
    r.cell.j = read_scalar<std::uint32_t>(in, "record");
    const auto split = read_scalar<std::uint8_t>(in, "record");
    if (split > static_cast<std::uint8_t>(Split::kUnseen)) throw LabelingError("invalid split tag");
    r.split = static_cast<Split>(split);
    read_exact(in, fbuf.data(), nf * sizeof(float), "features");
    r.features = RealTensor({h.antennas, kv}, std::vector<double>(fbuf.begin(), fbuf.end()));
    if (h.has_csi) {
      read_exact(in, cbuf.data(), cbuf.size() * sizeof(float), "csi");
      r.csi = ComplexTensor({h.antennas, kv, h.symbols});
      for (std::size_t i = 0; i < nc; ++i) r.csi[i] = {cbuf[2 * i], cbuf[2 * i + 1]};
    }
    check_record(h, r);
    d.records.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LabelingError("trailing bytes after the last record");
  return d;
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  DatasetWriter w(path, dataset.header);
  for (const auto& r : dataset.records) w.write(r);
  w.close();
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  const auto& h = d.header;
  out << "# cusense-dataset v1\n";
  out << "# antennas=" << h.antennas << " valid_bins=" << h.bins.size() << " grid_h=" << h.grid.H
      << " grid_w=" << h.grid.W << std::setprecision(17) << " width_m=" << h.grid.width_m
      << " depth_m=" << h.grid.depth_m << " mu=" << h.norm.mu << " sigma=" << h.norm.sigma << " eps=" << h.norm.eps
      << '\n';
  out << "tti,timestamp_ns,x_m,y_m,cell_i,cell_j,split";
  for (std::size_t f = 0; f < h.feature_count(); ++f) out << ",f" << f;
  out << '\n';
  out << std::setprecision(9);
  for (const auto& r : d.records) {
    out << r.tti << ',' << r.timestamp_ns << ',' << r.pos.x << ',' << r.pos.y << ',' << r.cell.i << ',' << r.cell.j
        << ',' << to_string(r.split);
    for (double v : r.features.values()) out << ',' << static_cast<float>(v);
    out << '\n';
  }
}

}  // namespace cusense::labeling
