// Copyright 2026 The tfalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tfalign/chunk.hpp"
#include "tfalign/errors.hpp"
#include "tfalign/wire.hpp"

// TF output file, one per recorded stream:
//
//   4     magic "TFRS"
//   2     version (1)
//   4     header length H
//   H     header: u16 len + producer, u16 len + representation,
//         u8 dtype (1 = float32), u8 rank, u32 channels, f64 sample rate,
//         u32 n + f64 x n channel center frequencies
//   ...   one wire frame per chunk, in publish order

namespace tfalign {

inline constexpr std::uint8_t kTfMagic[4] = {'T', 'F', 'R', 'S'};
inline constexpr std::uint16_t kTfVersion = 1;

struct TfFileHeader {
  SourceKey key;
  bool series = false;
  std::uint32_t channels = 0;
  double sample_rate = 0.0;
  std::vector<double> channel_freqs;
};

struct TfFile {
  TfFileHeader header;
  std::vector<DataChunk> records;
};

class TfWriter {
 public:
  TfWriter(const std::filesystem::path& path, const TfFileHeader& header)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot create " + path.string());
    wire::Bytes body;
    wire::detail::Writer w(body);
    w.put_string(header.key.producer);
    w.put_string(header.key.representation);
    w.put(wire::kDtypeFloat32);
    w.put(static_cast<std::uint8_t>(header.series ? 1 : 2));
    w.put(header.channels);
    w.put_f64(header.sample_rate);
    w.put(static_cast<std::uint32_t>(header.channel_freqs.size()));
    for (double f : header.channel_freqs) w.put_f64(f);

    wire::Bytes pre(std::begin(kTfMagic), std::end(kTfMagic));
    wire::detail::Writer pw(pre);
    pw.put(kTfVersion);
    pw.put(static_cast<std::uint32_t>(body.size()));
    write(pre);
    write(body);
  }

  void append(const DataChunk& chunk) {
    write(wire::encode(chunk));
    ++records_;
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("failed writing " + path_.string());
    out_.close();
  }

  std::uint64_t records() const { return records_; }

 private:
  void write(const wire::Bytes& bytes) {
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out_) throw IoError("failed writing " + path_.string());
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t records_ = 0;
};

inline TfFile read_tf_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const wire::Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::span<const std::uint8_t> all(bytes);
  if (all.size() < 10 || std::memcmp(all.data(), kTfMagic, 4) != 0) {
    throw FrameError(path.string() + " is not a TF file");
  }
  wire::detail::Reader pre(all.subspan(4, 6));
  const auto version = pre.get<std::uint16_t>();
  if (version != kTfVersion) throw VersionError(path.string() + " has TF file version " + std::to_string(version));
  const auto header_len = pre.get<std::uint32_t>();
  if (all.size() < 10 + static_cast<std::size_t>(header_len)) throw TruncatedFrameError(path.string() + " header truncated");

  TfFile file;
  wire::detail::Reader r(all.subspan(10, header_len));
  file.header.key.producer = r.get_string();
  file.header.key.representation = r.get_string();
  if (r.get<std::uint8_t>() != wire::kDtypeFloat32) throw FrameError(path.string() + " has an unknown dtype");
  file.header.series = r.get<std::uint8_t>() == 1;
  file.header.channels = r.get<std::uint32_t>();
  file.header.sample_rate = r.get_f64();
  file.header.channel_freqs.resize(r.get<std::uint32_t>());
  for (auto& f : file.header.channel_freqs) f = r.get_f64();

  std::size_t pos = 10 + header_len;
  while (pos < all.size()) {
    const auto rest = all.subspan(pos);
    const auto size = wire::frame_size(rest);
    if (!size || rest.size() < *size) throw TruncatedFrameError(path.string() + " ends inside a record");
    file.records.push_back(wire::decode(rest.first(*size)));
    pos += *size;
  }
  return file;
}

// Concatenates the payloads of the records in order, skipping calibration
// chunks.
inline Matrix concatenate_records(const std::vector<DataChunk>& records) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& c : records) {
    if (c.continuity == Continuity::calibration_chunk) continue;
    rows = c.payload.channels();
    cols += c.payload.time_length();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& c : records) {
    if (c.continuity == Continuity::calibration_chunk) continue;
    out.middleCols(at, c.payload.time_length()) = c.payload.values;
    at += c.payload.time_length();
  }
  return out;
}

}  // namespace tfalign
