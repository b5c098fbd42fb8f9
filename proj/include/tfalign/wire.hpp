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

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "tfalign/chunk.hpp"
#include "tfalign/errors.hpp"

// Frame layout, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "TFAC"
//   4       2     version (1)
//   6       4     header length H
//   10      H     header
//   10+H    P     payload, float32 row-major (channel-major), P = channels*time*4
//   10+H+P  4     CRC-32 (IEEE 802.3, as zlib) over header bytes then payload bytes
//
// Header fields in order:
//   u16 len + bytes   producer
//   u16 len + bytes   representation
//   u64               chunk number
//   i32               continuity code
//   u32 x 4           included_past, dropped_after_discontinuity,
//                     invalid_large_scales, invalid_small_scales
//   u8                dtype tag (1 = float32)
//   u8                rank (1 = time series, 2 = channels x time)
//   u32               channels
//   u32               time steps
//   f64               sample rate
//   u32 + f64 x n     channel center frequencies (n = 0 when absent)

namespace tfalign::wire {

inline constexpr std::uint8_t kMagic[4] = {'T', 'F', 'A', 'C'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kPreambleSize = 10;
inline constexpr std::size_t kChecksumSize = 4;
inline constexpr std::uint32_t kMaxHeaderSize = 1u << 20;
inline constexpr std::uint64_t kMaxPayloadSize = 1ull << 31;

using Bytes = std::vector<std::uint8_t>;

inline std::uint32_t crc32(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b = {}) {
  boost::crc_32_type crc;
  crc.process_bytes(a.data(), a.size());
  crc.process_bytes(b.data(), b.size());
  return crc.checksum();
}

namespace detail {

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_string(const std::string& s) {
    if (s.size() > 0xffff) throw FrameError("string field too long: " + std::to_string(s.size()));
    put(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

 private:
  Bytes& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_string() {
    const auto n = get<std::uint16_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FrameError("malformed frame header");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct Header {
  DataChunk chunk;  // payload not yet filled
  std::uint32_t channels = 0;
  std::uint32_t time = 0;
  int continuity_code = 0;
};

inline Header parse_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Header h;
  DataChunk& c = h.chunk;
  c.source.producer = r.get_string();
  c.source.representation = r.get_string();
  c.number = r.get<std::uint64_t>();
  h.continuity_code = r.get<std::int32_t>();
  c.alignment.included_past = r.get<std::uint32_t>();
  c.alignment.dropped_after_discontinuity = r.get<std::uint32_t>();
  c.alignment.invalid_large_scales = r.get<std::uint32_t>();
  c.alignment.invalid_small_scales = r.get<std::uint32_t>();
  const auto dtype = r.get<std::uint8_t>();
  const auto rank = r.get<std::uint8_t>();
  h.channels = r.get<std::uint32_t>();
  h.time = r.get<std::uint32_t>();
  c.sample_rate = r.get_f64();
  const auto nfreq = r.get<std::uint32_t>();
  if (nfreq > r.remaining() / 8) throw FrameError("malformed frame header");
  c.channel_freqs.resize(nfreq);
  for (auto& f : c.channel_freqs) f = r.get_f64();
  if (r.remaining() != 0) throw FrameError("frame header has trailing bytes");
  if (dtype != kDtypeFloat32) throw FrameError("unsupported dtype tag " + std::to_string(dtype));
  if (rank != 1 && rank != 2) throw FrameError("unsupported rank " + std::to_string(rank));
  c.payload.series = rank == 1;
  return h;
}

}  // namespace detail

inline Bytes encode(const DataChunk& chunk) {
  const Payload& p = chunk.payload;
  Bytes header;
  detail::Writer hw(header);
  hw.put_string(chunk.source.producer);
  hw.put_string(chunk.source.representation);
  hw.put(static_cast<std::uint64_t>(chunk.number));
  hw.put(static_cast<std::int32_t>(code(chunk.continuity)));
  for (std::int64_t v : {chunk.alignment.included_past, chunk.alignment.dropped_after_discontinuity,
                         chunk.alignment.invalid_large_scales,
                         chunk.alignment.invalid_small_scales}) {
    if (v < 0 || v > kMaxCounter) throw FrameError("alignment counter out of range");
    hw.put(static_cast<std::uint32_t>(v));
  }
  hw.put(kDtypeFloat32);
  hw.put(static_cast<std::uint8_t>(p.series ? 1 : 2));
  hw.put(static_cast<std::uint32_t>(p.channels()));
  hw.put(static_cast<std::uint32_t>(p.time_length()));
  hw.put_f64(chunk.sample_rate);
  hw.put(static_cast<std::uint32_t>(chunk.channel_freqs.size()));
  for (double f : chunk.channel_freqs) hw.put_f64(f);

  Bytes frame;
  const std::size_t payload_size = static_cast<std::size_t>(p.values.size()) * 4;
  frame.reserve(kPreambleSize + header.size() + payload_size + kChecksumSize);
  frame.insert(frame.end(), std::begin(kMagic), std::end(kMagic));
  detail::Writer fw(frame);
  fw.put(kVersion);
  fw.put(static_cast<std::uint32_t>(header.size()));
  frame.insert(frame.end(), header.begin(), header.end());
  const std::size_t payload_at = frame.size();
  for (Eigen::Index i = 0; i < p.values.size(); ++i) fw.put_f32(p.values.data()[i]);
  const auto crc = crc32(std::span(header), std::span(frame).subspan(payload_at));
  fw.put(crc);
  return frame;
}

// Size of the complete frame starting at `bytes`, or nullopt if more bytes
// are needed to tell. Throws on a preamble or header that cannot be valid.
inline std::optional<std::size_t> frame_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleSize) return std::nullopt;
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FrameError("bad frame magic");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kVersion) {
    throw VersionError("frame version " + std::to_string(version) + ", expected " +
                       std::to_string(kVersion));
  }
  const std::uint32_t header_len = detail::read_u32(bytes.data() + 6);
  if (header_len > kMaxHeaderSize) throw FrameError("frame header length out of range");
  if (bytes.size() < kPreambleSize + header_len) return std::nullopt;
  const auto h = detail::parse_header(bytes.subspan(kPreambleSize, header_len));
  const std::uint64_t payload = static_cast<std::uint64_t>(h.channels) * h.time * 4;
  if (payload > kMaxPayloadSize) throw FrameError("frame payload too large");
  return kPreambleSize + header_len + payload + kChecksumSize;
}

// Decodes exactly one frame. Any defect rejects the whole frame.
inline DataChunk decode(std::span<const std::uint8_t> bytes) {
  const auto size = frame_size(bytes);
  if (!size || bytes.size() < *size) throw TruncatedFrameError("truncated frame");
  if (bytes.size() > *size) throw FrameError("trailing bytes after frame");

  const std::uint32_t header_len = detail::read_u32(bytes.data() + 6);
  const auto header = bytes.subspan(kPreambleSize, header_len);
  auto h = detail::parse_header(header);
  const auto payload = bytes.subspan(kPreambleSize + header_len, *size - kPreambleSize - header_len - kChecksumSize);
  const std::uint32_t stored = detail::read_u32(bytes.data() + *size - kChecksumSize);
  if (crc32(header, payload) != stored) throw ChecksumError("frame checksum mismatch");

  DataChunk c = std::move(h.chunk);
  const auto cont = continuity_from_code(h.continuity_code);
  if (!cont) throw FrameError("unknown continuity code " + std::to_string(h.continuity_code));
  c.continuity = *cont;
  if (c.payload.series && h.channels != 1) throw FrameError("time series frame with several rows");
  c.payload.values.resize(h.channels, h.time);
  detail::Reader pr(payload);
  for (Eigen::Index i = 0; i < c.payload.values.size(); ++i) c.payload.values.data()[i] = pr.get_f32();
  return c;
}

// Incremental decoder for a byte stream carrying back-to-back frames. A bad
// frame is dropped whole and counted; the decoder then resynchronises on the
// next magic.
class StreamDecoder {
 public:
  struct Counters {
    std::uint64_t frames = 0;
    std::uint64_t checksum_errors = 0;
    std::uint64_t format_errors = 0;
    std::uint64_t skipped_bytes = 0;
  };

  void feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  // Next decodable chunk, or nullopt when more input is needed.
  std::optional<DataChunk> next() {
    for (;;) {
      const std::span<const std::uint8_t> view(buf_.data() + pos_, buf_.size() - pos_);
      if (view.size() < 4) return compact(), std::nullopt;
      if (std::memcmp(view.data(), kMagic, 4) != 0) {
        skip(1);
        continue;
      }
      std::optional<std::size_t> size;
      try {
        size = frame_size(view);
      } catch (const Error&) {
        ++counters_.format_errors;
        skip(1);
        continue;
      }
      if (!size || view.size() < *size) return compact(), std::nullopt;
      try {
        DataChunk c = decode(view.first(*size));
        pos_ += *size;
        ++counters_.frames;
        return c;
      } catch (const ChecksumError&) {
        ++counters_.checksum_errors;
        skip(*size);
      } catch (const Error&) {
        ++counters_.format_errors;
        skip(1);
      }
    }
  }

  // Bytes left over at end of stream belong to no complete frame.
  std::size_t pending() const { return buf_.size() - pos_; }
  const Counters& counters() const { return counters_; }

 private:
  void skip(std::size_t n) {
    pos_ += n;
    counters_.skipped_bytes += n;
  }
  void compact() {
    if (pos_ > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
      pos_ = 0;
    }
  }

  Bytes buf_;
  std::size_t pos_ = 0;
  Counters counters_;
};

}  // namespace tfalign::wire
