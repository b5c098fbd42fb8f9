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
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tfalign/errors.hpp"

namespace tfalign::dsp {

enum class WavSampleFormat { pcm16, float32 };

struct WavData {
  double sample_rate = 0.0;
  int channels = 0;
  WavSampleFormat format = WavSampleFormat::pcm16;
  std::vector<float> samples;  // first channel only, full scale = 1.0
};

namespace detail {

inline std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace detail

// Accepts 16-bit integer PCM and 32-bit IEEE float (plain or extensible
// header). Multi-channel files contribute their first channel.
inline WavData parse_wav(const std::vector<std::uint8_t>& bytes) {
  using detail::le16;
  using detail::le32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw UnsupportedFormatError("not a RIFF/WAVE file");
  }
  WavData wav;
  int bits = 0;
  int block_align = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw UnsupportedFormatError("short fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      std::uint16_t tag = le16(f);
      wav.channels = le16(f + 2);
      wav.sample_rate = le32(f + 4);
      block_align = le16(f + 12);
      bits = le16(f + 14);
      if (tag == 0xFFFE && avail >= 26) tag = le16(f + 24);  // extensible: sub-format GUID
      if (tag == 1 && bits == 16) {
        wav.format = WavSampleFormat::pcm16;
      } else if (tag == 3 && bits == 32) {
        wav.format = WavSampleFormat::float32;
      } else {
        throw UnsupportedFormatError("unsupported WAV encoding: format tag " + std::to_string(tag) +
                                     ", " + std::to_string(bits) + " bits");
      }
      if (wav.channels < 1 || block_align != wav.channels * bits / 8 || wav.sample_rate <= 0) {
        throw UnsupportedFormatError("inconsistent WAV fmt chunk");
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw UnsupportedFormatError("data chunk before fmt chunk");
      const std::size_t frames = avail / static_cast<std::size_t>(block_align);
      wav.samples.resize(frames);
      const std::uint8_t* d = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        const std::uint8_t* s = d + i * static_cast<std::size_t>(block_align);
        if (wav.format == WavSampleFormat::pcm16) {
          wav.samples[i] = static_cast<float>(static_cast<std::int16_t>(le16(s))) / 32768.0f;
        } else {
          wav.samples[i] = std::bit_cast<float>(le32(s));
        }
      }
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw UnsupportedFormatError("WAV file without fmt chunk");
  return wav;  // no data chunk: zero samples
}

inline WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return parse_wav(bytes);
}

inline std::vector<std::uint8_t> encode_wav(const std::vector<float>& samples, std::uint32_t sample_rate,
                                            WavSampleFormat format, int bits_override = 0) {
  const int bits = bits_override ? bits_override : (format == WavSampleFormat::pcm16 ? 16 : 32);
  const std::uint16_t tag = format == WavSampleFormat::pcm16 ? 1 : 3;
  const std::uint32_t block = static_cast<std::uint32_t>(bits / 8);
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size()) * block;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put32(out, 16);
  detail::put16(out, tag);
  detail::put16(out, 1);
  detail::put32(out, sample_rate);
  detail::put32(out, sample_rate * block);
  detail::put16(out, static_cast<std::uint16_t>(block));
  detail::put16(out, static_cast<std::uint16_t>(bits));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put32(out, data_size);
  for (float s : samples) {
    if (bits == 8) {
      out.push_back(static_cast<std::uint8_t>(128 + std::clamp(s, -1.0f, 1.0f) * 127.0f));
    } else if (format == WavSampleFormat::pcm16) {
      const float c = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
      detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0f))));
    } else {
      detail::put32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const std::vector<float>& samples,
                      std::uint32_t sample_rate, WavSampleFormat format = WavSampleFormat::float32) {
  const auto bytes = encode_wav(samples, sample_rate, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tfalign::dsp
