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

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

#include "tfalign/tfalign.hpp"

namespace tfalign::testing {

// Scratch directory removed with everything in it on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tfalign-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path source_dir() { return TFALIGN_SOURCE_DIR; }

// Chunk whose cell (r, c) holds r * 1000 + c + offset, easy to trace
// through slicing.
inline DataChunk make_chunk(const SourceKey& key, std::uint64_t number, Eigen::Index channels,
                            Eigen::Index columns, AlignmentParams alignment = {},
                            Continuity continuity = Continuity::with_previous, double offset = 0.0) {
  DataChunk c;
  c.number = number;
  c.source = key;
  c.sample_rate = 100.0;
  c.alignment = alignment;
  c.continuity = continuity;
  c.payload.series = channels == 1;
  c.payload.values.resize(channels, columns);
  for (Eigen::Index r = 0; r < channels; ++r) {
    for (Eigen::Index t = 0; t < columns; ++t) {
      c.payload.values(r, t) = static_cast<Sample>(r * 1000 + t + offset);
    }
  }
  return c;
}

inline ChunkPtr share(DataChunk c) { return std::make_shared<const DataChunk>(std::move(c)); }

struct SmallPipeline {
  std::int64_t chunk_size = 256;
  std::int64_t chunks = 24;
  std::string transport = "local";  // applied to every edge
  std::string faults;               // YAML list body, may be empty
  bool calibration = false;
  std::uint64_t seed = 5;
  std::size_t queue_depth = 16;
};

// Mic -> resampler -> gammachirp -> {structure, ptn}, structure -> ptn with
// a small filterbank, so a run takes milliseconds. Cumulative alignment at
// ptn is (p=8, d=63, l=2, s=2).
inline std::string small_pipeline_yaml(const SmallPipeline& opt) {
  std::string y;
  y += "seed: " + std::to_string(opt.seed) + "\n";
  y += "processors:\n";
  y += "  - {name: mic, kind: mic_input, params: {mode: synthetic, sample_rate: 8000, chunk_size: " +
       std::to_string(opt.chunk_size) + ", chunks: " + std::to_string(opt.chunks) +
       ", tone_hz: 600, tone_amplitude: 0.3, noise_std: 0.05}}\n";
  y += "  - {name: resampler, kind: resampler, params: {factor: 2, fir_length: 31}}\n";
  y += "  - {name: gammachirp, kind: gammachirp, params: {channels: 16, f_min: 150, f_max: 1500, "
       "impulse_ms: 10, fft_size: 256}}\n";
  y += "  - {name: structure, kind: structure, params: {w_t: 8, w_s: 2}}\n";
  y += opt.calibration ? "  - {name: ptn, kind: ptn, params: {block_t: 20, block_f: 4}}\n"
                       : "  - {name: ptn, kind: ptn, params: {theta: 0.9, beta: 0.1, block_t: 20, block_f: 4}}\n";
  y += "edges:\n";
  for (const char* e : {"mic.audio: resampler", "resampler.audio: gammachirp", "gammachirp.E: structure",
                        "gammachirp.E: ptn", "structure.T: ptn"}) {
    const std::string s(e);
    const auto colon = s.find(':');
    y += "  - {from: " + s.substr(0, colon) + ", to: " + s.substr(colon + 2) +
         ", transport: " + opt.transport + "}\n";
  }
  y += "outputs: [resampler.audio, gammachirp.E, structure.T, ptn.ET]\n";
  if (!opt.faults.empty()) y += "faults:\n" + opt.faults;
  if (opt.calibration) y += "calibration: {enabled: true, samples: 2048, noise_std: 0.1}\n";
  y += "runtime: {queue_depth: " + std::to_string(opt.queue_depth) + "}\n";
  return y;
}

// Relative agreement that treats matching NaNs as equal.
inline bool close_or_both_nan(double actual, double expected, double rtol) {
  if (std::isnan(actual) || std::isnan(expected)) return std::isnan(actual) && std::isnan(expected);
  return std::abs(actual - expected) <= rtol * std::abs(expected);
}

// Arbitrary valid chunk for codec round trips: random shape, metadata and
// bit patterns, NaN and infinities included.
inline DataChunk random_chunk(std::mt19937_64& rng) {
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  DataChunk c;
  c.number = std::uniform_int_distribution<std::uint64_t>()(rng);
  c.source.producer = std::string(static_cast<std::size_t>(pick(1, 12)), static_cast<char>('a' + pick(0, 25)));
  c.source.representation = std::string(static_cast<std::size_t>(pick(0, 4)), static_cast<char>('A' + pick(0, 25)));
  c.continuity = kAllContinuities[static_cast<std::size_t>(pick(1, 5))];
  c.alignment = {pick(0, kMaxCounter), pick(0, 500), pick(0, 8), pick(0, 8)};
  c.sample_rate = std::uniform_real_distribution<double>(1.0, 96000.0)(rng);
  const bool series = pick(0, 3) == 0;
  const Eigen::Index rows = series ? 1 : pick(1, 12);
  const Eigen::Index cols = pick(1, 64);
  c.payload.series = series;
  c.payload.values.resize(rows, cols);
  for (Eigen::Index i = 0; i < c.payload.values.size(); ++i) {
    c.payload.values.data()[i] = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
  }
  if (!series && pick(0, 1)) {
    c.channel_freqs.resize(static_cast<std::size_t>(rows));
    double f = 50.0;
    for (auto& v : c.channel_freqs) v = f += std::uniform_real_distribution<double>(1.0, 100.0)(rng);
  }
  return c;
}

// Bit-level equality, so NaN payloads compare equal to themselves.
inline bool identical(const DataChunk& a, const DataChunk& b) {
  if (a.number != b.number || a.source != b.source || a.continuity != b.continuity ||
      a.alignment != b.alignment || std::bit_cast<std::uint64_t>(a.sample_rate) != std::bit_cast<std::uint64_t>(b.sample_rate) ||
      a.channel_freqs != b.channel_freqs || a.payload.series != b.payload.series ||
      a.payload.values.rows() != b.payload.values.rows() || a.payload.values.cols() != b.payload.values.cols()) {
    return false;
  }
  return std::memcmp(a.payload.values.data(), b.payload.values.data(),
                     static_cast<std::size_t>(a.payload.values.size()) * sizeof(Sample)) == 0;
}

// "0:RegularDiscontinuous 1:RegularContinuous ..." for one node.
inline std::string merge_log_string(const NodeStats& node) {
  std::string out;
  for (const auto& e : node.merge_log) {
    if (!out.empty()) out += ' ';
    out += std::to_string(e.number) + ":" + e.summary();
  }
  return out;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace tfalign::testing
