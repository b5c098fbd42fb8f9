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

#include <cmath>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tfalign/alignment.hpp"
#include "tfalign/continuity.hpp"
#include "tfalign/errors.hpp"

namespace tfalign {

// Transport element type. DSP kernels work in double internally.
using Sample = float;

// channels x time, row-major so that one channel is contiguous in memory.
using Matrix = Eigen::Array<Sample, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// (producer identifier, representation name)
struct SourceKey {
  std::string producer;
  std::string representation;

  auto operator<=>(const SourceKey&) const = default;
  bool operator==(const SourceKey&) const = default;

  std::string str() const { return producer + "." + representation; }
};

// Time series payloads are stored as a single row with `series` set; the
// merge rules for them are the 2-D rules without the channel axis.
struct Payload {
  Matrix values;
  bool series = false;

  Eigen::Index channels() const { return values.rows(); }
  Eigen::Index time_length() const { return values.cols(); }
};

struct DataChunk {
  std::uint64_t number = 0;
  SourceKey source;
  Payload payload;
  double sample_rate = 0.0;
  std::vector<double> channel_freqs;  // empty when absent
  AlignmentParams alignment;
  Continuity continuity = Continuity::discontinuous;
};

// Published chunks are immutable and shared between workers.
using ChunkPtr = std::shared_ptr<const DataChunk>;

namespace detail {

inline bool strictly_monotone(const std::vector<double>& v) {
  if (v.size() < 2) return true;
  bool up = true;
  bool down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    up = up && v[i] > v[i - 1];
    down = down && v[i] < v[i - 1];
  }
  return up || down;
}

}  // namespace detail

// Checks every chunk invariant and returns the chunk unchanged. Called on
// every chunk at a publish boundary, so `invalid` is rejected here too.
inline const DataChunk& validate_chunk(const DataChunk& chunk) {
  const auto& p = chunk.payload;
  if (p.values.size() == 0 || p.time_length() < 1) {
    throw ShapeError("chunk " + std::to_string(chunk.number) + " of " + chunk.source.str() +
                     " has an empty payload");
  }
  if (p.series && p.channels() != 1) {
    throw ShapeError("time-series payload of " + chunk.source.str() + " has " +
                     std::to_string(p.channels()) + " rows");
  }
  if (!chunk.channel_freqs.empty()) {
    if (static_cast<Eigen::Index>(chunk.channel_freqs.size()) != p.channels()) {
      throw ShapeError("channel_freqs length " + std::to_string(chunk.channel_freqs.size()) +
                       " does not match channel count " + std::to_string(p.channels()));
    }
    if (!detail::strictly_monotone(chunk.channel_freqs)) {
      throw ShapeError("channel_freqs of " + chunk.source.str() + " are not strictly monotone");
    }
  }
  if (!is_known(chunk.continuity)) {
    throw MetadataError("unknown continuity code " + std::to_string(code(chunk.continuity)));
  }
  if (chunk.continuity == Continuity::invalid) {
    throw MetadataError("invalid chunk " + std::to_string(chunk.number) + " of " +
                        chunk.source.str() + " must not be published");
  }
  if (!chunk.alignment.valid()) {
    throw MetadataError("alignment counters out of range: " + to_string(chunk.alignment));
  }
  if (!(chunk.sample_rate > 0.0) || !std::isfinite(chunk.sample_rate)) {
    throw MetadataError("chunk sample rate must be positive");
  }
  // Discontinuous chunks were already trimmed by d and p when published, so
  // the bound only applies to chunks that still span a full interval.
  if (is_withprevious_subtype(chunk.continuity) &&
      chunk.alignment.time_margin() >= p.time_length()) {
    throw TooShortError("chunk " + std::to_string(chunk.number) + " of " + chunk.source.str() +
                        ": d + p = " + std::to_string(chunk.alignment.time_margin()) +
                        " leaves no valid time step in " + std::to_string(p.time_length()));
  }
  return chunk;
}

// Rows [0, l) and [channels - s, channels) are invalid for this alignment.
// Returns the half-open range of valid rows.
inline std::pair<Eigen::Index, Eigen::Index> valid_rows(const AlignmentParams& a,
                                                        Eigen::Index channels) {
  const Eigen::Index lo = std::min<Eigen::Index>(a.invalid_large_scales, channels);
  const Eigen::Index hi = std::max<Eigen::Index>(lo, channels - a.invalid_small_scales);
  return {lo, hi};
}

// Overwrites the invalid scale rows with `fill` (quiet NaN or zero).
inline void fill_invalid_rows(Matrix& m, const AlignmentParams& a, Sample fill) {
  const auto [lo, hi] = valid_rows(a, m.rows());
  if (lo > 0) m.topRows(lo).setConstant(fill);
  if (hi < m.rows()) m.bottomRows(m.rows() - hi).setConstant(fill);
}

}  // namespace tfalign
