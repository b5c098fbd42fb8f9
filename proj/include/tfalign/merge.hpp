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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfalign/alignment.hpp"
#include "tfalign/chunk.hpp"
#include "tfalign/continuity.hpp"
#include "tfalign/errors.hpp"

namespace tfalign {

enum class MergeScenario {
  regular_continuous,
  regular_discontinuous,
  irregular_discontinuous,
};

constexpr std::string_view to_string(MergeScenario s) {
  switch (s) {
    case MergeScenario::regular_continuous: return "RegularContinuous";
    case MergeScenario::regular_discontinuous: return "RegularDiscontinuous";
    case MergeScenario::irregular_discontinuous: return "IrregularDiscontinuous";
  }
  return "unknown";
}

// Continuity class of a merged chunk: `discontinuous` when the previous
// completed set was not the direct predecessor or any input is a
// discontinuous subtype, `with_previous` otherwise.
inline Continuity decide_continuity(std::uint64_t n, std::optional<std::uint64_t> last_completed,
                                    std::span<const Continuity> incoming) {
  if (incoming.empty()) throw EmptyInputError("decide_continuity needs at least one chunk");
  for (Continuity c : incoming) {
    if (c == Continuity::invalid) {
      throw InvalidInMergeError("chunk " + std::to_string(n) + " flagged invalid reached a merge");
    }
    if (!is_known(c)) throw MetadataError("unknown continuity code " + std::to_string(code(c)));
  }
  if (!last_completed || n != *last_completed + 1) return Continuity::discontinuous;
  for (Continuity c : incoming) {
    if (is_discontinuous_subtype(c)) return Continuity::discontinuous;
  }
  return Continuity::with_previous;
}

// Published subtype of a merged chunk. newfile, calibrationChunk and last are
// kept so that file boundaries and calibration survive the graph.
inline Continuity merged_subtype(Continuity decided, std::span<const Continuity> incoming) {
  auto any = [&](Continuity c) {
    return std::find(incoming.begin(), incoming.end(), c) != incoming.end();
  };
  if (is_discontinuous_subtype(decided)) {
    if (any(Continuity::calibration_chunk)) return Continuity::calibration_chunk;
    if (any(Continuity::newfile)) return Continuity::newfile;
    return Continuity::discontinuous;
  }
  return any(Continuity::last) ? Continuity::last : Continuity::with_previous;
}

inline MergeScenario classify_scenario(Continuity chunk, Continuity merged) {
  if (chunk == Continuity::invalid || merged == Continuity::invalid) {
    throw InvalidInMergeError("invalid continuity cannot be classified");
  }
  const bool chunk_disc = is_discontinuous_subtype(chunk);
  const bool merged_disc = is_discontinuous_subtype(merged);
  if (!chunk_disc && !merged_disc) return MergeScenario::regular_continuous;
  if (chunk_disc && merged_disc) return MergeScenario::regular_discontinuous;
  if (!chunk_disc && merged_disc) return MergeScenario::irregular_discontinuous;
  // decide_continuity never yields a continuous merge from a discontinuous
  // chunk; getting here means the merge state is corrupt.
  throw ProtocolError("discontinuous chunk cannot be merged into a continuous chunk");
}

// Slices one incoming array into the merged time interval.
//   regular continuous:    prev_tail ++ current[:, 0 : e - d_H]
//   regular discontinuous: current[:, d_L : e - d_H]
//   irregular:             current[:, d_l : e - d_H]
inline Matrix merge_array(MergeScenario scenario, const Matrix* prev_tail, const Matrix& current,
                          const DropCounts& drops) {
  const Eigen::Index e = current.cols();
  const Eigen::Index high = drops.high;
  Eigen::Index low = 0;
  switch (scenario) {
    case MergeScenario::regular_continuous: {
      if (prev_tail == nullptr) {
        throw MissingTailError("regular continuous merge without a carried tail");
      }
      if (prev_tail->cols() < high || prev_tail->rows() != current.rows()) {
        throw MissingTailError("carried tail has " + std::to_string(prev_tail->cols()) +
                               " columns, merge needs " + std::to_string(high));
      }
      if (e - high < 0 || e < 1) {
        throw EmptyResultError("chunk of " + std::to_string(e) + " time steps cannot drop " +
                               std::to_string(high) + "; minimum chunk length is " +
                               std::to_string(high + 1));
      }
      Matrix out(current.rows(), e);
      out.leftCols(high) = prev_tail->rightCols(high);
      out.rightCols(e - high) = current.leftCols(e - high);
      return out;
    }
    case MergeScenario::regular_discontinuous:
      low = drops.low_discontinuous;
      break;
    case MergeScenario::irregular_discontinuous:
      low = drops.low_continuous;
      break;
  }
  const Eigen::Index len = e - high - low;
  if (len <= 0) {
    throw EmptyResultError("merged chunk would be empty: " + std::to_string(e) +
                           " time steps minus " + std::to_string(low) + " + " +
                           std::to_string(high) + " dropped; minimum chunk length is " +
                           std::to_string(low + high + 1));
  }
  return current.middleCols(low, len);
}

// One input of a merged chunk, sliced to the merged interval.
struct MergedInput {
  Payload payload;
  double sample_rate = 0.0;
  std::vector<double> channel_freqs;
  AlignmentParams alignment;  // of the incoming chunk
  Continuity continuity = Continuity::discontinuous;  // of the incoming chunk
  MergeScenario scenario = MergeScenario::regular_discontinuous;
};

struct MergedChunk {
  std::uint64_t number = 0;
  Continuity continuity = Continuity::discontinuous;
  AlignmentParams alignment;
  // True when the merge turned discontinuous because of a numbering gap.
  bool gap = false;
  std::map<SourceKey, MergedInput> inputs;

  Eigen::Index time_length() const {
    return inputs.empty() ? 0 : inputs.begin()->second.payload.time_length();
  }
};

struct MergeState {
  std::optional<std::uint64_t> last_completed;
  // Last d_H columns of each input of the previous merge, copied.
  std::map<SourceKey, Matrix> carried_tails;
};

using ChunkSet = std::map<SourceKey, ChunkPtr>;

struct MergeResult {
  MergedChunk merged;
  MergeState state;
};

inline MergeResult complete_merge(const MergeState& state, const ChunkSet& set, std::uint64_t n) {
  if (set.empty()) throw EmptyInputError("complete_merge needs a non-empty set");

  std::vector<AlignmentParams> params;
  std::vector<Continuity> codes;
  params.reserve(set.size());
  codes.reserve(set.size());
  for (const auto& [key, chunk] : set) {
    if (chunk->number != n) {
      throw ProtocolError("chunk " + std::to_string(chunk->number) + " of " + key.str() +
                          " in the set for number " + std::to_string(n));
    }
    params.push_back(chunk->alignment);
    codes.push_back(chunk->continuity);
  }

  MergeResult result;
  MergedChunk& merged = result.merged;
  merged.number = n;
  merged.alignment = merge_params(params);
  const Continuity decided = decide_continuity(n, state.last_completed, codes);
  merged.continuity = merged_subtype(decided, codes);
  merged.gap = !state.last_completed || n != *state.last_completed + 1;

  MergeState& next = result.state;
  next.last_completed = n;

  Eigen::Index length = -1;
  for (const auto& [key, chunk] : set) {
    const DropCounts drops = drop_counts(merged.alignment, chunk->alignment);
    const MergeScenario scenario = classify_scenario(chunk->continuity, decided);
    const Matrix* tail = nullptr;
    if (scenario == MergeScenario::regular_continuous) {
      auto it = state.carried_tails.find(key);
      if (it == state.carried_tails.end()) {
        throw MissingTailError("no carried tail for " + key.str() + " at chunk " +
                               std::to_string(n));
      }
      tail = &it->second;
    }
    const Matrix& current = chunk->payload.values;

    MergedInput in;
    in.payload.values = merge_array(scenario, tail, current, drops);
    in.payload.series = chunk->payload.series;
    in.sample_rate = chunk->sample_rate;
    in.channel_freqs = chunk->channel_freqs;
    in.alignment = chunk->alignment;
    in.continuity = chunk->continuity;
    in.scenario = scenario;

    if (length >= 0 && in.payload.time_length() != length) {
      throw ProtocolError("merged arrays of chunk " + std::to_string(n) +
                          " differ in time extent");
    }
    length = in.payload.time_length();

    const Eigen::Index keep = std::min<Eigen::Index>(drops.high, current.cols());
    next.carried_tails.emplace(key, current.rightCols(keep));
    merged.inputs.emplace(key, std::move(in));
  }
  return result;
}

}  // namespace tfalign
