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

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>

#include "tfalign/errors.hpp"

namespace tfalign {

// Upper bound on every alignment counter. Exceeding it is an error rather
// than a wraparound, since a wrapped counter would silently corrupt slicing.
inline constexpr std::int64_t kMaxCounter = std::numeric_limits<std::int32_t>::max();

// The four counters describing how a representation is shifted against the
// original time series and which of its scale rows are invalid.
//
// On chunks the counters are cumulative; on processors they are relative
// (the contribution of one feature). Time counters are in time steps of the
// representation's own rate, scale counters in channels.
struct AlignmentParams {
  // Future time steps used to compute a value (non-causal part).
  std::int64_t included_past = 0;
  // Past time steps used to compute a value (causal part).
  std::int64_t dropped_after_discontinuity = 0;
  // Invalid rows at the low-frequency (large scale) edge.
  std::int64_t invalid_large_scales = 0;
  // Invalid rows at the high-frequency (small scale) edge.
  std::int64_t invalid_small_scales = 0;

  friend bool operator==(const AlignmentParams&, const AlignmentParams&) = default;

  bool valid() const {
    auto ok = [](std::int64_t v) { return v >= 0 && v <= kMaxCounter; };
    return ok(included_past) && ok(dropped_after_discontinuity) &&
           ok(invalid_large_scales) && ok(invalid_small_scales);
  }

  std::int64_t time_margin() const { return included_past + dropped_after_discontinuity; }
  std::int64_t scale_margin() const { return invalid_large_scales + invalid_small_scales; }
};

inline std::string to_string(const AlignmentParams& a) {
  return "(p=" + std::to_string(a.included_past) +
         ",d=" + std::to_string(a.dropped_after_discontinuity) +
         ",l=" + std::to_string(a.invalid_large_scales) +
         ",s=" + std::to_string(a.invalid_small_scales) + ")";
}

inline std::ostream& operator<<(std::ostream& os, const AlignmentParams& a) {
  return os << to_string(a);
}

// Time steps that must be dropped when slicing one incoming array into a
// merged chunk.
struct DropCounts {
  std::int64_t high = 0;              // end side, every scenario
  std::int64_t low_discontinuous = 0; // start side, discontinuous chunk
  std::int64_t low_continuous = 0;    // start side, continuous chunk merged discontinuously

  friend bool operator==(const DropCounts&, const DropCounts&) = default;
};

namespace detail {

inline std::int64_t checked_add(std::int64_t a, std::int64_t b, const char* what) {
  if (a < 0 || b < 0) {
    throw InconsistentParamsError(std::string("negative alignment counter in ") + what);
  }
  if (a > kMaxCounter - b) {
    throw CounterOverflowError(std::string("alignment counter overflow in ") + what);
  }
  return a + b;
}

}  // namespace detail

// Alignment of a chunk published from a merged chunk by a feature.
inline AlignmentParams compose(const AlignmentParams& merged, const AlignmentParams& feature) {
  return {
      detail::checked_add(merged.included_past, feature.included_past, "included_past"),
      detail::checked_add(merged.dropped_after_discontinuity,
                          feature.dropped_after_discontinuity, "dropped_after_discontinuity"),
      detail::checked_add(merged.invalid_large_scales, feature.invalid_large_scales,
                          "invalid_large_scales"),
      detail::checked_add(merged.invalid_small_scales, feature.invalid_small_scales,
                          "invalid_small_scales"),
  };
}

// Component-wise maximum: only the region where every input is valid stays
// valid after merging.
inline AlignmentParams merge_params(std::span<const AlignmentParams> inputs) {
  if (inputs.empty()) throw EmptyInputError("merge_params needs at least one input");
  AlignmentParams out = inputs.front();
  for (const AlignmentParams& in : inputs.subspan(1)) {
    out.included_past = std::max(out.included_past, in.included_past);
    out.dropped_after_discontinuity =
        std::max(out.dropped_after_discontinuity, in.dropped_after_discontinuity);
    out.invalid_large_scales = std::max(out.invalid_large_scales, in.invalid_large_scales);
    out.invalid_small_scales = std::max(out.invalid_small_scales, in.invalid_small_scales);
  }
  return out;
}

inline AlignmentParams merge_params(std::initializer_list<AlignmentParams> inputs) {
  return merge_params(std::span<const AlignmentParams>(inputs.begin(), inputs.size()));
}

// `merged` must come from merge_params over a set that includes `chunk`.
inline DropCounts drop_counts(const AlignmentParams& merged, const AlignmentParams& chunk) {
  if (merged.included_past < chunk.included_past ||
      merged.dropped_after_discontinuity < chunk.dropped_after_discontinuity) {
    throw InconsistentParamsError("merged alignment " + to_string(merged) +
                                  " does not dominate chunk alignment " + to_string(chunk));
  }
  if (!chunk.valid()) {
    throw InconsistentParamsError("invalid chunk alignment " + to_string(chunk));
  }
  return {
      merged.included_past - chunk.included_past,
      merged.dropped_after_discontinuity - chunk.dropped_after_discontinuity,
      detail::checked_add(merged.dropped_after_discontinuity, chunk.included_past, "drop_counts"),
  };
}

}  // namespace tfalign
