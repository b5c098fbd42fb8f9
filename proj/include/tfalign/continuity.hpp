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

#include <array>
#include <optional>
#include <string_view>

namespace tfalign {

// Continuity flag carried by every chunk. The numeric codes are part of the
// wire and file formats and must not change.
enum class Continuity : int {
  invalid = -1,
  discontinuous = 0,
  newfile = 1,
  calibration_chunk = 2,
  with_previous = 10,
  last = 11,
};

inline constexpr std::array<Continuity, 6> kAllContinuities = {
    Continuity::invalid,           Continuity::discontinuous,
    Continuity::newfile,           Continuity::calibration_chunk,
    Continuity::with_previous,     Continuity::last,
};

constexpr int code(Continuity c) { return static_cast<int>(c); }

constexpr bool is_known(Continuity c) {
  for (Continuity k : kAllContinuities) {
    if (k == c) return true;
  }
  return false;
}

constexpr bool is_discontinuous_subtype(Continuity c) {
  return c == Continuity::discontinuous || c == Continuity::newfile ||
         c == Continuity::calibration_chunk;
}

constexpr bool is_withprevious_subtype(Continuity c) {
  return c == Continuity::with_previous || c == Continuity::last;
}

constexpr std::optional<Continuity> continuity_from_code(int value) {
  const auto c = static_cast<Continuity>(value);
  if (!is_known(c)) return std::nullopt;
  return c;
}

constexpr std::string_view to_string(Continuity c) {
  switch (c) {
    case Continuity::invalid: return "invalid";
    case Continuity::discontinuous: return "discontinuous";
    case Continuity::newfile: return "newfile";
    case Continuity::calibration_chunk: return "calibrationChunk";
    case Continuity::with_previous: return "withprevious";
    case Continuity::last: return "last";
  }
  return "unknown";
}

}  // namespace tfalign
