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

#include <stdexcept>
#include <string>

namespace tfalign {

// Root of every error raised by the library. Per-chunk data faults never
// surface as exceptions; they are handled by the continuity protocol.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TFALIGN_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// chunk model
TFALIGN_DEFINE_ERROR(ShapeError);
TFALIGN_DEFINE_ERROR(MetadataError);
TFALIGN_DEFINE_ERROR(TooShortError);

// alignment algebra
TFALIGN_DEFINE_ERROR(CounterOverflowError);
TFALIGN_DEFINE_ERROR(EmptyInputError);
TFALIGN_DEFINE_ERROR(InconsistentParamsError);

// merge engine
TFALIGN_DEFINE_ERROR(InvalidInMergeError);
TFALIGN_DEFINE_ERROR(ProtocolError);
TFALIGN_DEFINE_ERROR(EmptyResultError);
TFALIGN_DEFINE_ERROR(MissingTailError);

// composite manager
TFALIGN_DEFINE_ERROR(UnknownKeyError);

// graph runtime
TFALIGN_DEFINE_ERROR(ConfigError);
TFALIGN_DEFINE_ERROR(CycleError);
TFALIGN_DEFINE_ERROR(UnknownProcessorKindError);
TFALIGN_DEFINE_ERROR(ChunkTooShortForDepthError);

// dsp processors
TFALIGN_DEFINE_ERROR(UnsupportedFormatError);
TFALIGN_DEFINE_ERROR(IoError);
TFALIGN_DEFINE_ERROR(NonIntegerRateError);
TFALIGN_DEFINE_ERROR(SpecMismatchError);
TFALIGN_DEFINE_ERROR(TooFewChannelsError);
TFALIGN_DEFINE_ERROR(NotACalibrationChunkError);
TFALIGN_DEFINE_ERROR(DeviceError);

// wire
TFALIGN_DEFINE_ERROR(FrameError);
TFALIGN_DEFINE_ERROR(ChecksumError);
TFALIGN_DEFINE_ERROR(VersionError);
TFALIGN_DEFINE_ERROR(TruncatedFrameError);

#undef TFALIGN_DEFINE_ERROR

}  // namespace tfalign
