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

#include "tfalign/alignment.hpp"
#include "tfalign/channel.hpp"
#include "tfalign/chunk.hpp"
#include "tfalign/composite.hpp"
#include "tfalign/config.hpp"
#include "tfalign/continuity.hpp"
#include "tfalign/errors.hpp"
#include "tfalign/faults.hpp"
#include "tfalign/graph.hpp"
#include "tfalign/merge.hpp"
#include "tfalign/processors.hpp"
#include "tfalign/runtime.hpp"
#include "tfalign/tfio.hpp"
#include "tfalign/transport.hpp"
#include "tfalign/wire.hpp"
