// Copyright 2026 The DCL Authors.
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

// Umbrella header for the library (the CLI layer is separate: dcl/cli.hpp).

#pragma once

#include "dcl/adapter.hpp"
#include "dcl/datasets.hpp"
#include "dcl/error.hpp"
#include "dcl/linalg.hpp"
#include "dcl/losses.hpp"
#include "dcl/metrics.hpp"
#include "dcl/pipeline.hpp"
#include "dcl/random.hpp"
#include "dcl/risk_bounds.hpp"
