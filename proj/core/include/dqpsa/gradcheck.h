// Copyright 2026 The dqpsa Authors.
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

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "dqpsa/graph.h"

namespace dqpsa {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  // Location of the worst entry.
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Builds the scalar objective into the given graph. Must be deterministic and
// must work on non-recording graphs (the numeric probes use inference mode).
using LossBuilder = std::function<Var(Graph&)>;

// Compares the reverse-mode gradient of `loss` with respect to every entry of
// `params` against the central difference (f(t+h) - f(t-h)) / 2h, and
// returns the worst |ga - gn| / max(1e-8, |ga| + |gn|).
//
// The parameters' grad buffers are overwritten; values are restored exactly.
GradCheckReport FiniteDiffCheck(const LossBuilder& loss,
                                std::span<Parameter* const> params,
                                double h = 1e-5);

double RelativeGradError(double analytic, double numeric);

}  // namespace dqpsa
