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

// A tiny fixed configuration for gradient checking the whole model:
// d = 8, N = 2, M = 2, 2 heads, L_P = 4, sequences of at most 6 tokens and
// a batch of 3.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dqpsa/data.h"
#include "dqpsa/gradcheck.h"
#include "dqpsa/model.h"

namespace dqpsa {

ModelGeometry ReferenceGeometry(Variant variant = Variant::kFull);

// Owns the images the instances point at.
struct ReferenceBatch {
  std::vector<Matrix> images;
  std::vector<TaskInstance> instances;

  ReferenceBatch() = default;
  ReferenceBatch(const ReferenceBatch&) = delete;
  ReferenceBatch& operator=(const ReferenceBatch&) = delete;
};

// Random prompts (2-4 tokens, [CLS] first), texts (3-6 tokens) with one or
// two gold spans, distinct descriptions and 3 x d_raw images.
void FillReferenceBatch(const ModelGeometry& geometry, std::uint64_t seed,
                        int batch_size, ReferenceBatch* out);

// Finite-difference check of TotalLoss with all weights 1 over every
// trainable parameter (the frozen image stub enters as a constant).
GradCheckReport ReferenceGradCheck(Variant variant, std::uint64_t seed,
                                   double h = 1e-5);

}  // namespace dqpsa
