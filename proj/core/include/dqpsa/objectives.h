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

// Image-text matching and in-batch image-text contrastive objectives.

#pragma once

#include <vector>

#include "dqpsa/graph.h"

namespace dqpsa {

struct MatchBatch {
  std::vector<Var> visual_query;  // each prompt_len x d
  std::vector<Var> description;   // each L_D x d
  std::vector<int> labels;        // 1 = image and description match
};

// Rows are per-example [CLS] vectors (row i belongs to example i), i.e. the
// transpose of the d x B column layout.
struct ContrastBatch {
  Var image_cls;  // B x d
  Var text_cls;   // B x d
};

// 1 x 2 logits: the mean over the visual-query rows of
// concat(vq, desc) * W_itm^T. Description rows do not enter the mean, so
// only the visual-query rows are projected.
Var ItmLogits(Var w_itm, Var visual_query, Var description);

// Mean over the batch of -log softmax(logits)[label].
Var ItmLoss(const MatchBatch& batch, Var w_itm);

// Similarity vectors for example i: p_i2d[j] = <text_j, image_i>,
// p_d2i[j] = <image_j, text_i>. Plain values, no graph.
struct ItcSimilarities {
  std::vector<double> image_to_text;
  std::vector<double> text_to_image;
};
ItcSimilarities ItcSimilarityVectors(const Matrix& image_cls,
                                     const Matrix& text_cls, int i);

// (1 / 2B) sum_i [-log softmax(p_i2d / t)_i - log softmax(p_d2i / t)_i].
Var ItcLoss(const ContrastBatch& batch, double temperature = 1.0);

}  // namespace dqpsa
