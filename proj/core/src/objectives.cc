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

#include "dqpsa/objectives.h"

#include <string>

#include "dqpsa/errors.h"

namespace dqpsa {

Var ItmLogits(Var w_itm, Var visual_query, Var description) {
  const int width = w_itm.cols();
  if (w_itm.rows() != 2) {
    throw DimensionError("ITM head must be 2 x d, got " +
                         w_itm.value().ShapeString());
  }
  if (visual_query.cols() != width || description.cols() != width) {
    throw DimensionError("ITM inputs " + visual_query.value().ShapeString() +
                         ", " + description.value().ShapeString() +
                         " do not match head width " + std::to_string(width));
  }
  if (visual_query.rows() == 0) {
    throw DimensionError("ITM needs at least one visual-query row");
  }
  return Mean(MatMulNT(visual_query, w_itm), 0);
}

Var ItmLoss(const MatchBatch& batch, Var w_itm) {
  const std::size_t n = batch.labels.size();
  if (n == 0) throw UsageError("ITM loss over an empty batch");
  if (batch.visual_query.size() != n || batch.description.size() != n) {
    throw DimensionError("ITM batch fields have different lengths");
  }
  std::vector<Var> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = batch.labels[i];
    if (label != 0 && label != 1) throw UsageError("ITM label must be 0 or 1");
    Var logits = ItmLogits(w_itm, batch.visual_query[i], batch.description[i]);
    terms.push_back(Pick(LogSoftmaxRows(logits), 0, label));
  }
  Var stacked = terms.size() == 1 ? terms[0] : ConcatRows(terms);
  return Neg(MeanAll(stacked));
}

ItcSimilarities ItcSimilarityVectors(const Matrix& image_cls,
                                     const Matrix& text_cls, int i) {
  if (!image_cls.SameShape(text_cls)) {
    throw DimensionError("ITC: image " + image_cls.ShapeString() + " vs text " +
                         text_cls.ShapeString());
  }
  if (i < 0 || i >= image_cls.rows()) throw BoundsError("ITC example index");
  ItcSimilarities s;
  const int b = image_cls.rows();
  s.image_to_text.resize(b);
  s.text_to_image.resize(b);
  for (int j = 0; j < b; ++j) {
    double it = 0.0, ti = 0.0;
    for (int c = 0; c < image_cls.cols(); ++c) {
      it += text_cls(j, c) * image_cls(i, c);
      ti += image_cls(j, c) * text_cls(i, c);
    }
    s.image_to_text[j] = it;
    s.text_to_image[j] = ti;
  }
  return s;
}

Var ItcLoss(const ContrastBatch& batch, double temperature) {
  const Matrix& iv = batch.image_cls.value();
  const Matrix& tv = batch.text_cls.value();
  if (!iv.SameShape(tv)) {
    throw DimensionError("ITC: image " + iv.ShapeString() + " vs text " +
                         tv.ShapeString());
  }
  const int b = iv.rows();
  if (b < 1) throw UsageError("ITC loss over an empty batch");
  if (temperature <= 0.0) throw ConfigError("ITC temperature must be > 0");
  // Row i of sim is p_i2d for example i; row i of sim^T is p_d2i.
  Var sim = MatMulNT(batch.image_cls, batch.text_cls);
  if (temperature != 1.0) sim = Scale(sim, 1.0 / temperature);
  Var i2d = LogSoftmaxRows(sim);
  Var d2i = LogSoftmaxRows(Transpose(sim));
  std::vector<Var> diag;
  diag.reserve(2 * b);
  for (int i = 0; i < b; ++i) {
    diag.push_back(Pick(i2d, i, i));
    diag.push_back(Pick(d2i, i, i));
  }
  Var all = diag.size() == 1 ? diag[0] : ConcatRows(diag);
  return Neg(MeanAll(all));
}

}  // namespace dqpsa
