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

#include "dqpsa/reference.h"

#include "dqpsa/rng.h"

namespace dqpsa {

ModelGeometry ReferenceGeometry(Variant variant) {
  ModelGeometry g;
  g.vocab_size = 12;
  g.width = 8;
  g.pdq_blocks = 2;
  g.text_blocks = 2;
  g.heads = 2;
  g.prompt_len = 4;
  g.image_width = 4;
  g.raw_width = 3;
  g.ffn_mult = 2;
  g.max_len = 16;
  g.variant = variant;
  return g;
}

void FillReferenceBatch(const ModelGeometry& geometry, std::uint64_t seed,
                        int batch_size, ReferenceBatch* out) {
  Rng rng(seed);
  const int vocab = geometry.vocab_size;
  auto token = [&] { return 2 + static_cast<int>(rng.Below(vocab - 2)); };
  out->images.clear();
  out->instances.clear();
  out->images.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    Matrix img(3, geometry.raw_width);
    for (double& v : img.values()) v = rng.Normal();
    out->images.push_back(std::move(img));
  }
  for (int b = 0; b < batch_size; ++b) {
    TaskInstance t;
    t.example_id = "ref-" + std::to_string(b);
    t.prompt = {1};
    const int plen = 1 + static_cast<int>(rng.Below(3));
    for (int i = 0; i < plen; ++i) t.prompt.push_back(token());
    const int tlen = 3 + static_cast<int>(rng.Below(4));
    for (int i = 0; i < tlen; ++i) t.text.push_back(token());
    const int s0 = static_cast<int>(rng.Below(tlen - 1));
    t.gold.push_back({s0, s0 + static_cast<int>(rng.Below(2))});
    if (tlen >= 5 && t.gold[0].end + 2 < tlen) {
      const int s1 = t.gold[0].end + 2;
      t.gold.push_back({s1, s1});
    }
    // The batch index makes every description distinct.
    t.description = {1, 2 + b % (vocab - 2), token()};
    t.image = &out->images[b];
    out->instances.push_back(std::move(t));
  }
}

GradCheckReport ReferenceGradCheck(Variant variant, std::uint64_t seed,
                                   double h) {
  const ModelGeometry geometry = ReferenceGeometry(variant);
  DqpsaModel model(geometry, seed);
  ReferenceBatch batch;
  FillReferenceBatch(geometry, seed + 1, 3, &batch);
  std::vector<Parameter*> params;
  for (Parameter* p : model.params().All()) {
    if (p->group != "image_stub") params.push_back(p);
  }
  const LossWeights weights{1.0, 1.0, 1.0};
  return FiniteDiffCheck(
      [&](Graph& g) { return TotalLoss(g, model, batch.instances, weights); },
      params, h);
}

}  // namespace dqpsa
