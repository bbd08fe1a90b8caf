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

// The assembled span extractor.
//
// A frozen linear stub maps raw image rows to d_img features. The prompt,
// padded to L_P tokens, runs through the prompt-query stack, whose
// cross-attention blocks let it read the image; the resulting L_P rows
// (the visual query) are projected and prefixed to the text encoder input
//
//   [ visual query (L_P) ; prompt (L_P) ; text (L_T) ]
//
// and the pairwise energy head scores the L_T text rows only.
//
// Parameter groups: "image_stub", "pdq", "text", "epe", "heads".

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dqpsa/attention.h"
#include "dqpsa/data.h"
#include "dqpsa/epe.h"
#include "dqpsa/graph.h"
#include "dqpsa/params.h"

namespace dqpsa {

enum class Variant {
  kFull,
  kNoPdq,  // visual query replaced by L_P free tokens; image unused
  kNoEpe,  // independent start/end boundary head instead of pair energies
  kPsa,    // text only: no image path, no visual prefix
};
std::string_view VariantName(Variant v);  // full / no-pdq / no-epe / psa
std::optional<Variant> ParseVariant(std::string_view name);

struct ModelGeometry {
  int vocab_size = 0;
  int width = 64;         // d
  int pdq_blocks = 4;     // N
  int text_blocks = 2;    // M
  int heads = 4;
  int prompt_len = 10;    // L_P
  int image_width = 32;   // d_img
  int raw_width = 16;     // d_raw
  int ffn_mult = 4;
  int max_len = 64;       // position table rows
  int energy_width = 0;   // d_e; 0 means d
  Variant variant = Variant::kFull;

  int EnergyWidth() const { return energy_width > 0 ? energy_width : width; }
  // Throws ConfigError naming the offending field.
  void Validate() const;

  friend bool operator==(const ModelGeometry&, const ModelGeometry&) = default;
};

enum class ForwardMode { kItm, kItc, kSpanTask };

struct ForwardCounters {
  int image_reads = 0;
  AttentionCounters attention;
};

struct ForwardOutput {
  Var s_out;         // L_T x d text-encoder rows
  Var visual_query;  // L_P x d (invalid for PSA)
  Var description;   // description-pass rows, when one ran
  Var energies;      // L_T x L_T (EPE variants)
  BoundaryLogits boundary;  // no-EPE variant
  Var itm_logits;    // 1 x 2
  Var image_cls;     // 1 x d
  Var text_cls;      // 1 x d
};

class DqpsaModel {
 public:
  // Parameters are drawn from Rng(seed) in declaration order.
  DqpsaModel(const ModelGeometry& geometry, std::uint64_t seed);

  DqpsaModel(const DqpsaModel&) = delete;
  DqpsaModel& operator=(const DqpsaModel&) = delete;
  DqpsaModel(DqpsaModel&&) = default;

  const ModelGeometry& geometry() const { return geometry_; }
  Variant variant() const { return geometry_.variant; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  bool has_image_path() const;   // full, no-EPE
  bool has_prefix() const;       // everything except PSA
  bool has_matching() const { return has_image_path(); }
  bool has_energy_head() const;  // everything except no-EPE
  const EpeParams& energy_head() const { return epe_; }
  const BoundaryHeadParams& boundary_head() const { return boundary_; }

  ForwardOutput Forward(Graph& g, const TaskInstance& instance,
                        ForwardMode mode,
                        ForwardCounters* counters = nullptr) const;

  // ---- building blocks ----
  // Frozen stub: raw [L_I x d_raw] -> [L_I x d_img], as a constant node.
  ImageFeatures EncodeImage(Graph& g, const Matrix& raw,
                            ForwardCounters* counters) const;
  // Prompt-only pass through the prompt-query stack (or the free query
  // tokens for no-PDQ). Invalid Var for PSA.
  Var VisualQuery(Graph& g, std::span<const int> prompt, const Matrix* image,
                  ForwardCounters* counters,
                  CrossAttentionTrace* trace = nullptr) const;
  // Description-only pass; returns all L_D rows.
  Var DescriptionPass(Graph& g, std::span<const int> description,
                      ForwardCounters* counters) const;
  // Joint prompt + description pass over the prompt-query stack.
  PdqOutput MatchPass(Graph& g, std::span<const int> prompt,
                      std::span<const int> description, const Matrix& image,
                      ForwardCounters* counters) const;
  Var ItmWeights(Graph& g) const;
  // Text encoder; returns the text rows S_O.
  Var EncodeText(Graph& g, Var visual_query, std::span<const int> prompt,
                 std::span<const int> text, ForwardCounters* counters) const;

  // Prompt ids padded with [PAD] (id 0) to L_P. Throws ConfigError if too long.
  std::vector<int> PadPrompt(std::span<const int> prompt) const;

 private:
  Var Embed(Graph& g, Parameter* table, Parameter* positions,
            std::span<const int> ids) const;

  ModelGeometry geometry_;
  ParamStore store_;
  int pad_id_ = 0;

  Parameter* image_stub_ = nullptr;
  Parameter* pdq_tokens_ = nullptr;
  Parameter* pdq_positions_ = nullptr;
  Parameter* free_queries_ = nullptr;
  std::vector<BlockParams> pdq_;
  Parameter* vq_proj_ = nullptr;
  Parameter* text_tokens_ = nullptr;
  Parameter* text_positions_ = nullptr;
  std::vector<BlockParams> text_;
  EpeParams epe_;
  BoundaryHeadParams boundary_;
  Parameter* w_itm_ = nullptr;
};

struct LossWeights {
  double itm = 1.0;  // lambda_1
  double itc = 1.0;  // lambda_2
  double epe = 1.0;  // lambda_3
};

struct LossTerms {
  double itm = 0.0;
  double itc = 0.0;
  double epe = 0.0;
  double total = 0.0;
};

// lambda_1 ITM + lambda_2 ITC + lambda_3 span loss, each averaged over the
// batch. A term with zero weight, or one the variant lacks, is not built
// and contributes 0. ITM negatives pair instance i's prompt and image with
// the description of instance (i + 1) mod B; pairs whose descriptions are
// identical are skipped.
Var TotalLoss(Graph& g, const DqpsaModel& model,
              std::span<const TaskInstance> batch, const LossWeights& weights,
              LossTerms* terms = nullptr, ForwardCounters* counters = nullptr);

// Span prediction by thresholding energies at 0 (or the boundary decode for
// no-EPE). `scores` receives, per span, its energy (EPE) or the negated
// start+end logit sum (no-EPE), so lower is always better.
std::vector<Span> PredictSpans(const DqpsaModel& model,
                               const TaskInstance& instance,
                               std::vector<double>* scores = nullptr,
                               ForwardCounters* counters = nullptr);

// Polarity for a MASC view: the best-scoring decoded single-token span in
// the candidate segment; neutral when none decodes there.
Polarity PredictPolarity(const DqpsaModel& model, const TaskInstance& masc);

// Polarity of an (extracted or gold) aspect of `example`. An aspect whose
// question does not fit in L_P tokens gets the neutral fallback.
Polarity PredictAspectPolarity(const DqpsaModel& model, const Dataset& dataset,
                               const Example& example, const Span& aspect);

// Aspect extraction followed by one polarity query per extracted aspect.
std::vector<Span> RunJmasa(const DqpsaModel& model, const Dataset& dataset,
                           const Example& example);

// Head-averaged weights of the last cross-attention layer for the MATE
// prompt of `example` (L_P x L_I). Requires an image path.
Matrix CrossAttentionMap(const DqpsaModel& model, const TaskInstance& instance);

}  // namespace dqpsa
