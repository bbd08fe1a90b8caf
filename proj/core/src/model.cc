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

#include "dqpsa/model.h"

#include <string>

#include "dqpsa/errors.h"
#include "dqpsa/objectives.h"
#include "dqpsa/rng.h"

namespace dqpsa {

std::string_view VariantName(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoPdq: return "no-pdq";
    case Variant::kNoEpe: return "no-epe";
    case Variant::kPsa: return "psa";
  }
  return "full";
}

std::optional<Variant> ParseVariant(std::string_view name) {
  if (name == "full") return Variant::kFull;
  if (name == "no-pdq") return Variant::kNoPdq;
  if (name == "no-epe") return Variant::kNoEpe;
  if (name == "psa") return Variant::kPsa;
  return std::nullopt;
}

void ModelGeometry::Validate() const {
  auto positive = [](int v, const char* field) {
    if (v < 1) {
      throw ConfigError(std::string(field) + " must be >= 1, got " +
                        std::to_string(v));
    }
  };
  positive(vocab_size, "vocab_size");
  positive(width, "d");
  positive(pdq_blocks, "pdq_blocks");
  positive(text_blocks, "text_blocks");
  positive(heads, "heads");
  positive(prompt_len, "prompt_len");
  positive(image_width, "d_img");
  positive(raw_width, "d_raw");
  positive(ffn_mult, "ffn_mult");
  positive(max_len, "max_len");
  if (energy_width < 0) throw ConfigError("d_e must be >= 0");
  if (width % heads != 0) {
    throw ConfigError("heads = " + std::to_string(heads) +
                      " does not divide d = " + std::to_string(width));
  }
  if (max_len <= 2 * prompt_len) {
    throw ConfigError("max_len must exceed 2 * prompt_len");
  }
}

DqpsaModel::DqpsaModel(const ModelGeometry& geometry, std::uint64_t seed)
    : geometry_(geometry) {
  geometry_.Validate();
  const ModelGeometry& g = geometry_;
  const int d = g.width;
  Rng rng(seed);

  if (has_image_path()) {
    image_stub_ = &store_.AddXavier("image_stub.proj", "image_stub",
                                    g.raw_width, g.image_width, rng);
    pdq_tokens_ =
        &store_.AddXavier("pdq.tokens", "pdq", g.vocab_size, d, rng);
    pdq_positions_ =
        &store_.AddXavier("pdq.positions", "pdq", g.max_len, d, rng);
    for (int i = 0; i < g.pdq_blocks; ++i) {
      std::optional<int> cross;
      if (i % 2 == 0) cross = g.image_width;
      pdq_.push_back(MakeBlock(store_, "pdq.block" + std::to_string(i), "pdq",
                               d, g.heads, g.ffn_mult * d, cross, rng));
    }
  } else if (g.variant == Variant::kNoPdq) {
    free_queries_ =
        &store_.AddXavier("pdq.queries", "pdq", g.prompt_len, d, rng);
  }
  if (has_prefix()) {
    vq_proj_ = &store_.AddXavier("pdq.vq_proj", "pdq", d, d, rng);
  }

  text_tokens_ = &store_.AddXavier("text.tokens", "text", g.vocab_size, d, rng);
  text_positions_ =
      &store_.AddXavier("text.positions", "text", g.max_len, d, rng);
  for (int i = 0; i < g.text_blocks; ++i) {
    text_.push_back(MakeBlock(store_, "text.block" + std::to_string(i), "text",
                              d, g.heads, g.ffn_mult * d, std::nullopt, rng));
  }

  if (has_energy_head()) {
    epe_.w_s = &store_.AddXavier("epe.w_s", "epe", g.EnergyWidth(), d, rng);
    epe_.w_e = &store_.AddXavier("epe.w_e", "epe", g.EnergyWidth(), d, rng);
  } else {
    boundary_.w_start = &store_.AddXavier("epe.w_start", "epe", d, 1, rng);
    boundary_.b_start = &store_.AddConstant("epe.b_start", "epe", 1, 1, 0.0);
    boundary_.w_end = &store_.AddXavier("epe.w_end", "epe", d, 1, rng);
    boundary_.b_end = &store_.AddConstant("epe.b_end", "epe", 1, 1, 0.0);
  }

  if (has_matching()) {
    w_itm_ = &store_.AddXavier("heads.itm", "heads", 2, d, rng);
  }
}

bool DqpsaModel::has_image_path() const {
  return geometry_.variant == Variant::kFull ||
         geometry_.variant == Variant::kNoEpe;
}

bool DqpsaModel::has_prefix() const {
  return geometry_.variant != Variant::kPsa;
}

bool DqpsaModel::has_energy_head() const {
  return geometry_.variant != Variant::kNoEpe;
}

std::vector<int> DqpsaModel::PadPrompt(std::span<const int> prompt) const {
  if (static_cast<int>(prompt.size()) > geometry_.prompt_len) {
    throw ConfigError("prompt of " + std::to_string(prompt.size()) +
                      " tokens exceeds prompt_len = " +
                      std::to_string(geometry_.prompt_len));
  }
  std::vector<int> out(prompt.begin(), prompt.end());
  out.resize(geometry_.prompt_len, pad_id_);
  return out;
}

Var DqpsaModel::Embed(Graph& g, Parameter* table, Parameter* positions,
                      std::span<const int> ids) const {
  const int n = static_cast<int>(ids.size());
  if (n > geometry_.max_len) {
    throw ConfigError("sequence of " + std::to_string(n) +
                      " tokens exceeds max_len = " +
                      std::to_string(geometry_.max_len));
  }
  Var tokens = EmbeddingLookup(g.Param(*table), ids);
  return Add(tokens, Slice(g.Param(*positions), 0, n, 0));
}

ImageFeatures DqpsaModel::EncodeImage(Graph& g, const Matrix& raw,
                                      ForwardCounters* counters) const {
  if (!has_image_path()) {
    throw ContractError(std::string(VariantName(variant())) +
                        " variant has no image path");
  }
  if (raw.cols() != geometry_.raw_width) {
    throw DimensionError("image " + raw.ShapeString() + " vs d_raw = " +
                         std::to_string(geometry_.raw_width));
  }
  if (counters) ++counters->image_reads;
  // The stub is frozen, so its output enters the graph as a constant.
  Matrix features(raw.rows(), geometry_.image_width);
  MatMulInto(raw, image_stub_->value, features);
  return ImageFeatures{g.Constant(std::move(features))};
}

Var DqpsaModel::VisualQuery(Graph& g, std::span<const int> prompt,
                            const Matrix* image, ForwardCounters* counters,
                            CrossAttentionTrace* trace) const {
  switch (variant()) {
    case Variant::kPsa:
      return Var();
    case Variant::kNoPdq:
      return g.Param(*free_queries_);
    case Variant::kFull:
    case Variant::kNoEpe:
      break;
  }
  if (image == nullptr) throw UsageError("instance has no image");
  const std::vector<int> padded = PadPrompt(prompt);
  ImageFeatures features = EncodeImage(g, *image, counters);
  SequenceState state{Embed(g, pdq_tokens_, pdq_positions_, padded),
                      geometry_.prompt_len, SequenceKind::kPromptOnly};
  return PdqForward(pdq_, state, &features,
                    counters ? &counters->attention : nullptr, trace)
      .visual_query;
}

Var DqpsaModel::DescriptionPass(Graph& g, std::span<const int> description,
                                ForwardCounters* counters) const {
  if (!has_image_path()) {
    throw ContractError("description pass needs the prompt-query stack");
  }
  if (description.empty()) throw UsageError("empty description");
  SequenceState state{Embed(g, pdq_tokens_, pdq_positions_, description), 0,
                      SequenceKind::kDescriptionOnly};
  return PdqForward(pdq_, state, nullptr,
                    counters ? &counters->attention : nullptr)
      .rest;
}

PdqOutput DqpsaModel::MatchPass(Graph& g, std::span<const int> prompt,
                                std::span<const int> description,
                                const Matrix& image,
                                ForwardCounters* counters) const {
  if (!has_image_path()) {
    throw ContractError("matching pass needs the prompt-query stack");
  }
  std::vector<int> ids = PadPrompt(prompt);
  ids.insert(ids.end(), description.begin(), description.end());
  ImageFeatures features = EncodeImage(g, image, counters);
  SequenceState state{Embed(g, pdq_tokens_, pdq_positions_, ids),
                      geometry_.prompt_len,
                      SequenceKind::kPromptPlusDescription};
  return PdqForward(pdq_, state, &features,
                    counters ? &counters->attention : nullptr);
}

Var DqpsaModel::ItmWeights(Graph& g) const {
  if (w_itm_ == nullptr) throw ContractError("variant has no matching head");
  return g.Param(*w_itm_);
}

Var DqpsaModel::EncodeText(Graph& g, Var visual_query,
                           std::span<const int> prompt,
                           std::span<const int> text,
                           ForwardCounters* counters) const {
  if (text.empty()) throw UsageError("empty text");
  std::vector<int> ids = PadPrompt(prompt);
  ids.insert(ids.end(), text.begin(), text.end());
  const int prefix = has_prefix() ? geometry_.prompt_len : 0;
  const int len = prefix + static_cast<int>(ids.size());
  if (len > geometry_.max_len) {
    throw ConfigError("text encoder input of " + std::to_string(len) +
                      " rows exceeds max_len = " +
                      std::to_string(geometry_.max_len));
  }
  Var x = EmbeddingLookup(g.Param(*text_tokens_), ids);
  if (has_prefix()) {
    if (!visual_query.valid()) throw UsageError("missing visual query");
    x = Concat(MatMul(visual_query, g.Param(*vq_proj_)), x, 0);
  }
  x = Add(x, Slice(g.Param(*text_positions_), 0, len, 0));
  SequenceState state{x, 0, SequenceKind::kDescriptionOnly};
  for (const BlockParams& b : text_) {
    state = BlockForward(b, state, nullptr,
                         counters ? &counters->attention : nullptr);
  }
  return Slice(state.hidden, len - static_cast<int>(text.size()), len, 0);
}

ForwardOutput DqpsaModel::Forward(Graph& g, const TaskInstance& instance,
                                  ForwardMode mode,
                                  ForwardCounters* counters) const {
  ForwardOutput out;
  switch (mode) {
    case ForwardMode::kSpanTask: {
      if (instance.prompt.empty()) throw UsageError("span task needs a prompt");
      out.visual_query =
          VisualQuery(g, instance.prompt, instance.image, counters);
      out.s_out = EncodeText(g, out.visual_query, instance.prompt,
                             instance.text, counters);
      if (has_energy_head()) {
        out.energies = ComponentEnergy(epe_, out.s_out);
      } else {
        out.boundary = BoundaryScores(boundary_, out.s_out);
      }
      return out;
    }
    case ForwardMode::kItc: {
      if (!has_matching()) throw UsageError("variant has no contrast path");
      out.visual_query =
          VisualQuery(g, instance.prompt, instance.image, counters);
      out.description = DescriptionPass(g, instance.description, counters);
      out.image_cls = Slice(out.visual_query, 0, 1, 0);
      out.text_cls = Slice(out.description, 0, 1, 0);
      return out;
    }
    case ForwardMode::kItm: {
      if (!has_matching()) throw UsageError("variant has no matching path");
      if (instance.image == nullptr) throw UsageError("instance has no image");
      PdqOutput joint = MatchPass(g, instance.prompt, instance.description,
                                  *instance.image, counters);
      out.visual_query = joint.visual_query;
      out.description = joint.rest;
      out.itm_logits =
          ItmLogits(ItmWeights(g), joint.visual_query, joint.rest);
      return out;
    }
  }
  throw UsageError("unknown forward mode");
}

// ------------------------------------------------------------------ losses

namespace {

Var SumVars(Graph& g, const std::vector<Var>& terms) {
  if (terms.empty()) return g.Constant(Matrix(1, 1));
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = Add(total, terms[i]);
  return total;
}

}  // namespace

Var TotalLoss(Graph& g, const DqpsaModel& model,
              std::span<const TaskInstance> batch, const LossWeights& weights,
              LossTerms* terms, ForwardCounters* counters) {
  if (batch.empty()) throw UsageError("empty batch");
  if (weights.itm < 0 || weights.itc < 0 || weights.epe < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  const int b = static_cast<int>(batch.size());
  const bool want_span = weights.epe > 0.0;
  const bool want_itc = model.has_matching() && weights.itc > 0.0;
  const bool want_itm = model.has_matching() && weights.itm > 0.0;

  std::vector<Var> span_losses, image_cls, text_cls;
  for (const TaskInstance& inst : batch) {
    if (!want_span && !want_itc) break;
    Var vq = model.VisualQuery(g, inst.prompt, inst.image, counters);
    if (want_span) {
      Var s = model.EncodeText(g, vq, inst.prompt, inst.text, counters);
      const int len = s.rows();
      if (model.has_energy_head()) {
        Var e = ComponentEnergy(model.energy_head(), s);
        span_losses.push_back(EpeLoss(e, SpanMatrix::FromSpans(len, inst.gold)));
      } else {
        span_losses.push_back(BoundaryLoss(
            BoundaryScores(model.boundary_head(), s), inst.gold));
      }
    }
    if (want_itc) {
      image_cls.push_back(Slice(vq, 0, 1, 0));
      text_cls.push_back(
          Slice(model.DescriptionPass(g, inst.description, counters), 0, 1, 0));
    }
  }

  std::vector<Var> weighted;
  LossTerms t;
  if (want_span) {
    Var span = Scale(SumVars(g, span_losses), 1.0 / b);
    t.epe = span.value()(0, 0);
    weighted.push_back(Scale(span, weights.epe));
  }
  if (want_itc) {
    ContrastBatch cb{ConcatRows(image_cls), ConcatRows(text_cls)};
    Var itc = ItcLoss(cb);
    t.itc = itc.value()(0, 0);
    weighted.push_back(Scale(itc, weights.itc));
  }
  if (want_itm) {
    MatchBatch mb;
    for (int i = 0; i < b; ++i) {
      const TaskInstance& inst = batch[i];
      if (inst.image == nullptr) throw UsageError("instance has no image");
      PdqOutput pos = model.MatchPass(g, inst.prompt, inst.description,
                                      *inst.image, counters);
      mb.visual_query.push_back(pos.visual_query);
      mb.description.push_back(pos.rest);
      mb.labels.push_back(1);
      if (b < 2) continue;
      const TaskInstance& next = batch[(i + 1) % b];
      if (next.description == inst.description) continue;
      PdqOutput neg = model.MatchPass(g, inst.prompt, next.description,
                                      *inst.image, counters);
      mb.visual_query.push_back(neg.visual_query);
      mb.description.push_back(neg.rest);
      mb.labels.push_back(0);
    }
    Var itm = ItmLoss(mb, model.ItmWeights(g));
    t.itm = itm.value()(0, 0);
    weighted.push_back(Scale(itm, weights.itm));
  }
  Var total = SumVars(g, weighted);
  t.total = total.value()(0, 0);
  if (terms) *terms = t;
  return total;
}

// -------------------------------------------------------------- inference

std::vector<Span> PredictSpans(const DqpsaModel& model,
                               const TaskInstance& instance,
                               std::vector<double>* scores,
                               ForwardCounters* counters) {
  Graph g(/*record_gradients=*/false);
  ForwardOutput out =
      model.Forward(g, instance, ForwardMode::kSpanTask, counters);
  std::vector<Span> spans;
  if (scores) scores->clear();
  if (model.has_energy_head()) {
    const Matrix& e = out.energies.value();
    spans = DecodeSpans(e);
    if (scores) {
      for (const Span& s : spans) scores->push_back(e(s.start, s.end));
    }
  } else {
    const Matrix& start = out.boundary.start.value();
    const Matrix& end = out.boundary.end.value();
    spans = IndependentBoundaryDecode(start.values(), end.values());
    if (scores) {
      for (const Span& s : spans) {
        scores->push_back(-(start(s.start, 0) + end(s.end, 0)));
      }
    }
  }
  return spans;
}

Polarity PredictPolarity(const DqpsaModel& model, const TaskInstance& masc) {
  if (masc.task != TaskKind::kMasc || masc.candidate_offset < 0) {
    throw UsageError("PredictPolarity needs a MASC instance");
  }
  static constexpr Polarity kOrder[3] = {
      Polarity::kPositive, Polarity::kNegative, Polarity::kNeutral};
  std::vector<double> scores;
  const std::vector<Span> spans = PredictSpans(model, masc, &scores);
  int best = -1;
  double best_score = 0.0;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const int rel = spans[k].start - masc.candidate_offset;
    if (spans[k].start != spans[k].end || rel < 0 || rel > 2) continue;
    if (best < 0 || scores[k] < best_score) {
      best = rel;
      best_score = scores[k];
    }
  }
  return best < 0 ? Polarity::kNeutral : kOrder[best];
}

Polarity PredictAspectPolarity(const DqpsaModel& model, const Dataset& dataset,
                               const Example& example, const Span& aspect) {
  TaskInstance masc =
      MascView(dataset, example, aspect, Polarity::kNone, false);
  if (static_cast<int>(masc.prompt.size()) > model.geometry().prompt_len) {
    return Polarity::kNeutral;
  }
  return PredictPolarity(model, masc);
}

std::vector<Span> RunJmasa(const DqpsaModel& model, const Dataset& dataset,
                           const Example& example) {
  std::vector<Span> out;
  for (const Span& aspect : PredictSpans(model, MateView(dataset, example))) {
    out.push_back({aspect.start, aspect.end,
                   PredictAspectPolarity(model, dataset, example, aspect)});
  }
  return out;
}

Matrix CrossAttentionMap(const DqpsaModel& model,
                         const TaskInstance& instance) {
  if (!model.has_image_path()) {
    throw UsageError(std::string(VariantName(model.variant())) +
                     " variant has no cross-attention");
  }
  Graph g(/*record_gradients=*/false);
  CrossAttentionTrace trace;
  model.VisualQuery(g, instance.prompt, instance.image, nullptr, &trace);
  return trace.last_weights;
}

}  // namespace dqpsa
