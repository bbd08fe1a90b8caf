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

#include "dqpsa/attention.h"

#include <cmath>
#include <string>

#include "dqpsa/errors.h"

namespace dqpsa {
namespace {

AttentionParams MakeAttention(ParamStore& store, const std::string& prefix,
                              const std::string& group, int width, int kv_width,
                              int heads, Rng& rng) {
  AttentionParams a;
  a.w_q = &store.AddXavier(prefix + ".w_q", group, width, width, rng);
  a.w_k = &store.AddXavier(prefix + ".w_k", group, kv_width, width, rng);
  a.w_v = &store.AddXavier(prefix + ".w_v", group, kv_width, width, rng);
  a.w_o = &store.AddXavier(prefix + ".w_o", group, width, width, rng);
  a.heads = heads;
  return a;
}

LayerNormParams MakeNorm(ParamStore& store, const std::string& prefix,
                         const std::string& group, int width) {
  LayerNormParams n;
  n.gain = &store.AddConstant(prefix + ".gain", group, 1, width, 1.0);
  n.bias = &store.AddConstant(prefix + ".bias", group, 1, width, 0.0);
  return n;
}

void CheckHeads(int width, int heads) {
  if (heads < 1 || width % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) +
                      " does not divide model width " + std::to_string(width));
  }
}

Var Norm(const LayerNormParams& ln, Var x) {
  Graph& g = *x.graph();
  return LayerNorm(x, g.Param(*ln.gain), g.Param(*ln.bias));
}

// Projects, splits into heads, attends, merges and output-projects.
// Returns the merged output and (optionally) the head-averaged weights.
Var MultiHead(const AttentionParams& p, Var query_src, Var kv_src,
              Matrix* mean_weights) {
  Graph& g = *query_src.graph();
  const int width = p.w_q->value.cols();
  CheckHeads(width, p.heads);
  if (query_src.cols() != p.w_q->value.rows()) {
    throw DimensionError("attention query width " +
                         std::to_string(query_src.cols()) + " != " +
                         std::to_string(p.w_q->value.rows()));
  }
  if (kv_src.cols() != p.w_k->value.rows()) {
    throw DimensionError("attention key/value width " +
                         std::to_string(kv_src.cols()) + " != " +
                         std::to_string(p.w_k->value.rows()));
  }
  Var q = MatMul(query_src, g.Param(*p.w_q));
  Var k = MatMul(kv_src, g.Param(*p.w_k));
  Var v = MatMul(kv_src, g.Param(*p.w_v));
  const int dh = width / p.heads;
  std::vector<Var> heads;
  heads.reserve(p.heads);
  if (mean_weights != nullptr) {
    *mean_weights = Matrix(query_src.rows(), kv_src.rows());
  }
  for (int h = 0; h < p.heads; ++h) {
    Var qh = p.heads == 1 ? q : Slice(q, h * dh, (h + 1) * dh, 1);
    Var kh = p.heads == 1 ? k : Slice(k, h * dh, (h + 1) * dh, 1);
    Var vh = p.heads == 1 ? v : Slice(v, h * dh, (h + 1) * dh, 1);
    AttentionResult r = ScaledDotAttention(qh, kh, vh);
    heads.push_back(r.output);
    if (mean_weights != nullptr) {
      const Matrix& w = r.weights.value();
      for (std::size_t i = 0; i < w.size(); ++i) {
        (*mean_weights)[i] += w[i] / p.heads;
      }
    }
  }
  Var merged = p.heads == 1 ? heads[0] : ConcatCols(heads);
  return MatMul(merged, g.Param(*p.w_o));
}

}  // namespace

BlockParams MakeBlock(ParamStore& store, const std::string& prefix,
                      const std::string& group, int width, int heads,
                      int ffn_width, std::optional<int> cross_kv_width,
                      Rng& rng) {
  CheckHeads(width, heads);
  BlockParams b;
  b.self_attn =
      MakeAttention(store, prefix + ".self", group, width, width, heads, rng);
  if (cross_kv_width) {
    b.cross_attn = MakeAttention(store, prefix + ".cross", group, width,
                                 *cross_kv_width, heads, rng);
  }
  b.ffn.w1 = &store.AddXavier(prefix + ".ffn.w1", group, width, ffn_width, rng);
  b.ffn.b1 = &store.AddConstant(prefix + ".ffn.b1", group, 1, ffn_width, 0.0);
  b.ffn.w2 = &store.AddXavier(prefix + ".ffn.w2", group, ffn_width, width, rng);
  b.ffn.b2 = &store.AddConstant(prefix + ".ffn.b2", group, 1, width, 0.0);
  b.ln_self = MakeNorm(store, prefix + ".ln_self", group, width);
  if (cross_kv_width) {
    b.ln_cross = MakeNorm(store, prefix + ".ln_cross", group, width);
  }
  b.ln_ffn = MakeNorm(store, prefix + ".ln_ffn", group, width);
  return b;
}

void ValidateSequence(const SequenceState& s) {
  const int len = s.hidden.rows();
  if (s.prompt_len < 0 || s.prompt_len > len) {
    throw ContractError("prompt length " + std::to_string(s.prompt_len) +
                        " outside sequence of length " + std::to_string(len));
  }
  if (s.kind == SequenceKind::kDescriptionOnly && s.prompt_len != 0) {
    throw ContractError("description-only sequence with a prompt prefix");
  }
}

AttentionResult ScaledDotAttention(Var q, Var k, Var v) {
  if (q.cols() < 1) throw DimensionError("attention head width must be >= 1");
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: " + std::to_string(k.rows()) +
                         " keys but " + std::to_string(v.rows()) + " values");
  }
  if (q.cols() != k.cols()) {
    throw DimensionError("attention: query width " + std::to_string(q.cols()) +
                         " != key width " + std::to_string(k.cols()));
  }
  Var scores = Scale(MatMulNT(q, k), 1.0 / std::sqrt(double(q.cols())));
  Var weights = SoftmaxRows(scores);
  return {MatMul(weights, v), weights};
}

Var SelfAttention(const AttentionParams& params, Var hidden,
                  AttentionCounters* counters) {
  if (counters) ++counters->self_attention_calls;
  return MultiHead(params, hidden, hidden, nullptr);
}

CrossAttentionResult I2TCrossAttention(const AttentionParams& params,
                                       const SequenceState& state,
                                       const ImageFeatures& image,
                                       AttentionCounters* counters) {
  ValidateSequence(state);
  if (state.kind == SequenceKind::kDescriptionOnly) {
    throw ContractError(
        "image cross-attention accepts only prompt-carrying sequences");
  }
  if (state.prompt_len < 1) {
    throw ContractError("image cross-attention needs a non-empty prompt");
  }
  if (!image.features.valid()) {
    throw ContractError("image cross-attention without image features");
  }
  if (counters) ++counters->cross_attention_calls;
  const int len = state.hidden.rows();
  Var prompt = state.prompt_len == len
                   ? state.hidden
                   : Slice(state.hidden, 0, state.prompt_len, 0);
  CrossAttentionResult out;
  Var attended = MultiHead(params, prompt, image.features, &out.mean_weights);
  out.attended = attended;
  if (state.prompt_len == len) {
    out.output = attended;
  } else {
    out.output =
        Concat(attended, Slice(state.hidden, state.prompt_len, len, 0), 0);
  }
  return out;
}

Var CrossSublayer(const BlockParams& block, const SequenceState& state,
                  const ImageFeatures& image, AttentionCounters* counters,
                  CrossAttentionTrace* trace) {
  if (!block.cross_attn) throw ContractError("block has no cross-attention");
  CrossAttentionResult r =
      I2TCrossAttention(*block.cross_attn, state, image, counters);
  if (trace) {
    trace->last_weights = std::move(r.mean_weights);
    trace->recorded = true;
  }
  const int len = state.hidden.rows();
  const int p = state.prompt_len;
  Var prompt = p == len ? state.hidden : Slice(state.hidden, 0, p, 0);
  Var normed = Norm(block.ln_cross, Add(prompt, r.attended));
  if (p == len) return normed;
  return Concat(normed, Slice(state.hidden, p, len, 0), 0);
}

SequenceState BlockForward(const BlockParams& block, SequenceState state,
                           const ImageFeatures* image,
                           AttentionCounters* counters,
                           CrossAttentionTrace* trace) {
  ValidateSequence(state);
  Graph& g = *state.hidden.graph();
  Var h = state.hidden;
  h = Norm(block.ln_self, Add(h, SelfAttention(block.self_attn, h, counters)));
  state.hidden = h;
  if (block.has_cross() && state.kind != SequenceKind::kDescriptionOnly) {
    if (image == nullptr || !image->features.valid()) {
      throw ContractError("cross-attention block needs image features");
    }
    state.hidden = CrossSublayer(block, state, *image, counters, trace);
  }
  Var ff = AddRowBroadcast(MatMul(state.hidden, g.Param(*block.ffn.w1)),
                           g.Param(*block.ffn.b1));
  ff = AddRowBroadcast(MatMul(Gelu(ff), g.Param(*block.ffn.w2)),
                       g.Param(*block.ffn.b2));
  state.hidden = Norm(block.ln_ffn, Add(state.hidden, ff));
  return state;
}

PdqOutput PdqForward(std::span<const BlockParams> blocks, SequenceState state,
                     const ImageFeatures* image, AttentionCounters* counters,
                     CrossAttentionTrace* trace) {
  if (blocks.empty()) throw ConfigError("prompt-query stack needs >= 1 block");
  for (const BlockParams& b : blocks) {
    state = BlockForward(b, state, image, counters, trace);
  }
  const int len = state.hidden.rows();
  PdqOutput out;
  out.visual_query = Slice(state.hidden, 0, state.prompt_len, 0);
  out.rest = Slice(state.hidden, state.prompt_len, len, 0);
  return out;
}

}  // namespace dqpsa
