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

// Attention primitives and the prompt-as-query block stack.
//
// Hidden states are L x d row-major, so projections are right-multiplied:
// Q = H * W_q. A cross-attention block lets only the prompt prefix
// H[0:prompt_len] query the image features; the remaining rows pass through
// the cross sub-layer untouched.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dqpsa/graph.h"
#include "dqpsa/params.h"
#include "dqpsa/rng.h"

namespace dqpsa {

struct AttentionParams {
  Parameter* w_q = nullptr;  // d x d
  Parameter* w_k = nullptr;  // d_kv x d
  Parameter* w_v = nullptr;  // d_kv x d
  Parameter* w_o = nullptr;  // d x d
  int heads = 1;
};

struct LayerNormParams {
  Parameter* gain = nullptr;  // 1 x d
  Parameter* bias = nullptr;  // 1 x d
};

struct FeedForwardParams {
  Parameter* w1 = nullptr;  // d x ffn
  Parameter* b1 = nullptr;  // 1 x ffn
  Parameter* w2 = nullptr;  // ffn x d
  Parameter* b2 = nullptr;  // 1 x d
};

struct BlockParams {
  AttentionParams self_attn;
  std::optional<AttentionParams> cross_attn;
  FeedForwardParams ffn;
  LayerNormParams ln_self;
  LayerNormParams ln_cross;
  LayerNormParams ln_ffn;

  bool has_cross() const { return cross_attn.has_value(); }
};

// Allocates a block's parameters in a fixed order: self-attention
// (q, k, v, o), then cross-attention (q, k, v, o) when requested, then FFN
// (w1, b1, w2, b2), then the layer norms.
BlockParams MakeBlock(ParamStore& store, const std::string& prefix,
                      const std::string& group, int width, int heads,
                      int ffn_width, std::optional<int> cross_kv_width,
                      Rng& rng);

enum class SequenceKind { kDescriptionOnly, kPromptOnly, kPromptPlusDescription };

struct SequenceState {
  Var hidden;  // L x d
  int prompt_len = 0;
  SequenceKind kind = SequenceKind::kDescriptionOnly;
};

// Throws ContractError if the invariants of SequenceState are violated.
void ValidateSequence(const SequenceState& s);

struct ImageFeatures {
  Var features;  // L_I x d_img
};

struct AttentionResult {
  Var output;
  Var weights;  // n_q x n_k, row-stochastic
};

// Instrumentation shared by a forward pass.
struct AttentionCounters {
  int self_attention_calls = 0;
  int cross_attention_calls = 0;
};

// Records the head-averaged weights of the most recent cross-attention.
struct CrossAttentionTrace {
  Matrix last_weights;  // prompt_len x L_I
  bool recorded = false;
};

// softmax(q k^T / sqrt(d_h)) v.
AttentionResult ScaledDotAttention(Var q, Var k, Var v);

// Multi-head self-attention over the whole sequence; returns L x d.
Var SelfAttention(const AttentionParams& params, Var hidden,
                  AttentionCounters* counters = nullptr);

// Prompt-prefix cross-attention. Returns concat(attended prompt rows,
// hidden[prompt_len:]) together with the head-averaged weights.
struct CrossAttentionResult {
  Var output;           // L x d
  Var attended;         // prompt_len x d (the attended prefix alone)
  Matrix mean_weights;  // prompt_len x L_I
};
CrossAttentionResult I2TCrossAttention(const AttentionParams& params,
                                       const SequenceState& state,
                                       const ImageFeatures& image,
                                       AttentionCounters* counters = nullptr);

// Cross sub-layer with residual + post-norm on the prompt rows only:
// concat(LN(H[:P] + I2T(H)), H[P:]).
Var CrossSublayer(const BlockParams& block, const SequenceState& state,
                  const ImageFeatures& image, AttentionCounters* counters,
                  CrossAttentionTrace* trace);

// h <- LN(h + SelfAttn(h)); cross sub-layer when the block has one and the
// sequence carries a prompt; h <- LN(h + FFN(h)).
SequenceState BlockForward(const BlockParams& block, SequenceState state,
                           const ImageFeatures* image,
                           AttentionCounters* counters = nullptr,
                           CrossAttentionTrace* trace = nullptr);

struct PdqOutput {
  Var visual_query;  // prompt_len x d
  Var rest;          // (L - prompt_len) x d
};

PdqOutput PdqForward(std::span<const BlockParams> blocks, SequenceState state,
                     const ImageFeatures* image,
                     AttentionCounters* counters = nullptr,
                     CrossAttentionTrace* trace = nullptr);

}  // namespace dqpsa
