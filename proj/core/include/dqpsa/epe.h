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

// Energy-based pairwise span scoring.
//
// Every candidate span (i, j), i <= j, gets a pairing energy
//   E[i, j] = -<W_S s_i, W_E s_j>
// and a span set Y has system energy sum_{i<=j} E[i, j] y_ij. Because that
// sum is separable over pairs, its unconstrained minimiser over binary Y
// keeps exactly the negative-energy pairs.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dqpsa/graph.h"
#include "dqpsa/params.h"
#include "dqpsa/span.h"

namespace dqpsa {

struct EpeParams {
  Parameter* w_s = nullptr;  // d_e x d
  Parameter* w_e = nullptr;  // d_e x d
};

// Upper-triangular 0/1 indicator matrix over a length-L sequence.
class SpanMatrix {
 public:
  explicit SpanMatrix(int length = 0);
  static SpanMatrix FromSpans(int length, std::span<const Span> spans);

  int length() const { return length_; }
  bool Get(int i, int j) const;
  // Throws BoundsError unless 0 <= i <= j < length.
  void Set(int i, int j, bool value = true);
  std::vector<Span> Spans() const;  // row-major order
  int Count() const;
  // 0/1 doubles with zeros below the diagonal.
  const Matrix& AsMatrix() const { return y_; }

  friend bool operator==(const SpanMatrix&, const SpanMatrix&) = default;

 private:
  int length_;
  Matrix y_;
};

// L x L energies with the strict lower triangle zeroed.
Var ComponentEnergy(const EpeParams& params, Var states);

double SystemEnergy(const Matrix& energies, const SpanMatrix& y);

// -(2 / (L (L + 1))) sum_{i<=j} [y log x + (1 - y) log(1 - x)],
// x = sigmoid(-E) with logs clamped at 1e-12.
Var EpeLoss(Var energies, const SpanMatrix& y);

// {(i, j) : i <= j, E[i, j] < threshold}, row-major order.
std::vector<Span> DecodeSpans(const Matrix& energies, double threshold = 0.0);

// Exhaustive argmin of SystemEnergy over all upper-triangular Y. Ties go to
// the Y with fewest spans, then the lexicographically smallest bit pattern
// (row-major pair order). Refuses L > kBruteForceMaxLength.
inline constexpr int kBruteForceMaxLength = 5;
SpanMatrix BruteForceDecode(const Matrix& energies);

// No-pairing baseline: starts {i : start_i > t}, ends {j : end_j > t}; each
// start (left to right) takes the nearest unused end j >= i.
std::vector<Span> IndependentBoundaryDecode(std::span<const double> start_logits,
                                            std::span<const double> end_logits,
                                            double threshold = 0.0);

// Linear start/end scorers used by the no-pairing variant.
struct BoundaryHeadParams {
  Parameter* w_start = nullptr;  // d x 1
  Parameter* b_start = nullptr;  // 1 x 1
  Parameter* w_end = nullptr;    // d x 1
  Parameter* b_end = nullptr;    // 1 x 1
};

struct BoundaryLogits {
  Var start;  // L x 1
  Var end;    // L x 1
};
BoundaryLogits BoundaryScores(const BoundaryHeadParams& params, Var states);

// Mean binary cross-entropy over start and end positions of the gold spans.
Var BoundaryLoss(const BoundaryLogits& logits, std::span<const Span> gold);

}  // namespace dqpsa
