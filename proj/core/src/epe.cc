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

#include "dqpsa/epe.h"

#include <string>

#include "dqpsa/errors.h"

namespace dqpsa {

std::string_view PolarityCode(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return "POS";
    case Polarity::kNegative: return "NEG";
    case Polarity::kNeutral: return "NEU";
    case Polarity::kNone: return "NONE";
  }
  return "NONE";
}

std::optional<Polarity> ParsePolarityCode(std::string_view code) {
  if (code == "POS") return Polarity::kPositive;
  if (code == "NEG") return Polarity::kNegative;
  if (code == "NEU") return Polarity::kNeutral;
  if (code == "NONE") return Polarity::kNone;
  return std::nullopt;
}

SpanMatrix::SpanMatrix(int length) : length_(length), y_(length, length) {}

SpanMatrix SpanMatrix::FromSpans(int length, std::span<const Span> spans) {
  SpanMatrix m(length);
  for (const Span& s : spans) m.Set(s.start, s.end);
  return m;
}

bool SpanMatrix::Get(int i, int j) const {
  if (i < 0 || j < 0 || i >= length_ || j >= length_) {
    throw BoundsError("span index outside sequence");
  }
  return y_(i, j) != 0.0;
}

void SpanMatrix::Set(int i, int j, bool value) {
  if (i < 0 || i > j || j >= length_) {
    throw BoundsError("span (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") invalid for length " + std::to_string(length_));
  }
  y_(i, j) = value ? 1.0 : 0.0;
}

std::vector<Span> SpanMatrix::Spans() const {
  std::vector<Span> out;
  for (int i = 0; i < length_; ++i)
    for (int j = i; j < length_; ++j)
      if (y_(i, j) != 0.0) out.push_back({i, j});
  return out;
}

int SpanMatrix::Count() const {
  int n = 0;
  for (double v : y_.values()) n += v != 0.0;
  return n;
}

namespace {

Matrix UpperMask(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = 1.0;
  return m;
}

void RequireSquare(const Matrix& e) {
  if (e.rows() != e.cols()) {
    throw DimensionError("energy matrix must be square, got " + e.ShapeString());
  }
}

}  // namespace

Var ComponentEnergy(const EpeParams& params, Var states) {
  Graph& g = *states.graph();
  if (states.rows() < 1) throw DimensionError("energy over an empty sequence");
  Var start = MatMulNT(states, g.Param(*params.w_s));  // L x d_e
  Var end = MatMulNT(states, g.Param(*params.w_e));    // L x d_e
  Var pair = MatMulNT(start, end);                     // <W_S s_i, W_E s_j>
  Var mask = g.Constant(UpperMask(states.rows()));
  return Mul(Neg(pair), mask);
}

double SystemEnergy(const Matrix& energies, const SpanMatrix& y) {
  RequireSquare(energies);
  if (energies.rows() != y.length()) {
    throw DimensionError("energy and span matrices differ in length");
  }
  double total = 0.0;
  for (int i = 0; i < y.length(); ++i)
    for (int j = i; j < y.length(); ++j)
      if (y.Get(i, j)) total += energies(i, j);
  return total;
}

Var EpeLoss(Var energies, const SpanMatrix& y) {
  Graph& g = *energies.graph();
  const int n = energies.rows();
  RequireSquare(energies.value());
  if (n != y.length()) {
    throw DimensionError("energy " + energies.value().ShapeString() +
                         " vs span matrix of length " +
                         std::to_string(y.length()));
  }
  const Matrix mask = UpperMask(n);
  Matrix negatives = mask;
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    negatives[k] -= y.AsMatrix()[k];
  }
  // log x = log sigmoid(-E); log (1 - x) = log sigmoid(E).
  Var log_x = Log(Sigmoid(Neg(energies)));
  Var log_1mx = Log(Sigmoid(energies));
  Var pos = Mul(log_x, g.Constant(y.AsMatrix()));
  Var neg = Mul(log_1mx, g.Constant(std::move(negatives)));
  const double norm = 2.0 / (static_cast<double>(n) * (n + 1));
  return Scale(SumAll(Add(pos, neg)), -norm);
}

std::vector<Span> DecodeSpans(const Matrix& energies, double threshold) {
  RequireSquare(energies);
  std::vector<Span> out;
  for (int i = 0; i < energies.rows(); ++i)
    for (int j = i; j < energies.cols(); ++j)
      if (energies(i, j) < threshold) out.push_back({i, j});
  return out;
}

SpanMatrix BruteForceDecode(const Matrix& energies) {
  RequireSquare(energies);
  const int n = energies.rows();
  if (n > kBruteForceMaxLength) {
    throw UsageError("brute-force decode refuses L = " + std::to_string(n) +
                     " > " + std::to_string(kBruteForceMaxLength));
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) pairs.emplace_back(i, j);
  const int m = static_cast<int>(pairs.size());

  // Bit k of a mask selects pairs[k]; comparing bit sequences from k = 0
  // gives the lexicographic order.
  auto lex_less = [m](std::uint32_t a, std::uint32_t b) {
    for (int k = 0; k < m; ++k) {
      const bool ba = (a >> k) & 1U, bb = (b >> k) & 1U;
      if (ba != bb) return !ba;
    }
    return false;
  };

  std::uint32_t best = 0;
  double best_energy = 0.0;
  int best_count = 0;
  for (std::uint32_t mask = 1; mask < (1U << m); ++mask) {
    double e = 0.0;
    int count = 0;
    for (int k = 0; k < m; ++k) {
      if ((mask >> k) & 1U) {
        e += energies(pairs[k].first, pairs[k].second);
        ++count;
      }
    }
    const bool better =
        e < best_energy ||
        (e == best_energy &&
         (count < best_count || (count == best_count && lex_less(mask, best))));
    if (better) {
      best = mask;
      best_energy = e;
      best_count = count;
    }
  }
  SpanMatrix y(n);
  for (int k = 0; k < m; ++k)
    if ((best >> k) & 1U) y.Set(pairs[k].first, pairs[k].second);
  return y;
}

std::vector<Span> IndependentBoundaryDecode(std::span<const double> start_logits,
                                            std::span<const double> end_logits,
                                            double threshold) {
  if (start_logits.size() != end_logits.size()) {
    throw DimensionError("start and end logits differ in length");
  }
  const int n = static_cast<int>(start_logits.size());
  std::vector<bool> is_end(n), used(n, false);
  for (int j = 0; j < n; ++j) is_end[j] = end_logits[j] > threshold;
  std::vector<Span> out;
  for (int i = 0; i < n; ++i) {
    if (!(start_logits[i] > threshold)) continue;
    for (int j = i; j < n; ++j) {
      if (is_end[j] && !used[j]) {
        used[j] = true;
        out.push_back({i, j});
        break;
      }
    }
  }
  return out;
}

BoundaryLogits BoundaryScores(const BoundaryHeadParams& params, Var states) {
  Graph& g = *states.graph();
  BoundaryLogits out;
  out.start = AddRowBroadcast(MatMul(states, g.Param(*params.w_start)),
                              g.Param(*params.b_start));
  out.end = AddRowBroadcast(MatMul(states, g.Param(*params.w_end)),
                            g.Param(*params.b_end));
  return out;
}

Var BoundaryLoss(const BoundaryLogits& logits, std::span<const Span> gold) {
  Graph& g = *logits.start.graph();
  const int n = logits.start.rows();
  Matrix ys(n, 1), ye(n, 1), ns(n, 1, 1.0), ne(n, 1, 1.0);
  for (const Span& s : gold) {
    if (s.start < 0 || s.end >= n || s.start > s.end) {
      throw BoundsError("gold span outside sequence");
    }
    ys(s.start, 0) = 1.0;
    ns(s.start, 0) = 0.0;
    ye(s.end, 0) = 1.0;
    ne(s.end, 0) = 0.0;
  }
  auto bce = [&g](Var z, Matrix pos, Matrix neg) {
    Var lp = Mul(Log(Sigmoid(z)), g.Constant(std::move(pos)));
    Var ln = Mul(Log(Sigmoid(Neg(z))), g.Constant(std::move(neg)));
    return SumAll(Add(lp, ln));
  };
  Var total = Add(bce(logits.start, ys, ns), bce(logits.end, ye, ne));
  return Scale(total, -1.0 / (2.0 * n));
}

}  // namespace dqpsa
