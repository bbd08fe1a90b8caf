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


#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dqpsa/epe.h"
#include "dqpsa/errors.h"
#include "dqpsa/gradcheck.h"
#include "test_util.h"

namespace dqpsa {
namespace {

using testing::MakeParam;
using testing::RandomMatrix;

const double kLn2 = std::log(2.0);

// Upper-triangular energies uniform(-1, 1), redrawn on an exact zero.
Matrix RandomEnergies(Rng& rng, int n) {
  Matrix e(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double v = 0.0;
      while (v == 0.0) v = rng.Uniform(-1, 1);
      e(i, j) = v;
    }
  }
  return e;
}

SpanMatrix RandomSpanMatrix(Rng& rng, int n) {
  SpanMatrix y(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (rng.Bernoulli(0.3)) y.Set(i, j);
  return y;
}

double LossValue(const Matrix& e, const SpanMatrix& y) {
  Graph g;
  return EpeLoss(g.Constant(e), y).value()(0, 0);
}

TEST(SpanMatrixTest, RejectsLowerTriangleAndOutOfRange) {
  SpanMatrix y(3);
  EXPECT_THROW(y.Set(2, 1), BoundsError);
  EXPECT_THROW(y.Set(0, 3), BoundsError);
  y.Set(0, 2);
  EXPECT_EQ(y.Spans(), (std::vector<Span>{{0, 2}}));
  EXPECT_EQ(y.Count(), 1);
}

TEST(ComponentEnergyTest, IdentityProjectionsOnUnitVector) {
  auto ws = MakeParam("ws", Matrix::Identity(3));
  auto we = MakeParam("we", Matrix::Identity(3));
  Graph g;
  const Matrix e = ComponentEnergy({ws.get(), we.get()},
                                   g.Constant(Matrix{{1, 0, 0}, {1, 0, 0}})).value();
  EXPECT_EQ(e(0, 0), -1.0);
  EXPECT_EQ(e(0, 1), -1.0);
  EXPECT_EQ(e(1, 1), -1.0);
  EXPECT_EQ(e(1, 0), 0.0);
}

TEST(ComponentEnergyTest, ZeroStartProjectionGivesZeroEnergies) {
  Rng rng(1);
  auto ws = MakeParam("ws", Matrix(3, 3));
  auto we = MakeParam("we", RandomMatrix(rng, 3, 3));
  Graph g;
  const Matrix e = ComponentEnergy({ws.get(), we.get()},
                                   g.Constant(RandomMatrix(rng, 4, 3))).value();
  for (double v : e.values()) EXPECT_EQ(v, 0.0);
}

TEST(ComponentEnergyTest, MatchesLoopOracle) {
  Rng rng(2);
  auto ws = MakeParam("ws", RandomMatrix(rng, 3, 3));
  auto we = MakeParam("we", RandomMatrix(rng, 3, 3));
  const Matrix s = RandomMatrix(rng, 2, 3);
  Graph g;
  const Matrix e = ComponentEnergy({ws.get(), we.get()}, g.Constant(s)).value();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) {
        double a = 0.0, b = 0.0;
        for (int c = 0; c < 3; ++c) {
          a += ws->value(k, c) * s(i, c);
          b += we->value(k, c) * s(j, c);
        }
        dot += a * b;
      }
      EXPECT_NEAR(e(i, j), i <= j ? -dot : 0.0, 1e-14);
    }
  }
}

TEST(SystemEnergyTest, LinearInSpanSelection) {
  const Matrix e{{-0.5, 0.2, 1.0}, {0, -0.1, 0.3}, {0, 0, 2.0}};
  SpanMatrix none(3), one(3), all(3);
  one.Set(0, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) all.Set(i, j);
  EXPECT_EQ(SystemEnergy(e, none), 0.0);
  EXPECT_EQ(SystemEnergy(e, one), 0.2);
  EXPECT_DOUBLE_EQ(SystemEnergy(e, all), -0.5 + 0.2 + 1.0 - 0.1 + 0.3 + 2.0);
}

TEST(EpeLossTest, ZeroEnergiesGiveLn2ForAnyLabels) {
  Rng rng(3);
  for (int n = 1; n <= 6; ++n) {
    EXPECT_NEAR(LossValue(Matrix(n, n), RandomSpanMatrix(rng, n)), kLn2, 1e-12);
  }
}

TEST(EpeLossTest, SingleConfidentGoldPair) {
  SpanMatrix y(1);
  y.Set(0, 0);
  const double expected = -std::log(1.0 / (1.0 + std::exp(-10.0)));
  EXPECT_NEAR(LossValue(Matrix{{-10}}, y), expected, 1e-15);
  EXPECT_NEAR(LossValue(Matrix{{-10}}, y), 4.54e-5, 1e-7);
}

TEST(EpeLossTest, SeparatedEnergiesGiveSmallLoss) {
  Rng rng(4);
  const int n = 5;
  SpanMatrix y = RandomSpanMatrix(rng, n);
  Matrix e(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) e(i, j) = y.Get(i, j) ? -10.0 : 10.0;
  EXPECT_LT(LossValue(e, y), 1e-4);
}

TEST(EpeLossTest, MonotoneInGoldAndNonGoldEnergies) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.Below(5));
    const Matrix e = RandomEnergies(rng, n);
    const SpanMatrix y = RandomSpanMatrix(rng, n);
    const double base = LossValue(e, y);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        Matrix moved = e;
        moved(i, j) += y.Get(i, j) ? -0.3 : 0.3;
        EXPECT_LE(LossValue(moved, y), base);
      }
    }
  }
}

TEST(EpeLossTest, GradientThroughComponentEnergy) {
  Rng rng(6);
  auto ws = MakeParam("ws", RandomMatrix(rng, 3, 4));
  auto we = MakeParam("we", RandomMatrix(rng, 3, 4));
  auto states = MakeParam("s", RandomMatrix(rng, 5, 4));
  SpanMatrix y(5);
  y.Set(0, 1);
  y.Set(3, 3);
  auto loss = [&](Graph& g) {
    return EpeLoss(ComponentEnergy({ws.get(), we.get()}, g.Param(*states)), y);
  };
  std::vector<Parameter*> params = {ws.get(), we.get(), states.get()};
  EXPECT_LT(FiniteDiffCheck(loss, params).max_rel_error, 1e-4);
}

TEST(DecodeTest, TwoByTwoExample) {
  const Matrix e{{-0.5, 0.2}, {0, -0.1}};
  EXPECT_EQ(DecodeSpans(e), (std::vector<Span>{{0, 0}, {1, 1}}));
  EXPECT_EQ(BruteForceDecode(e).Spans(), (std::vector<Span>{{0, 0}, {1, 1}}));
}

TEST(DecodeTest, AllPositiveIsEmptyAllNegativeIsEverything) {
  Matrix pos(3, 3, 0.5), neg(3, 3, -0.5);
  EXPECT_TRUE(DecodeSpans(pos).empty());
  EXPECT_EQ(DecodeSpans(neg).size(), 6u);
}

TEST(DecodeTest, MatchesBruteForceOn200RandomMatrices) {
  Rng rng(2026);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.Below(4));
    const Matrix e = RandomEnergies(rng, n);
    if (DecodeSpans(e, 0.0) == BruteForceDecode(e).Spans()) ++agree;
  }
  EXPECT_EQ(agree, 200);
}

TEST(DecodeTest, PositiveRescalingKeepsDecodedSet) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.Below(6));
    const Matrix e = RandomEnergies(rng, n);
    Matrix scaled = e;
    const double c = rng.Uniform(0.01, 100.0);
    for (double& v : scaled.values()) v *= c;
    EXPECT_EQ(DecodeSpans(e), DecodeSpans(scaled));
  }
}

TEST(DecodeTest, BruteForceRefusesLongSequences) {
  EXPECT_THROW(BruteForceDecode(Matrix(6, 6)), UsageError);
}

TEST(BoundaryDecodeTest, NothingAboveThreshold) {
  const std::vector<double> s = {-1, -2, -0.5}, e = {-1, -1, -1};
  EXPECT_TRUE(IndependentBoundaryDecode(s, e).empty());
}

TEST(BoundaryDecodeTest, SingleStartAndEnd) {
  const std::vector<double> s = {-1, 2, -1, -1}, e = {-1, -1, -1, 3};
  EXPECT_EQ(IndependentBoundaryDecode(s, e), (std::vector<Span>{{1, 3}}));
}

TEST(BoundaryDecodeTest, GreedyPairsNearestUnusedEnd) {
  const std::vector<double> s = {1, -1, 1, -1}, e = {-1, 1, -1, 1};
  EXPECT_EQ(IndependentBoundaryDecode(s, e), (std::vector<Span>{{0, 1}, {2, 3}}));
}

TEST(BoundaryLossTest, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  BoundaryHeadParams head;
  auto ws = MakeParam("ws", RandomMatrix(rng, 4, 1));
  auto bs = MakeParam("bs", RandomMatrix(rng, 1, 1));
  auto we = MakeParam("we", RandomMatrix(rng, 4, 1));
  auto be = MakeParam("be", RandomMatrix(rng, 1, 1));
  head = {ws.get(), bs.get(), we.get(), be.get()};
  const Matrix states = RandomMatrix(rng, 5, 4);
  const std::vector<Span> gold = {{1, 2}, {4, 4}};
  auto loss = [&](Graph& g) {
    return BoundaryLoss(BoundaryScores(head, g.Constant(states)), gold);
  };
  std::vector<Parameter*> params = {ws.get(), bs.get(), we.get(), be.get()};
  EXPECT_LT(FiniteDiffCheck(loss, params).max_rel_error, 1e-4);
}

}  // namespace
}  // namespace dqpsa
