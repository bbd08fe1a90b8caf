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
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dqpsa/attention.h"
#include "dqpsa/errors.h"
#include "dqpsa/gradcheck.h"
#include "dqpsa/params.h"
#include "test_util.h"

namespace dqpsa {
namespace {

using testing::MaxAbsDiff;
using testing::RandomMatrix;

double MaxRowSumError(const Matrix& w) {
  double worst = 0.0;
  for (int r = 0; r < w.rows(); ++r) {
    double s = 0.0;
    for (double v : w.row(r)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

TEST(ScaledDotAttentionTest, SingleKeyReturnsItsValue) {
  Rng rng(1);
  Graph g;
  Matrix v{{0.5, -2.0, 7.0}};
  AttentionResult r = ScaledDotAttention(g.Constant(RandomMatrix(rng, 4, 3)),
                                         g.Constant(RandomMatrix(rng, 1, 3)),
                                         g.Constant(v));
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(r.weights.value()(i, 0), 1.0);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(r.output.value()(i, c), v(0, c));
  }
}

TEST(ScaledDotAttentionTest, OrthogonalQueryAveragesIdenticalValues) {
  Graph g;
  Matrix v{{1.5, -0.5}, {1.5, -0.5}};
  AttentionResult r = ScaledDotAttention(g.Constant(Matrix{{1, 0}}),
                                         g.Constant(Matrix{{0, 1}, {0, -3}}),
                                         g.Constant(v));
  EXPECT_EQ(r.weights.value(), (Matrix{{0.5, 0.5}}));
  EXPECT_EQ(r.output.value(), (Matrix{{1.5, -0.5}}));
}

TEST(ScaledDotAttentionTest, TwoByTwoMatchesHandOracle) {
  const Matrix q{{1, 0}, {0.5, -1}};
  const Matrix k{{2, 1}, {-1, 0.5}};
  const Matrix v{{1, 2}, {3, -4}};
  Graph g;
  AttentionResult r =
      ScaledDotAttention(g.Constant(q), g.Constant(k), g.Constant(v));
  const double scale = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 2; ++i) {
    const double s0 = (q(i, 0) * k(0, 0) + q(i, 1) * k(0, 1)) * scale;
    const double s1 = (q(i, 0) * k(1, 0) + q(i, 1) * k(1, 1)) * scale;
    const double w0 = 1.0 / (1.0 + std::exp(s1 - s0));
    const double w1 = 1.0 - w0;
    EXPECT_NEAR(r.weights.value()(i, 0), w0, 1e-14);
    EXPECT_NEAR(r.output.value()(i, 0), w0 * v(0, 0) + w1 * v(1, 0), 1e-14);
    EXPECT_NEAR(r.output.value()(i, 1), w0 * v(0, 1) + w1 * v(1, 1), 1e-14);
  }
}

TEST(ScaledDotAttentionTest, MismatchedKeyValueRowsThrow) {
  Graph g;
  EXPECT_THROW(ScaledDotAttention(g.Constant(Matrix(1, 2)), g.Constant(Matrix(3, 2)),
                                  g.Constant(Matrix(2, 2))),
               DimensionError);
}

TEST(ScaledDotAttentionTest, RowsAreStochasticOnRandomConfigurations) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int nq = 1 + static_cast<int>(rng.Below(6));
    const int nk = 1 + static_cast<int>(rng.Below(6));
    const int d = 1 + static_cast<int>(rng.Below(8));
    Graph g;
    AttentionResult r = ScaledDotAttention(g.Constant(RandomMatrix(rng, nq, d, -4, 4)),
                                           g.Constant(RandomMatrix(rng, nk, d, -4, 4)),
                                           g.Constant(RandomMatrix(rng, nk, 3)));
    EXPECT_LE(MaxRowSumError(r.weights.value()), 1e-9);
  }
}

class BlockTest : public ::testing::Test {
 protected:
  static constexpr int kWidth = 8;
  static constexpr int kImageWidth = 6;

  BlockTest() : rng_(99) {
    block_ = MakeBlock(store_, "b", "test", kWidth, 2, 16, kImageWidth, rng_);
    self_only_ = MakeBlock(store_, "s", "test", kWidth, 2, 16, std::nullopt, rng_);
  }

  Rng rng_;
  ParamStore store_;
  BlockParams block_;
  BlockParams self_only_;
};

TEST_F(BlockTest, HeadsMustDivideWidth) {
  EXPECT_THROW(MakeBlock(store_, "x", "test", 8, 3, 16, std::nullopt, rng_),
               ConfigError);
}

TEST_F(BlockTest, DescriptionOnlyIsRejectedByCrossAttention) {
  Graph g;
  SequenceState s{g.Constant(RandomMatrix(rng_, 4, kWidth)), 0,
                  SequenceKind::kDescriptionOnly};
  ImageFeatures img{g.Constant(RandomMatrix(rng_, 3, kImageWidth))};
  EXPECT_THROW(I2TCrossAttention(*block_.cross_attn, s, img), ContractError);
}

TEST_F(BlockTest, CrossWeightsAreRowStochastic) {
  for (int trial = 0; trial < 100; ++trial) {
    const int len = 2 + static_cast<int>(rng_.Below(5));
    const int p = 1 + static_cast<int>(rng_.Below(len));
    const int li = 1 + static_cast<int>(rng_.Below(5));
    Graph g;
    SequenceState s{g.Constant(RandomMatrix(rng_, len, kWidth, -3, 3)), p,
                    SequenceKind::kPromptOnly};
    ImageFeatures img{g.Constant(RandomMatrix(rng_, li, kImageWidth, -3, 3))};
    CrossAttentionResult r = I2TCrossAttention(*block_.cross_attn, s, img);
    ASSERT_EQ(r.mean_weights.rows(), p);
    ASSERT_EQ(r.mean_weights.cols(), li);
    EXPECT_LE(MaxRowSumError(r.mean_weights), 1e-9);
  }
}

TEST_F(BlockTest, RowsAfterPromptPassThroughUnchanged) {
  for (int p : {1, 3, 5}) {
    Graph g;
    const Matrix h = RandomMatrix(rng_, 7, kWidth);
    SequenceState s{g.Constant(h), p, SequenceKind::kPromptPlusDescription};
    ImageFeatures img{g.Constant(RandomMatrix(rng_, 4, kImageWidth))};
    const Matrix out = CrossSublayer(block_, s, img, nullptr, nullptr).value();
    for (int r = p; r < 7; ++r) {
      for (int c = 0; c < kWidth; ++c) EXPECT_EQ(out(r, c), h(r, c));
    }
    const Matrix i2t = I2TCrossAttention(*block_.cross_attn, s, img).output.value();
    for (int r = p; r < 7; ++r) {
      for (int c = 0; c < kWidth; ++c) EXPECT_EQ(i2t(r, c), h(r, c));
    }
  }
}

TEST_F(BlockTest, ImageRowPermutationInvariance) {
  for (int trial = 0; trial < 20; ++trial) {
    const int li = 2 + static_cast<int>(rng_.Below(5));
    const Matrix feats = RandomMatrix(rng_, li, kImageWidth, -2, 2);
    std::vector<int> perm(li);
    std::iota(perm.begin(), perm.end(), 0);
    rng_.Shuffle(perm);
    Matrix permuted(li, kImageWidth);
    for (int r = 0; r < li; ++r) {
      for (int c = 0; c < kImageWidth; ++c) permuted(r, c) = feats(perm[r], c);
    }
    const Matrix h = RandomMatrix(rng_, 5, kWidth);
    Graph g;
    SequenceState s{g.Constant(h), 3, SequenceKind::kPromptOnly};
    ImageFeatures a{g.Constant(feats)}, b{g.Constant(permuted)};
    const Matrix out_a = I2TCrossAttention(*block_.cross_attn, s, a).output.value();
    const Matrix out_b = I2TCrossAttention(*block_.cross_attn, s, b).output.value();
    EXPECT_LE(MaxAbsDiff(out_a, out_b), 1e-9);
  }
}

TEST_F(BlockTest, DescriptionOnlyIgnoresImage) {
  const Matrix h = RandomMatrix(rng_, 5, kWidth);
  Graph g;
  SequenceState s{g.Constant(h), 0, SequenceKind::kDescriptionOnly};
  ImageFeatures img{g.Constant(RandomMatrix(rng_, 3, kImageWidth))};
  AttentionCounters with_image, without_image;
  const Matrix a = BlockForward(block_, s, &img, &with_image).hidden.value();
  const Matrix b = BlockForward(block_, s, nullptr, &without_image).hidden.value();
  EXPECT_EQ(a, b);
  EXPECT_EQ(with_image.cross_attention_calls, 0);
}

TEST_F(BlockTest, BlockGradientsMatchFiniteDifferences) {
  const Matrix h = RandomMatrix(rng_, 5, kWidth);
  const Matrix feats = RandomMatrix(rng_, 3, kImageWidth);
  const Matrix probe = RandomMatrix(rng_, 3, kWidth);
  const std::vector<BlockParams> stack = {block_, self_only_};
  // A layer norm output has a constant row sum, so the rows are weighted by
  // a random probe rather than averaged.
  auto loss = [&](Graph& g) {
    SequenceState s{g.Constant(h), 2, SequenceKind::kPromptPlusDescription};
    ImageFeatures img{g.Constant(feats)};
    PdqOutput out = PdqForward(stack, s, &img);
    return Add(SumAll(Mul(out.visual_query, out.visual_query)),
               SumAll(Mul(out.rest, g.Constant(probe))));
  };
  std::vector<Parameter*> params = store_.All();
  EXPECT_LT(FiniteDiffCheck(loss, params).max_rel_error, 1e-4);
}

TEST_F(BlockTest, CountersSeeEachAttentionCall) {
  Graph g;
  SequenceState s{g.Constant(RandomMatrix(rng_, 4, kWidth)), 2,
                  SequenceKind::kPromptOnly};
  ImageFeatures img{g.Constant(RandomMatrix(rng_, 3, kImageWidth))};
  AttentionCounters counters;
  CrossAttentionTrace trace;
  const std::vector<BlockParams> stack = {block_, self_only_, block_};
  PdqForward(stack, s, &img, &counters, &trace);
  EXPECT_EQ(counters.self_attention_calls, 3);
  EXPECT_EQ(counters.cross_attention_calls, 2);
  ASSERT_TRUE(trace.recorded);
  EXPECT_EQ(trace.last_weights.rows(), 2);
  EXPECT_EQ(trace.last_weights.cols(), 3);
}

}  // namespace
}  // namespace dqpsa
