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

#include "dqpsa/errors.h"
#include "dqpsa/gradcheck.h"
#include "dqpsa/objectives.h"
#include "test_util.h"

namespace dqpsa {
namespace {

using testing::MakeParam;
using testing::RandomMatrix;

const double kLn2 = std::log(2.0);

// One-row visual query [[1]] against a 2 x 1 head gives logits (a, b).
double ItmLossForLogits(double a, double b, int label) {
  Graph g;
  MatchBatch batch;
  batch.visual_query.push_back(g.Constant(Matrix{{1}}));
  batch.description.push_back(g.Constant(Matrix{{0}}));
  batch.labels.push_back(label);
  return ItmLoss(batch, g.Constant(Matrix{{a}, {b}})).value()(0, 0);
}

TEST(ItmTest, ZeroHeadGivesZeroLogits) {
  Rng rng(1);
  Graph g;
  Var logits = ItmLogits(g.Constant(Matrix(2, 4)), g.Constant(RandomMatrix(rng, 3, 4)),
                         g.Constant(RandomMatrix(rng, 5, 4)));
  EXPECT_EQ(logits.value(), (Matrix{{0, 0}}));
}

TEST(ItmTest, LogitsAreMeanOverVisualQueryRows) {
  Rng rng(2);
  const Matrix w = RandomMatrix(rng, 2, 3);
  const Matrix vq = RandomMatrix(rng, 4, 3);
  Graph g;
  const Matrix logits = ItmLogits(g.Constant(w), g.Constant(vq),
                                  g.Constant(RandomMatrix(rng, 2, 3))).value();
  for (int k = 0; k < 2; ++k) {
    double expected = 0.0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 3; ++c) expected += vq(r, c) * w(k, c) / 4.0;
    }
    EXPECT_NEAR(logits(0, k), expected, 1e-14);
  }
}

TEST(ItmTest, ZeroLogitsGiveLn2ForEitherLabel) {
  EXPECT_NEAR(ItmLossForLogits(0, 0, 0), kLn2, 1e-12);
  EXPECT_NEAR(ItmLossForLogits(0, 0, 1), kLn2, 1e-12);
}

TEST(ItmTest, ConfidentCorrectLogitsGiveNearZero) {
  EXPECT_LT(ItmLossForLogits(50, -50, 0), 1e-20);
}

TEST(ItmTest, MixedBatchIsMeanOfTerms) {
  Graph g;
  MatchBatch batch;
  batch.visual_query = {g.Constant(Matrix{{1}}), g.Constant(Matrix{{0}})};
  batch.description = {g.Constant(Matrix{{0}}), g.Constant(Matrix{{0}})};
  batch.labels = {0, 1};
  const double loss = ItmLoss(batch, g.Constant(Matrix{{50}, {-50}})).value()(0, 0);
  EXPECT_NEAR(loss, (ItmLossForLogits(50, -50, 0) + kLn2) / 2.0, 1e-12);
}

TEST(ItmTest, EmptyBatchIsUsageError) {
  Graph g;
  EXPECT_THROW(ItmLoss(MatchBatch{}, g.Constant(Matrix(2, 1))), UsageError);
}

TEST(ItcTest, SingleExampleSimilarityIsInnerProduct) {
  const Matrix img{{1, 2, 3}};
  const Matrix txt{{-1, 0.5, 2}};
  ItcSimilarities s = ItcSimilarityVectors(img, txt, 0);
  ASSERT_EQ(s.image_to_text.size(), 1u);
  EXPECT_DOUBLE_EQ(s.image_to_text[0], 6.0);
  EXPECT_DOUBLE_EQ(s.text_to_image[0], 6.0);
}

TEST(ItcTest, OrthonormalPairsGiveBasisVectors) {
  const Matrix eye = Matrix::Identity(3);
  for (int i = 0; i < 3; ++i) {
    ItcSimilarities s = ItcSimilarityVectors(eye, eye, i);
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(s.image_to_text[j], i == j ? 1.0 : 0.0);
      EXPECT_EQ(s.text_to_image[j], i == j ? 1.0 : 0.0);
    }
  }
}

TEST(ItcTest, RandomBatchMatchesLoopOracle) {
  Rng rng(3);
  const Matrix img = RandomMatrix(rng, 3, 4);
  const Matrix txt = RandomMatrix(rng, 3, 4);
  for (int i = 0; i < 3; ++i) {
    ItcSimilarities s = ItcSimilarityVectors(img, txt, i);
    for (int j = 0; j < 3; ++j) {
      double it = 0.0, ti = 0.0;
      for (int c = 0; c < 4; ++c) {
        it += img(i, c) * txt(j, c);
        ti += img(j, c) * txt(i, c);
      }
      EXPECT_NEAR(s.image_to_text[j], it, 1e-15);
      EXPECT_NEAR(s.text_to_image[j], ti, 1e-15);
    }
  }
}

double ItcValue(const Matrix& img, const Matrix& txt) {
  Graph g;
  return ItcLoss({g.Constant(img), g.Constant(txt)}).value()(0, 0);
}

TEST(ItcTest, SingleExampleLossIsExactlyZero) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_EQ(ItcValue(RandomMatrix(rng, 1, 5, -9, 9), RandomMatrix(rng, 1, 5, -9, 9)),
              0.0);
  }
}

TEST(ItcTest, IdenticalColumnsGiveLn2) {
  const Matrix m{{1, 2}, {1, 2}};
  EXPECT_NEAR(ItcValue(m, m), kLn2, 1e-12);
}

TEST(ItcTest, DiagonalDominantClosedForm) {
  // sim = diag(10) with zeros elsewhere.
  const Matrix img{{std::sqrt(10.0), 0}, {0, std::sqrt(10.0)}};
  const double expected = -std::log(std::exp(10.0) / (std::exp(10.0) + 1.0));
  EXPECT_NEAR(ItcValue(img, img), expected, 1e-12);
}

TEST(ItcTest, SymmetricInImageAndText) {
  Rng rng(5);
  const Matrix a = RandomMatrix(rng, 4, 3), b = RandomMatrix(rng, 4, 3);
  EXPECT_NEAR(ItcValue(a, b), ItcValue(b, a), 1e-12);
}

TEST(ObjectiveTest, LossesInvariantToConsistentReordering) {
  Rng rng(6);
  const Matrix img = RandomMatrix(rng, 3, 4), txt = RandomMatrix(rng, 3, 4);
  const std::vector<int> perm = {2, 0, 1};
  Matrix pi(3, 4), pt(3, 4);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      pi(r, c) = img(perm[r], c);
      pt(r, c) = txt(perm[r], c);
    }
  }
  EXPECT_NEAR(ItcValue(img, txt), ItcValue(pi, pt), 1e-12);

  const Matrix w = RandomMatrix(rng, 2, 4);
  std::vector<Matrix> vqs, descs;
  for (int i = 0; i < 3; ++i) {
    vqs.push_back(RandomMatrix(rng, 2, 4));
    descs.push_back(RandomMatrix(rng, 3, 4));
  }
  const std::vector<int> labels = {1, 0, 1};
  auto itm = [&](const std::vector<int>& order) {
    Graph g;
    MatchBatch batch;
    for (int i : order) {
      batch.visual_query.push_back(g.Constant(vqs[i]));
      batch.description.push_back(g.Constant(descs[i]));
      batch.labels.push_back(labels[i]);
    }
    return ItmLoss(batch, g.Constant(w)).value()(0, 0);
  };
  EXPECT_NEAR(itm({0, 1, 2}), itm(perm), 1e-12);
}

TEST(ObjectiveTest, LossesAreNonNegative) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int b = 1 + static_cast<int>(rng.Below(4));
    EXPECT_GE(ItcValue(RandomMatrix(rng, b, 3, -5, 5), RandomMatrix(rng, b, 3, -5, 5)),
              0.0);
    EXPECT_GE(ItmLossForLogits(rng.Uniform(-9, 9), rng.Uniform(-9, 9),
                               static_cast<int>(rng.Below(2))),
              0.0);
  }
}

TEST(ObjectiveTest, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  auto w = MakeParam("w", RandomMatrix(rng, 2, 4));
  auto vq = MakeParam("vq", RandomMatrix(rng, 3, 4));
  auto img = MakeParam("img", RandomMatrix(rng, 3, 4));
  auto txt = MakeParam("txt", RandomMatrix(rng, 3, 4));
  const Matrix desc = RandomMatrix(rng, 2, 4);
  auto loss = [&](Graph& g) {
    MatchBatch batch;
    batch.visual_query = {g.Param(*vq), Scale(g.Param(*vq), -0.5)};
    batch.description = {g.Constant(desc), g.Constant(desc)};
    batch.labels = {1, 0};
    return Add(ItmLoss(batch, g.Param(*w)),
               ItcLoss({g.Param(*img), g.Param(*txt)}));
  };
  std::vector<Parameter*> params = {w.get(), vq.get(), img.get(), txt.get()};
  EXPECT_LT(FiniteDiffCheck(loss, params).max_rel_error, 1e-4);
}

}  // namespace
}  // namespace dqpsa
