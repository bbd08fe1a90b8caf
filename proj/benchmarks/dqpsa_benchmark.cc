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


#include <memory>
#include <span>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "dqpsa/data.h"
#include "dqpsa/epe.h"
#include "dqpsa/graph.h"
#include "dqpsa/matrix.h"
#include "dqpsa/model.h"
#include "dqpsa/rng.h"
#include "dqpsa/train.h"

namespace dqpsa {
namespace {

Matrix Random(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.Uniform(-1.0, 1.0);
  return m;
}

void BM_MatMul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  const Matrix a = Random(rng, n, n), b = Random(rng, n, n);
  Matrix out(n, n);
  for (auto _ : state) {
    MatMulInto(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatMul)->RangeMultiplier(2)->Range(8, 128);

void BM_DecodeSpans(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  Rng rng(2);
  const Matrix e = Random(rng, len, len);
  for (auto _ : state) benchmark::DoNotOptimize(DecodeSpans(e, 0.0));
}
BENCHMARK(BM_DecodeSpans)->RangeMultiplier(2)->Range(4, 64);

void BM_EpeLossBackward(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  Rng rng(3);
  const Matrix e = Random(rng, len, len);
  SpanMatrix y(len);
  y.Set(0, len / 2);
  for (auto _ : state) {
    Graph g;
    Var loss = EpeLoss(g.Leaf(e), y);
    g.Backward(loss);
    benchmark::DoNotOptimize(loss.value().values().data());
  }
}
BENCHMARK(BM_EpeLossBackward)->RangeMultiplier(2)->Range(4, 64);

// Model-level costs on a small synthetic corpus, one benchmark per variant.
class ModelFixture : public benchmark::Fixture {
 public:
  void SetUp(const benchmark::State& state) override {
    SyntheticWorldSpec spec;
    spec.seed = 0;
    SyntheticWorld world(spec);
    dataset_ = GenMabsa(world, 16, "bench");
    views_ = FinetuneViews(dataset_);
    ModelGeometry geometry;
    geometry.vocab_size = world.vocab().size();
    geometry.width = 16;
    geometry.pdq_blocks = 2;
    geometry.heads = 2;
    geometry.image_width = 16;
    geometry.variant = static_cast<Variant>(state.range(0));
    model_ = std::make_unique<DqpsaModel>(geometry, 0);
  }
  void TearDown(const benchmark::State&) override { model_.reset(); }

 protected:
  Dataset dataset_;
  std::vector<TaskInstance> views_;
  std::unique_ptr<DqpsaModel> model_;
};

BENCHMARK_DEFINE_F(ModelFixture, SpanForward)(benchmark::State& state) {
  const TaskInstance& mate = views_.front();
  for (auto _ : state) {
    Graph g(false);
    ForwardOutput out = model_->Forward(g, mate, ForwardMode::kSpanTask);
    benchmark::DoNotOptimize(out.s_out.value().values().data());
  }
  state.SetLabel(std::string(VariantName(model_->variant())));
}
BENCHMARK_REGISTER_F(ModelFixture, SpanForward)->DenseRange(0, 3);

BENCHMARK_DEFINE_F(ModelFixture, TrainStep)(benchmark::State& state) {
  TrainConfig config = TrainConfig::Defaults(Stage::kFinetune);
  AdamW optimizer(model_->params(), config);
  const std::span<const TaskInstance> batch(views_.data(), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(TrainStep(*model_, optimizer, batch, config));
  }
  state.SetItemsProcessed(state.iterations() * 4);
  state.SetLabel(std::string(VariantName(model_->variant())));
}
BENCHMARK_REGISTER_F(ModelFixture, TrainStep)->DenseRange(0, 3);

}  // namespace
}  // namespace dqpsa

BENCHMARK_MAIN();
