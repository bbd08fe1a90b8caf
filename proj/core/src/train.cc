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

#include "dqpsa/train.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <thread>

#include "dqpsa/errors.h"
#include "dqpsa/rng.h"

namespace dqpsa {

std::string_view StageName(Stage s) {
  switch (s) {
    case Stage::kPretrain1: return "pretrain1";
    case Stage::kPretrain2: return "pretrain2";
    case Stage::kFinetune: return "finetune";
  }
  return "finetune";
}

std::optional<Stage> ParseStage(std::string_view name) {
  if (name == "pretrain1") return Stage::kPretrain1;
  if (name == "pretrain2") return Stage::kPretrain2;
  if (name == "finetune") return Stage::kFinetune;
  return std::nullopt;
}

TrainConfig TrainConfig::Defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  switch (stage) {
    case Stage::kPretrain1:
      c.lambda_itm = 2.0;
      c.lambda_itc = 2.0;
      c.lambda_epe = 1.0;
      c.learning_rate = 5e-5;
      c.epochs = 5;
      // Only the prompt-query stack, the span head and the matching head
      // learn in the first stage.
      c.frozen_groups = {"image_stub", "text"};
      break;
    case Stage::kPretrain2:
      c.lambda_itm = 1.0;
      c.lambda_itc = 1.0;
      c.lambda_epe = 1.0;
      c.learning_rate = 3e-5;
      c.epochs = 5;
      c.frozen_groups = {"image_stub"};
      break;
    case Stage::kFinetune:
      c.lambda_itm = 0.1;
      c.lambda_itc = 0.1;
      c.lambda_epe = 1.0;
      c.learning_rate = 2e-5;
      c.epochs = 50;
      c.frozen_groups = {"image_stub"};
      break;
  }
  return c;
}

bool TrainConfig::IsFrozen(const std::string& group) const {
  // The image stub is frozen in every stage regardless of the mask.
  return group == "image_stub" ||
         std::find(frozen_groups.begin(), frozen_groups.end(), group) !=
             frozen_groups.end();
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
  };
  if (!(lambda_itm >= 0)) fail("lambda_itm", "must be >= 0");
  if (!(lambda_itc >= 0)) fail("lambda_itc", "must be >= 0");
  if (!(lambda_epe >= 0)) fail("lambda_epe", "must be >= 0");
  if (!(learning_rate > 0)) fail("lr", "must be > 0");
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1)) fail("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) fail("beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps", "must be > 0");
  if (!(weight_decay >= 0)) fail("weight_decay", "must be >= 0");
  if (patience < 0) fail("patience", "must be >= 0");
  for (const auto& g : frozen_groups) {
    if (g != "image_stub" && g != "pdq" && g != "text" && g != "epe" &&
        g != "heads") {
      fail("frozen", "unknown parameter group '" + g + "'");
    }
  }
}

// ----------------------------------------------------------------- AdamW

AdamW::AdamW(ParamStore& store, const TrainConfig& config) : config_(config) {
  for (Parameter* p : store.All()) {
    if (config_.IsFrozen(p->group)) continue;
    trainable_.push_back(p);
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

double AdamW::Step() {
  double sq = 0.0;
  for (Parameter* p : trainable_) {
    if (p->grad.empty()) continue;
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  double scale = 1.0;
  if (config_.clip_norm > 0.0 && norm > config_.clip_norm) {
    scale = config_.clip_norm / norm;
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t k = 0; k < trainable_.size(); ++k) {
    Parameter& p = *trainable_[k];
    const bool has_grad = !p.grad.empty();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = has_grad ? p.grad[i] * scale : 0.0;
      double& m = m_[k][i];
      double& v = v_[k][i];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double mhat = m / c1;
      const double vhat = v / c2;
      p.value[i] = p.value[i] * decay - lr * mhat / (std::sqrt(vhat) + config_.adam_eps);
    }
  }
  return norm;
}

StepResult TrainStep(DqpsaModel& model, AdamW& optimizer,
                     std::span<const TaskInstance> batch,
                     const TrainConfig& config) {
  if (batch.empty()) throw UsageError("empty batch");
  model.params().ZeroGrad();
  Graph g;
  StepResult r;
  Var loss = TotalLoss(g, model, batch, config.weights(), &r.terms);
  g.Backward(loss);
  r.grad_norm = optimizer.Step();
  return r;
}

// ------------------------------------------------------------ evaluation

namespace {

struct ExampleResult {
  std::vector<Span> mate_gold, mate_pred;
  std::vector<Polarity> masc_gold, masc_pred;
  std::vector<bool> masc_ambiguous;
  std::vector<Span> jmasa_gold, jmasa_pred;
};

ExampleResult EvaluateExample(const DqpsaModel& model, const Dataset& ds,
                              const Example& ex) {
  ExampleResult r;
  std::map<std::pair<int, int>, Polarity> cache;
  auto polarity = [&](const Span& aspect) {
    const auto key = std::make_pair(aspect.start, aspect.end);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const Polarity p = PredictAspectPolarity(model, ds, ex, aspect);
    cache.emplace(key, p);
    return p;
  };
  for (std::size_t i = 0; i < ex.spans.size(); ++i) {
    const Span& s = ex.spans[i];
    r.mate_gold.push_back({s.start, s.end});
    r.jmasa_gold.push_back(s);
    r.masc_gold.push_back(s.polarity);
    r.masc_pred.push_back(polarity(s));
    r.masc_ambiguous.push_back(i < ex.ambiguous.size() && ex.ambiguous[i]);
  }
  r.mate_pred = PredictSpans(model, MateView(ds, ex));
  for (const Span& a : r.mate_pred) {
    r.jmasa_pred.push_back({a.start, a.end, polarity(a)});
  }
  return r;
}

}  // namespace

int EvalThreadsFromEnv() {
  const char* env = std::getenv("DQPSA_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  int n = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto res = std::from_chars(env, end, n);
  if (res.ec != std::errc() || res.ptr != end || n < 1) {
    throw ConfigError("DQPSA_THREADS must be a positive integer");
  }
  return n;
}

EvalSummary Evaluate(const DqpsaModel& model, const Dataset& dataset,
                     int threads) {
  const std::size_t n = dataset.examples.size();
  std::vector<ExampleResult> results(n);
  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(n, 1))));
  auto run = [&](int w) {
    for (std::size_t i = w; i < n; i += workers) {
      results[i] = EvaluateExample(model, dataset, dataset.examples[i]);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  std::vector<std::vector<Span>> mate_gold, mate_pred, jm_gold, jm_pred;
  std::vector<Polarity> pg, pp, ag, ap;
  for (const ExampleResult& r : results) {
    mate_gold.push_back(r.mate_gold);
    mate_pred.push_back(r.mate_pred);
    jm_gold.push_back(r.jmasa_gold);
    jm_pred.push_back(r.jmasa_pred);
    for (std::size_t k = 0; k < r.masc_gold.size(); ++k) {
      pg.push_back(r.masc_gold[k]);
      pp.push_back(r.masc_pred[k]);
      if (r.masc_ambiguous[k]) {
        ag.push_back(r.masc_gold[k]);
        ap.push_back(r.masc_pred[k]);
      }
    }
  }
  EvalSummary s;
  s.mate = SpanPrf1(mate_gold, mate_pred, MatchMode::kSpanOnly);
  s.jmasa = SpanPrf1(jm_gold, jm_pred, MatchMode::kSpanAndPolarity);
  s.masc = PolarityAccuracy(pg, pp);
  s.masc_ambiguous = PolarityAccuracy(ag, ap);
  return s;
}

// ----------------------------------------------------------- metrics log

void MetricsLog::AddEval(int epoch, std::string_view split,
                         const EvalSummary& s) {
  auto row = [&](const char* task, const EvalReport& r, bool with_acc) {
    MetricsRow m;
    m.epoch = epoch;
    m.split = std::string(split);
    m.task = task;
    m.precision = r.precision;
    m.recall = r.recall;
    m.f1 = r.f1;
    if (with_acc) m.accuracy = r.accuracy;
    Add(std::move(m));
  };
  row("MATE", s.mate, false);
  row("MASC", s.masc, true);
  row("MASC-ambiguous", s.masc_ambiguous, true);
  row("JMASA", s.jmasa, false);
}

std::string MetricsLog::ToCsv() const {
  std::string out(kHeader);
  out += '\n';
  char buf[64];
  auto cell = [&](const std::optional<double>& v) {
    out += ',';
    if (!v) return;
    const int n = std::snprintf(buf, sizeof(buf), "%.6f", *v);
    out.append(buf, n);
  };
  for (const MetricsRow& r : rows_) {
    out += std::to_string(r.epoch);
    out += ',';
    out += r.split;
    out += ',';
    out += r.task;
    cell(r.precision);
    cell(r.recall);
    cell(r.f1);
    cell(r.accuracy);
    cell(r.loss);
    out += '\n';
  }
  return out;
}

// -------------------------------------------------------- staged training

StageResult TrainStage(DqpsaModel& model,
                       std::span<const TaskInstance> instances,
                       const TrainConfig& config, MetricsLog* log,
                       const Dataset* dev, int epoch_offset,
                       int eval_threads) {
  config.Validate();
  StageResult result;
  if (config.epochs == 0) return result;
  if (instances.empty()) throw UsageError("no training instances");
  AdamW optimizer(model.params(), config);
  Rng rng(config.seed ^ (0x5DEECE66DULL * (static_cast<int>(config.stage) + 1)));
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<Matrix> best;
  int stale = 0;
  std::vector<TaskInstance> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.Shuffle(order);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
      batch.clear();
      const std::size_t stop =
          std::min(order.size(), at + static_cast<std::size_t>(config.batch_size));
      for (std::size_t k = at; k < stop; ++k) batch.push_back(instances[order[k]]);
      loss_sum += TrainStep(model, optimizer, batch, config).terms.total;
      ++steps;
    }
    const double mean_loss = loss_sum / steps;
    result.epoch_loss.push_back(mean_loss);
    result.epochs_run = epoch;
    if (log) {
      MetricsRow row;
      row.epoch = epoch_offset + epoch;
      row.split = "train";
      row.task = std::string(StageName(config.stage));
      row.loss = mean_loss;
      log->Add(std::move(row));
    }
    if (dev == nullptr) continue;
    const EvalSummary s = Evaluate(model, *dev, eval_threads);
    if (log) log->AddEval(epoch_offset + epoch, "dev", s);
    if (result.best_epoch == 0 || s.jmasa.f1 > result.best_dev_f1) {
      result.best_epoch = epoch;
      result.best_dev_f1 = s.jmasa.f1;
      best = model.params().Snapshot();
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  if (!best.empty()) model.params().Restore(best);
  return result;
}

TwoStageResult TrainTwoStage(DqpsaModel& model,
                             std::span<const TaskInstance> pretrain,
                             std::span<const TaskInstance> finetune,
                             const Dataset& dev, const TwoStageConfigs& cfgs,
                             MetricsLog* log, int eval_threads) {
  TwoStageResult r;
  int offset = 0;
  r.pretrain1 = TrainStage(model, pretrain, cfgs.pretrain1, log, nullptr,
                           offset, eval_threads);
  offset += r.pretrain1.epochs_run;
  r.pretrain2 = TrainStage(model, pretrain, cfgs.pretrain2, log, nullptr,
                           offset, eval_threads);
  offset += r.pretrain2.epochs_run;
  r.finetune = TrainStage(model, finetune, cfgs.finetune, log, &dev, offset,
                          eval_threads);
  return r;
}

}  // namespace dqpsa
