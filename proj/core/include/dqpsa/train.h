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

// Optimisation, staged training and evaluation.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqpsa/data.h"
#include "dqpsa/model.h"

namespace dqpsa {

enum class Stage { kPretrain1, kPretrain2, kFinetune };
std::string_view StageName(Stage s);  // pretrain1 / pretrain2 / finetune
std::optional<Stage> ParseStage(std::string_view name);

struct TrainConfig {
  Stage stage = Stage::kFinetune;
  double lambda_itm = 0.1;
  double lambda_itc = 0.1;
  double lambda_epe = 1.0;
  double learning_rate = 2e-5;
  int epochs = 50;
  int batch_size = 4;
  // Parameter groups excluded from updates.
  std::vector<std::string> frozen_groups = {"image_stub"};
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables
  // Dev-set early stopping after this many epochs without improvement;
  // 0 runs every epoch.
  int patience = 0;

  // Per-stage defaults: loss weights, learning rate, epochs, freeze mask.
  static TrainConfig Defaults(Stage stage);
  LossWeights weights() const { return {lambda_itm, lambda_itc, lambda_epe}; }
  bool IsFrozen(const std::string& group) const;
  // Throws ConfigError naming the offending field.
  void Validate() const;
};

// Decoupled weight decay Adam over the parameters outside the freeze mask.
class AdamW {
 public:
  AdamW(ParamStore& store, const TrainConfig& config);

  // Clips the trainable gradients to the configured global norm and applies
  // one update. Returns the pre-clip gradient norm.
  double Step();
  const std::vector<Parameter*>& trainable() const { return trainable_; }
  long steps() const { return t_; }

 private:
  TrainConfig config_;
  std::vector<Parameter*> trainable_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

struct StepResult {
  LossTerms terms;
  double grad_norm = 0.0;
};

// Zeroes gradients, builds TotalLoss over `batch`, back-propagates and takes
// one optimizer step. Throws UsageError on an empty batch.
StepResult TrainStep(DqpsaModel& model, AdamW& optimizer,
                     std::span<const TaskInstance> batch,
                     const TrainConfig& config);

// ---- evaluation ----

struct EvalSummary {
  EvalReport mate;            // span-only P/R/F1 of aspect extraction
  EvalReport masc;            // accuracy over gold aspects
  EvalReport masc_ambiguous;  // accuracy over gold aspects without a text cue
  EvalReport jmasa;           // span + polarity P/R/F1
};

// Fans out over examples on up to `threads` workers; the metric reduction
// runs in example order, so results do not depend on the thread count.
EvalSummary Evaluate(const DqpsaModel& model, const Dataset& dataset,
                     int threads = 1);

// Number of evaluation workers from DQPSA_THREADS (default 1).
int EvalThreadsFromEnv();

// ---- metrics log ----

struct MetricsRow {
  int epoch = 0;
  std::string split;
  std::string task;
  std::optional<double> precision, recall, f1, accuracy, loss;
};

class MetricsLog {
 public:
  static constexpr std::string_view kHeader = "epoch,split,task,P,R,F1,acc,loss";

  void Add(MetricsRow row) { rows_.push_back(std::move(row)); }
  void AddEval(int epoch, std::string_view split, const EvalSummary& s);
  const std::vector<MetricsRow>& rows() const { return rows_; }
  std::string ToCsv() const;

 private:
  std::vector<MetricsRow> rows_;
};

// ---- staged training ----

struct StageResult {
  int epochs_run = 0;
  int best_epoch = 0;         // stage-local, 1-based; 0 without a dev set
  double best_dev_f1 = 0.0;   // JMASA F1 of the kept parameters
  std::vector<double> epoch_loss;
};

// Runs one stage with a fresh optimizer. With `dev` set, evaluates after
// every epoch, keeps the parameters with the best dev JMASA F1 (earliest on
// ties) and stops early per `config.patience`. `epoch_offset` numbers log
// rows continuously across stages.
StageResult TrainStage(DqpsaModel& model,
                       std::span<const TaskInstance> instances,
                       const TrainConfig& config, MetricsLog* log,
                       const Dataset* dev = nullptr, int epoch_offset = 0,
                       int eval_threads = 1);

struct TwoStageConfigs {
  TrainConfig pretrain1 = TrainConfig::Defaults(Stage::kPretrain1);
  TrainConfig pretrain2 = TrainConfig::Defaults(Stage::kPretrain2);
  TrainConfig finetune = TrainConfig::Defaults(Stage::kFinetune);
};

struct TwoStageResult {
  StageResult pretrain1, pretrain2, finetune;
};

// Pretrain1 -> Pretrain2 on `pretrain`, then Finetune on `finetune` with dev
// selection.
TwoStageResult TrainTwoStage(DqpsaModel& model,
                             std::span<const TaskInstance> pretrain,
                             std::span<const TaskInstance> finetune,
                             const Dataset& dev, const TwoStageConfigs& cfgs,
                             MetricsLog* log, int eval_threads = 1);

}  // namespace dqpsa
