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

// Flat `key = value` run configuration shared by every subcommand.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dqpsa/data.h"
#include "dqpsa/model.h"
#include "dqpsa/train.h"

namespace dqpsa::cli {

struct RunConfig {
  std::uint64_t seed = 0;
  Variant variant = Variant::kFull;
  std::string out = "out";
  std::string data;         // directory written by gen-data
  std::string init;         // checkpoint to start training from
  std::string checkpoint;   // checkpoint for eval / decode / dump-attention
  std::string eval_data;    // dataset file for eval / decode / dump-attention
  std::string predictions;  // decode output to score instead of a model

  // Synthetic world and corpus sizes.
  SyntheticWorldSpec world;
  int n_train = 2000;
  int n_dev = 500;
  int n_test = 500;
  int n_pretrain = 500;  // per pretraining generator

  // Geometry; vocab_size comes from the data.
  ModelGeometry geometry;

  // Training.
  int batch_size = 4;
  int patience = 0;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  TwoStageConfigs stages;

  // Attention dumps.
  int dump_limit = 16;
  bool dump_pgm = true;

  // Throws ConfigError with the field name on any invalid value.
  void Validate() const;
  // Stage config with the shared training fields and seed applied.
  TrainConfig StageConfig(Stage stage) const;
};

// Every key in output order.
std::vector<std::string> ConfigKeys();

// Sets one key. Throws ConfigError naming the key for unknown keys and
// unparsable values.
void SetConfigValue(RunConfig& config, std::string_view key,
                    std::string_view value);

// Applies `key = value` lines; '#' starts a comment. Errors carry the line
// number.
void ApplyConfigText(RunConfig& config, std::string_view text);

// Effective configuration, one `key = value` per line in ConfigKeys() order.
// ApplyConfigText(RunConfig{}, ConfigText(c)) reproduces c.
std::string ConfigText(const RunConfig& config);

}  // namespace dqpsa::cli
