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

// Subcommands of the `dqpsa` tool. Each writes its outputs atomically under
// config.out and echoes the effective configuration to out/config.txt.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dqpsa/data.h"
#include "dqpsa/model.h"
#include "dqpsa/train.h"
#include "run_config.h"

namespace dqpsa::cli {

enum ExitCode {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingFile = 3,
  kExitFormat = 4,
};

// The four corpora written by gen-data.
struct DataBundle {
  Dataset pretrain;  // label-choice followed by description-choice records
  Dataset train, dev, test;
};

DataBundle GenerateData(const RunConfig& config);
// Reads <dir>/{pretrain,train,dev,test}.jsonl.
DataBundle LoadData(const std::filesystem::path& dir);

DqpsaModel NewModel(const RunConfig& config, const Vocabulary& vocab);

// Pretrain1 then Pretrain2 over the pretraining corpus.
void RunPretrain(const RunConfig& config, DqpsaModel& model,
                 const DataBundle& data, MetricsLog* log);
// Finetune with dev selection, then test rows appended to the log.
StageResult RunFinetune(const RunConfig& config, DqpsaModel& model,
                        const DataBundle& data, MetricsLog* log,
                        int epoch_offset);

int CmdGenData(const RunConfig& config, std::ostream& out);
int CmdPretrain(const RunConfig& config, std::ostream& out);
int CmdFinetune(const RunConfig& config, std::ostream& out);
int CmdEval(const RunConfig& config, std::ostream& out);
int CmdDecode(const RunConfig& config, std::ostream& out);
int CmdGradcheck(const RunConfig& config, std::ostream& out);
int CmdDumpAttention(const RunConfig& config, std::ostream& out);

// Whole command line: parses flags, loads --config, dispatches, and maps
// exceptions to exit codes (config 2, missing file 3, malformed file 4).
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// Grayscale binary PGM of `m`, min-max normalised to 0..255.
std::string RenderPgm(const Matrix& m);

}  // namespace dqpsa::cli
