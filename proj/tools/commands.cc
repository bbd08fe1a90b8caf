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

#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dqpsa/checkpoint.h"
#include "dqpsa/errors.h"
#include "dqpsa/reference.h"

namespace dqpsa::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kGradTolerance = 1e-4;

void MergeInto(Dataset& dst, Dataset src) {
  if (dst.examples.empty() && dst.images.empty()) dst.vocab = src.vocab;
  if (!(dst.vocab == src.vocab)) throw FormatError("datasets disagree on vocabulary");
  for (auto& ex : src.examples) dst.examples.push_back(std::move(ex));
  for (auto& [ref, img] : src.images) dst.images.emplace(ref, std::move(img));
}

void WriteConfigEcho(const RunConfig& config) {
  WriteFileAtomic(fs::path(config.out) / "config.txt", ConfigText(config));
}

const std::string& Require(const std::string& value, const char* key) {
  if (value.empty()) {
    throw ConfigError(std::string(key) + ": required by this command");
  }
  return value;
}

DqpsaModel ModelFromCheckpoint(const RunConfig& config, const std::string& path) {
  DqpsaModel model = LoadCheckpoint(path);
  if (model.variant() != config.variant) {
    throw ConfigError("variant: checkpoint holds '" +
                      std::string(VariantName(model.variant())) +
                      "', config asks for '" +
                      std::string(VariantName(config.variant)) + "'");
  }
  return model;
}

std::string Fixed(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.6f", v);
  return std::string(buf, n);
}

std::string ReportRow(std::string_view split, std::string_view task,
                      const EvalReport& r, bool with_acc) {
  std::string row = std::string(split) + "," + std::string(task) + "," +
                    Fixed(r.precision) + "," + Fixed(r.recall) + "," +
                    Fixed(r.f1) + "," + (with_acc ? Fixed(r.accuracy) : "") +
                    "," + std::to_string(r.gold) + "," +
                    std::to_string(r.predicted) + "," +
                    std::to_string(r.correct) + "\n";
  return row;
}

std::string ReportCsv(std::string_view split, const EvalSummary& s) {
  std::string out = "split,task,P,R,F1,acc,gold,predicted,correct\n";
  out += ReportRow(split, "MATE", s.mate, false);
  out += ReportRow(split, "MASC", s.masc, true);
  out += ReportRow(split, "MASC-ambiguous", s.masc_ambiguous, true);
  out += ReportRow(split, "JMASA", s.jmasa, false);
  return out;
}

json SpanJson(const Span& s, bool with_polarity) {
  json j = json::array({s.start, s.end});
  if (with_polarity) j.push_back(PolarityCode(s.polarity));
  return j;
}

Span SpanFromJson(const json& j, bool with_polarity, int line) {
  const std::size_t want = with_polarity ? 3 : 2;
  if (!j.is_array() || j.size() != want || !j[0].is_number_integer() ||
      !j[1].is_number_integer()) {
    throw FormatError("predictions line " + std::to_string(line) + ": bad span");
  }
  Span s{j[0].get<int>(), j[1].get<int>()};
  if (with_polarity) {
    auto p = j[2].is_string() ? ParsePolarityCode(j[2].get<std::string>())
                              : std::nullopt;
    if (!p) throw FormatError("predictions line " + std::to_string(line) + ": bad polarity");
    s.polarity = *p;
  }
  return s;
}

struct Prediction {
  std::vector<Span> mate;
  std::vector<Polarity> masc;
  std::vector<Span> jmasa;
};

std::map<std::string, Prediction> LoadPredictions(const fs::path& path) {
  std::map<std::string, Prediction> out;
  std::istringstream is(ReadFile(path));
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
      throw FormatError("predictions line " + std::to_string(line_no) + ": field 'id' missing");
    }
    Prediction p;
    for (const char* field : {"mate", "masc", "jmasa"}) {
      if (!rec.contains(field) || !rec[field].is_array()) {
        throw FormatError("predictions line " + std::to_string(line_no) +
                          ": field '" + field + "' missing");
      }
    }
    for (const auto& s : rec["mate"]) p.mate.push_back(SpanFromJson(s, false, line_no));
    for (const auto& s : rec["jmasa"]) p.jmasa.push_back(SpanFromJson(s, true, line_no));
    for (const auto& c : rec["masc"]) {
      auto pol = c.is_string() ? ParsePolarityCode(c.get<std::string>()) : std::nullopt;
      if (!pol) throw FormatError("predictions line " + std::to_string(line_no) + ": bad polarity");
      p.masc.push_back(*pol);
    }
    out.emplace(rec["id"].get<std::string>(), std::move(p));
  }
  return out;
}

EvalSummary ScorePredictions(const Dataset& ds,
                             const std::map<std::string, Prediction>& preds) {
  std::vector<std::vector<Span>> mg, mp, jg, jp;
  std::vector<Polarity> pg, pp, ag, ap;
  for (const Example& ex : ds.examples) {
    auto it = preds.find(ex.id);
    if (it == preds.end()) throw FormatError("no prediction for example '" + ex.id + "'");
    const Prediction& p = it->second;
    if (p.masc.size() != ex.spans.size()) {
      throw FormatError("example '" + ex.id + "': expected " +
                        std::to_string(ex.spans.size()) + " MASC labels");
    }
    std::vector<Span> gold_mate;
    for (std::size_t k = 0; k < ex.spans.size(); ++k) {
      gold_mate.push_back({ex.spans[k].start, ex.spans[k].end});
      pg.push_back(ex.spans[k].polarity);
      pp.push_back(p.masc[k]);
      if (k < ex.ambiguous.size() && ex.ambiguous[k]) {
        ag.push_back(ex.spans[k].polarity);
        ap.push_back(p.masc[k]);
      }
    }
    mg.push_back(gold_mate);
    mp.push_back(p.mate);
    jg.push_back(ex.spans);
    jp.push_back(p.jmasa);
  }
  EvalSummary s;
  s.mate = SpanPrf1(mg, mp, MatchMode::kSpanOnly);
  s.jmasa = SpanPrf1(jg, jp, MatchMode::kSpanAndPolarity);
  s.masc = PolarityAccuracy(pg, pp);
  s.masc_ambiguous = PolarityAccuracy(ag, ap);
  return s;
}

void PrintSummary(std::ostream& out, std::string_view split, const EvalSummary& s) {
  out << split << ": MATE F1 " << Fixed(s.mate.f1) << ", MASC acc "
      << Fixed(s.masc.accuracy) << ", JMASA F1 " << Fixed(s.jmasa.f1) << "\n";
}

}  // namespace

// ------------------------------------------------------------------ data

DataBundle GenerateData(const RunConfig& config) {
  SyntheticWorldSpec spec = config.world;
  spec.seed = config.seed;
  spec.raw_dim = config.geometry.raw_width;
  const SyntheticWorld world(spec);
  DataBundle b;
  MergeInto(b.pretrain, GenLabelChoice(world, config.n_pretrain, "lc"));
  MergeInto(b.pretrain, GenDescriptionChoice(world, config.n_pretrain, "dc"));
  b.train = GenMabsa(world, config.n_train, "train");
  b.dev = GenMabsa(world, config.n_dev, "dev");
  b.test = GenMabsa(world, config.n_test, "test");
  return b;
}

DataBundle LoadData(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw MissingFileError("data directory " + dir.string() + " not found");
  }
  DataBundle b;
  b.pretrain = LoadDataset(dir / "pretrain.jsonl");
  b.train = LoadDataset(dir / "train.jsonl");
  b.dev = LoadDataset(dir / "dev.jsonl");
  b.test = LoadDataset(dir / "test.jsonl");
  return b;
}

DqpsaModel NewModel(const RunConfig& config, const Vocabulary& vocab) {
  if (vocab.Find(kPadToken) != 0) {
    throw FormatError("vocabulary must start with " + std::string(kPadToken));
  }
  ModelGeometry g = config.geometry;
  g.vocab_size = vocab.size();
  g.variant = config.variant;
  return DqpsaModel(g, config.seed);
}

void RunPretrain(const RunConfig& config, DqpsaModel& model,
                 const DataBundle& data, MetricsLog* log) {
  const std::vector<TaskInstance> instances = PretrainViews(data.pretrain);
  const int threads = EvalThreadsFromEnv();
  StageResult s1 = TrainStage(model, instances, config.StageConfig(Stage::kPretrain1),
                              log, nullptr, 0, threads);
  TrainStage(model, instances, config.StageConfig(Stage::kPretrain2), log,
             nullptr, s1.epochs_run, threads);
}

StageResult RunFinetune(const RunConfig& config, DqpsaModel& model,
                        const DataBundle& data, MetricsLog* log,
                        int epoch_offset) {
  const std::vector<TaskInstance> instances = FinetuneViews(data.train);
  const int threads = EvalThreadsFromEnv();
  StageResult r = TrainStage(model, instances, config.StageConfig(Stage::kFinetune),
                             log, &data.dev, epoch_offset, threads);
  if (log) {
    log->AddEval(epoch_offset + r.epochs_run, "test",
                 Evaluate(model, data.test, threads));
  }
  return r;
}

// -------------------------------------------------------------- commands

int CmdGenData(const RunConfig& config, std::ostream& out) {
  const DataBundle b = GenerateData(config);
  const fs::path dir(config.out);
  SaveDataset(b.pretrain, dir / "pretrain.jsonl");
  SaveDataset(b.train, dir / "train.jsonl");
  SaveDataset(b.dev, dir / "dev.jsonl");
  SaveDataset(b.test, dir / "test.jsonl");
  WriteConfigEcho(config);
  out << "wrote " << b.pretrain.examples.size() << " pretraining, "
      << b.train.examples.size() << " train, " << b.dev.examples.size()
      << " dev and " << b.test.examples.size() << " test records to "
      << dir.string() << "\n";
  return kExitOk;
}

int CmdPretrain(const RunConfig& config, std::ostream& out) {
  const DataBundle data = LoadData(Require(config.data, "data"));
  DqpsaModel model = config.init.empty() ? NewModel(config, data.pretrain.vocab)
                                         : ModelFromCheckpoint(config, config.init);
  MetricsLog log;
  RunPretrain(config, model, data, &log);
  const fs::path dir(config.out);
  SaveCheckpoint(model, dir / "model.ckpt");
  WriteFileAtomic(dir / "metrics.csv", log.ToCsv());
  WriteConfigEcho(config);
  out << "pretrained " << VariantName(model.variant()) << " model, "
      << log.rows().size() << " epochs logged\n";
  return kExitOk;
}

int CmdFinetune(const RunConfig& config, std::ostream& out) {
  const DataBundle data = LoadData(Require(config.data, "data"));
  DqpsaModel model = config.init.empty() ? NewModel(config, data.train.vocab)
                                         : ModelFromCheckpoint(config, config.init);
  MetricsLog log;
  const StageResult r = RunFinetune(config, model, data, &log, 0);
  const fs::path dir(config.out);
  SaveCheckpoint(model, dir / "model.ckpt");
  WriteFileAtomic(dir / "metrics.csv", log.ToCsv());
  WriteConfigEcho(config);
  out << "finetuned " << r.epochs_run << " epochs, kept epoch " << r.best_epoch
      << " (dev JMASA F1 " << Fixed(r.best_dev_f1) << ")\n";
  return kExitOk;
}

int CmdEval(const RunConfig& config, std::ostream& out) {
  const fs::path data_path = Require(config.eval_data, "eval_data");
  const Dataset ds = LoadDataset(data_path);
  EvalSummary s;
  if (!config.predictions.empty()) {
    s = ScorePredictions(ds, LoadPredictions(config.predictions));
  } else {
    const DqpsaModel model =
        ModelFromCheckpoint(config, Require(config.checkpoint, "checkpoint"));
    s = Evaluate(model, ds, EvalThreadsFromEnv());
  }
  const std::string split = data_path.stem().string();
  WriteFileAtomic(fs::path(config.out) / "report.csv", ReportCsv(split, s));
  WriteConfigEcho(config);
  PrintSummary(out, split, s);
  return kExitOk;
}

int CmdDecode(const RunConfig& config, std::ostream& out) {
  const Dataset ds = LoadDataset(Require(config.eval_data, "eval_data"));
  const DqpsaModel model =
      ModelFromCheckpoint(config, Require(config.checkpoint, "checkpoint"));
  std::string lines;
  for (const Example& ex : ds.examples) {
    json rec;
    rec["id"] = ex.id;
    json mate = json::array(), masc = json::array(), jmasa = json::array();
    for (const Span& s : PredictSpans(model, MateView(ds, ex))) {
      mate.push_back(SpanJson(s, false));
    }
    for (const Span& s : ex.spans) {
      masc.push_back(PolarityCode(PredictAspectPolarity(model, ds, ex, s)));
    }
    for (const Span& s : RunJmasa(model, ds, ex)) jmasa.push_back(SpanJson(s, true));
    rec["mate"] = mate;
    rec["masc"] = masc;
    rec["jmasa"] = jmasa;
    lines += rec.dump() + "\n";
  }
  WriteFileAtomic(fs::path(config.out) / "predictions.jsonl", lines);
  WriteConfigEcho(config);
  out << "decoded " << ds.examples.size() << " examples\n";
  return kExitOk;
}

int CmdGradcheck(const RunConfig& config, std::ostream& out) {
  const GradCheckReport r = ReferenceGradCheck(config.variant, config.seed);
  const bool ok = r.max_rel_error < kGradTolerance;
  std::ostringstream report;
  report << "variant = " << VariantName(config.variant) << "\n"
         << "entries = " << r.entries_checked << "\n"
         << "max_rel_error = " << r.max_rel_error << "\n"
         << "worst = " << r.worst_param << "[" << r.worst_index << "]\n"
         << "analytic = " << r.worst_analytic << "\n"
         << "numeric = " << r.worst_numeric << "\n"
         << "tolerance = " << kGradTolerance << "\n"
         << "status = " << (ok ? "pass" : "fail") << "\n";
  WriteFileAtomic(fs::path(config.out) / "gradcheck.txt", report.str());
  WriteConfigEcho(config);
  out << report.str();
  return ok ? kExitOk : kExitFailure;
}

int CmdDumpAttention(const RunConfig& config, std::ostream& out) {
  const Dataset ds = LoadDataset(Require(config.eval_data, "eval_data"));
  const DqpsaModel model =
      ModelFromCheckpoint(config, Require(config.checkpoint, "checkpoint"));
  const fs::path dir = fs::path(config.out) / "attention";
  int written = 0;
  for (const Example& ex : ds.examples) {
    if (written >= config.dump_limit) break;
    if (ex.image_ref.empty()) continue;
    const Matrix weights = CrossAttentionMap(model, MateView(ds, ex));
    WriteFileAtomic(dir / (ex.id + ".csv"), MatrixToCsv(weights));
    if (config.dump_pgm) WriteFileAtomic(dir / (ex.id + ".pgm"), RenderPgm(weights));
    ++written;
  }
  WriteConfigEcho(config);
  out << "dumped " << written << " attention maps to " << dir.string() << "\n";
  return kExitOk;
}

std::string RenderPgm(const Matrix& m) {
  std::string out = "P5\n" + std::to_string(m.cols()) + " " +
                    std::to_string(m.rows()) + "\n255\n";
  double lo = 0.0, hi = 0.0;
  if (!m.empty()) {
    lo = *std::min_element(m.values().begin(), m.values().end());
    hi = *std::max_element(m.values().begin(), m.values().end());
  }
  for (double v : m.values()) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(t * 255.0 + 0.5)));
  }
  return out;
}

// ------------------------------------------------------------------- CLI

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Prompt-as-dual-query span extraction on synthetic data", "dqpsa"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant, out_dir, data, init, checkpoint, eval_data,
      predictions;
  std::vector<std::string> sets;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"gen-data", "Generate the synthetic corpora", CmdGenData},
      {"pretrain", "Run both pretraining stages", CmdPretrain},
      {"finetune", "Finetune with dev selection and score the test split", CmdFinetune},
      {"eval", "Score a checkpoint or a predictions file", CmdEval},
      {"decode", "Write span predictions", CmdDecode},
      {"gradcheck", "Finite-difference check on the reference geometry", CmdGradcheck},
      {"dump-attention", "Write last-layer cross-attention maps", CmdDumpAttention},
  };
  std::vector<CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--variant", variant, "full, no-pdq, no-epe or psa");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--data", data, "Directory written by gen-data");
    sub->add_option("--init", init, "Checkpoint to start training from");
    sub->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
    sub->add_option("--eval-data", eval_data, "Dataset file to evaluate");
    sub->add_option("--predictions", predictions, "Predictions file to score");
    sub->add_option("--set", sets, "Override a config key (key=value)");
    subs.push_back(sub);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      try {
        ApplyConfigText(config, ReadFile(config_path));
      } catch (const ConfigError& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got '" + kv + "'");
      }
      SetConfigValue(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.seed = *seed;
    if (variant) SetConfigValue(config, "variant", *variant);
    if (out_dir) config.out = *out_dir;
    if (data) config.data = *data;
    if (init) config.init = *init;
    if (checkpoint) config.checkpoint = *checkpoint;
    if (eval_data) config.eval_data = *eval_data;
    if (predictions) config.predictions = *predictions;
    config.Validate();
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].run(config, out);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingFileError& e) {
    err << "missing file: " << e.what() << "\n";
    return kExitMissingFile;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dqpsa::cli
