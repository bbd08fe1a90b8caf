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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
//
//   acceptance <run.conf> <work-dir> [criterion ...]
//
// Criteria 5-7 drive the `dqpsa` subcommands end to end under <work-dir>,
// with <run.conf> supplying geometry and corpus settings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.h"
#include "dqpsa/attention.h"
#include "dqpsa/epe.h"
#include "dqpsa/errors.h"
#include "dqpsa/gradcheck.h"
#include "dqpsa/objectives.h"
#include "dqpsa/params.h"
#include "dqpsa/reference.h"
#include "dqpsa/train.h"

namespace dqpsa {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, a);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Matrix Random(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.Uniform(lo, hi);
  return m;
}

std::unique_ptr<Parameter> Leaf(std::string name, Matrix value) {
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->group = "acceptance";
  p->grad = Matrix(value.rows(), value.cols());
  p->value = std::move(value);
  return p;
}

// ---- 1: gradients ----

// Each entry reduces one operation's output to a scalar through a fixed
// random weighting, so no output entry has a vanishing gradient by symmetry.
Outcome GradientSuite() {
  constexpr double kTolerance = 1e-4;
  const auto start = Clock::now();
  Rng rng(2026);
  auto a = Leaf("a", Random(rng, 3, 4));
  auto b = Leaf("b", Random(rng, 4, 3));
  auto c = Leaf("c", Random(rng, 3, 4));
  auto row = Leaf("row", Random(rng, 1, 4));
  auto gain = Leaf("gain", Random(rng, 1, 4, 0.5, 1.5));
  auto bias = Leaf("bias", Random(rng, 1, 4));
  auto table = Leaf("table", Random(rng, 5, 4));
  auto pos = Leaf("pos", Random(rng, 3, 4, 0.2, 2.0));
  const Matrix probe34 = Random(rng, 3, 4);
  const Matrix probe43 = Random(rng, 4, 3);
  const Matrix probe33 = Random(rng, 3, 3);
  const Matrix probe14 = Random(rng, 1, 4);
  const Matrix probe31 = Random(rng, 3, 1);
  const Matrix probe38 = Random(rng, 3, 8);
  const Matrix probe64 = Random(rng, 6, 4);
  const Matrix probe32 = Random(rng, 3, 2);
  const std::vector<int> ids = {4, 0, 4};

  using Op = std::function<Var(Graph&)>;
  auto weigh = [](Var x, const Matrix& w) {
    return SumAll(Mul(x, x.graph()->Constant(w)));
  };
  const std::vector<std::pair<std::string, Op>> ops = {
      {"MatMul", [&](Graph& g) { return weigh(MatMul(g.Param(*a), g.Param(*b)), probe33); }},
      {"MatMulNT", [&](Graph& g) { return weigh(MatMulNT(g.Param(*a), g.Param(*c)), probe33); }},
      {"Add", [&](Graph& g) { return weigh(Add(g.Param(*a), g.Param(*c)), probe34); }},
      {"Sub", [&](Graph& g) { return weigh(Sub(g.Param(*a), g.Param(*c)), probe34); }},
      {"Mul", [&](Graph& g) { return weigh(Mul(g.Param(*a), g.Param(*c)), probe34); }},
      {"AddRowBroadcast", [&](Graph& g) {
         return weigh(AddRowBroadcast(g.Param(*a), g.Param(*row)), probe34);
       }},
      {"Scale", [&](Graph& g) { return weigh(Scale(g.Param(*a), -0.7), probe34); }},
      {"AddScalar", [&](Graph& g) { return weigh(Mul(AddScalar(g.Param(*a), 0.3), g.Param(*a)), probe34); }},
      {"Neg", [&](Graph& g) { return weigh(Neg(g.Param(*a)), probe34); }},
      {"Transpose", [&](Graph& g) { return weigh(Transpose(g.Param(*a)), probe43); }},
      {"Concat", [&](Graph& g) { return weigh(Concat(g.Param(*a), g.Param(*c), 1), probe38); }},
      {"ConcatRows", [&](Graph& g) {
         const std::vector<Var> parts = {g.Param(*a), g.Param(*c)};
         return weigh(ConcatRows(parts), probe64);
       }},
      {"ConcatCols", [&](Graph& g) {
         const std::vector<Var> parts = {g.Param(*a), g.Param(*c)};
         return weigh(ConcatCols(parts), probe38);
       }},
      {"Slice", [&](Graph& g) { return weigh(Slice(g.Param(*a), 1, 3, 1), probe32); }},
      {"SoftmaxRows", [&](Graph& g) { return weigh(SoftmaxRows(g.Param(*a)), probe34); }},
      {"LogSoftmaxRows", [&](Graph& g) { return weigh(LogSoftmaxRows(g.Param(*a)), probe34); }},
      {"Sigmoid", [&](Graph& g) { return weigh(Sigmoid(g.Param(*a)), probe34); }},
      {"Log", [&](Graph& g) { return weigh(Log(g.Param(*pos)), probe34); }},
      {"Gelu", [&](Graph& g) { return weigh(Gelu(Scale(g.Param(*a), 2.0)), probe34); }},
      {"LayerNorm", [&](Graph& g) {
         return weigh(LayerNorm(g.Param(*a), g.Param(*gain), g.Param(*bias)), probe34);
       }},
      {"EmbeddingLookup", [&](Graph& g) {
         return weigh(EmbeddingLookup(g.Param(*table), ids), probe34);
       }},
      {"Mean", [&](Graph& g) {
         return Add(weigh(Mean(g.Param(*a), 0), probe14), weigh(Mean(g.Param(*a), 1), probe31));
       }},
      {"MeanAll", [&](Graph& g) { return MeanAll(Mul(g.Param(*a), g.Param(*a))); }},
      {"SumAll", [&](Graph& g) { return SumAll(Mul(g.Param(*a), g.Param(*c))); }},
      {"Pick", [&](Graph& g) { return Pick(Mul(g.Param(*a), g.Param(*a)), 2, 1); }},
  };
  const std::vector<Parameter*> params = {a.get(),    b.get(),    c.get(),
                                          row.get(),  gain.get(), bias.get(),
                                          table.get(), pos.get()};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, op] : ops) {
    const GradCheckReport r = FiniteDiffCheck(op, params, 1e-5);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = name;
    }
  }
  double model_worst = 0.0;
  std::string model_worst_name;
  for (Variant v : {Variant::kFull, Variant::kNoPdq, Variant::kNoEpe, Variant::kPsa}) {
    const GradCheckReport r = ReferenceGradCheck(v, 0, 1e-5);
    if (r.max_rel_error >= model_worst) {
      model_worst = r.max_rel_error;
      model_worst_name = std::string(VariantName(v));
    }
  }
  const double secs = Seconds(start);
  Outcome o;
  o.pass = worst < kTolerance && model_worst < kTolerance && secs < 60.0;
  o.detail = std::to_string(ops.size()) + " ops worst " + worst_name +
             Fmt(" %.2e", worst) + ", model loss worst " + model_worst_name +
             Fmt(" %.2e", model_worst) + " (< 1e-4)," + Fmt(" %.1f s (< 60 s)", secs);
  return o;
}

// ---- 2: decode oracle ----

Outcome DecodeOracle() {
  const auto start = Clock::now();
  Rng rng(7);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int len = 1 + static_cast<int>(rng.Below(4));
    const Matrix e = Random(rng, len, len);
    const std::vector<Span> decoded = DecodeSpans(e, 0.0);
    if (SpanMatrix::FromSpans(len, decoded) == BruteForceDecode(e)) ++agree;
  }
  const double secs = Seconds(start);
  return {agree == 200 && secs < 5.0,
          std::to_string(agree) + "/200 match brute force," +
              Fmt(" %.3f s (< 5 s)", secs)};
}

// ---- 3: closed forms ----

Outcome ClosedForms() {
  const double ln2 = std::log(2.0);
  Rng rng(3);
  double epe_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int len = 1 + static_cast<int>(rng.Below(8));
    SpanMatrix y(len);
    for (int i = 0; i < len; ++i) {
      for (int j = i; j < len; ++j) {
        if (rng.Bernoulli(0.3)) y.Set(i, j);
      }
    }
    Graph g;
    const double v = EpeLoss(g.Constant(Matrix(len, len)), y).value()(0, 0);
    epe_err = std::max(epe_err, std::abs(v - ln2));
  }
  double itc_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    ContrastBatch batch{g.Constant(Random(rng, 1, 6, -5, 5)),
                        g.Constant(Random(rng, 1, 6, -5, 5))};
    itc_worst = std::max(itc_worst, std::abs(ItcLoss(batch).value()(0, 0)));
  }
  double itm_err = 0.0;
  for (int label : {0, 1}) {
    Graph g;
    MatchBatch batch;
    batch.visual_query.push_back(g.Constant(Random(rng, 3, 5)));
    batch.description.push_back(g.Constant(Random(rng, 4, 5)));
    batch.labels.push_back(label);
    const double v = ItmLoss(batch, g.Constant(Matrix(2, 5))).value()(0, 0);
    itm_err = std::max(itm_err, std::abs(v - ln2));
  }
  return {epe_err <= 1e-12 && itc_worst == 0.0 && itm_err <= 1e-12,
          Fmt("|epe(E=0) - ln2| %.1e (<= 1e-12), ", epe_err) +
              Fmt("max |itc(B=1)| %.1e (== 0), ", itc_worst) +
              Fmt("|itm(0) - ln2| %.1e (<= 1e-12)", itm_err)};
}

// ---- 4: attention algebra ----

double RowSumError(const Matrix& w) {
  double worst = 0.0;
  for (int r = 0; r < w.rows(); ++r) {
    double s = 0.0;
    for (double v : w.row(r)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

Outcome AttentionAlgebra() {
  constexpr int kWidth = 8, kImage = 6;
  Rng rng(11);
  ParamStore store;
  const BlockParams block = MakeBlock(store, "acc", "acceptance", kWidth, 2, 16, kImage, rng);
  double row_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int len = 2 + static_cast<int>(rng.Below(6));
    const int p = 1 + static_cast<int>(rng.Below(len));
    const int li = 1 + static_cast<int>(rng.Below(6));
    Graph g;
    const AttentionResult plain = ScaledDotAttention(
        g.Constant(Random(rng, len, kWidth, -3, 3)), g.Constant(Random(rng, li, kWidth, -3, 3)),
        g.Constant(Random(rng, li, kWidth)));
    row_err = std::max(row_err, RowSumError(plain.weights.value()));
    SequenceState s{g.Constant(Random(rng, len, kWidth, -3, 3)), p,
                    SequenceKind::kPromptPlusDescription};
    ImageFeatures img{g.Constant(Random(rng, li, kImage, -3, 3))};
    row_err = std::max(row_err, RowSumError(I2TCrossAttention(*block.cross_attn, s, img).mean_weights));
  }
  int passthrough_bad = 0;
  for (int p : {1, 2, 4, 6}) {
    Graph g;
    const Matrix h = Random(rng, 7, kWidth);
    SequenceState s{g.Constant(h), p, SequenceKind::kPromptPlusDescription};
    ImageFeatures img{g.Constant(Random(rng, 4, kImage))};
    const Matrix out = CrossSublayer(block, s, img, nullptr, nullptr).value();
    for (int r = p; r < 7; ++r) {
      for (int c = 0; c < kWidth; ++c) passthrough_bad += out(r, c) != h(r, c);
    }
  }
  double perm_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int li = 2 + static_cast<int>(rng.Below(5));
    const Matrix feats = Random(rng, li, kImage, -2, 2);
    std::vector<int> perm(li);
    std::iota(perm.begin(), perm.end(), 0);
    rng.Shuffle(perm);
    Matrix permuted(li, kImage);
    for (int r = 0; r < li; ++r) {
      for (int c = 0; c < kImage; ++c) permuted(r, c) = feats(perm[r], c);
    }
    Graph g;
    SequenceState s{g.Constant(Random(rng, 5, kWidth)), 3, SequenceKind::kPromptPlusDescription};
    const Matrix x = CrossSublayer(block, s, ImageFeatures{g.Constant(feats)}, nullptr, nullptr).value();
    const Matrix y = CrossSublayer(block, s, ImageFeatures{g.Constant(permuted)}, nullptr, nullptr).value();
    for (int i = 0; i < static_cast<int>(x.values().size()); ++i) {
      perm_err = std::max(perm_err, std::abs(x.values()[i] - y.values()[i]));
    }
  }
  return {row_err <= 1e-9 && passthrough_bad == 0 && perm_err <= 1e-9,
          Fmt("row-sum error %.1e (<= 1e-9) over 100 configs, ", row_err) +
              std::to_string(passthrough_bad) + " passthrough entries changed (== 0), " +
              Fmt("permutation error %.1e (<= 1e-9)", perm_err)};
}

// ---- 5-7: end-to-end runs through the command-line tool ----

struct PipelineResult {
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::map<std::string, double> acc;  // task -> accuracy column
  std::map<std::string, double> f1;   // task -> F1 column
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int Cli(std::vector<std::string> args, std::string* log) {
  std::ostringstream out, err;
  const int code = cli::RunCli(args, out, err);
  *log += out.str() + err.str();
  return code;
}

// gen-data, pretrain, finetune and test eval for one variant under `dir`.
PipelineResult RunPipeline(const fs::path& conf, const fs::path& data,
                           const fs::path& dir, std::string_view variant) {
  PipelineResult r;
  std::string log;
  const auto start = Clock::now();
  fs::remove_all(dir);
  const std::string c = conf.string();
  const std::string v(variant);
  const std::vector<std::vector<std::string>> steps = {
      {"pretrain", "--config", c, "--variant", v, "--data", data.string(), "--out",
       (dir / "pretrain").string()},
      {"finetune", "--config", c, "--variant", v, "--data", data.string(), "--init",
       (dir / "pretrain" / "model.ckpt").string(), "--out", (dir / "finetune").string()},
      {"eval", "--config", c, "--variant", v, "--checkpoint",
       (dir / "finetune" / "model.ckpt").string(), "--eval-data",
       (data / "test.jsonl").string(), "--out", (dir / "eval").string()},
  };
  for (const auto& step : steps) {
    if (const int code = Cli(step, &log); code != 0) {
      r.error = step[0] + " exited " + std::to_string(code) + ": " + log;
      return r;
    }
  }
  r.seconds = Seconds(start);
  std::istringstream report(ReadFile(dir / "eval" / "report.csv"));
  std::string line;
  std::getline(report, line);  // header
  while (std::getline(report, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() < 6) continue;
    if (!cells[4].empty()) r.f1[cells[1]] = std::stod(cells[4]);
    if (!cells[5].empty()) r.acc[cells[1]] = std::stod(cells[5]);
  }
  r.ok = true;
  return r;
}

double GenData(const fs::path& conf, const fs::path& data, std::string* error) {
  const auto start = Clock::now();
  std::string log;
  fs::remove_all(data);
  if (Cli({"gen-data", "--config", conf.string(), "--out", data.string()}, &log) != 0) {
    *error = log;
  }
  return Seconds(start);
}

class EndToEnd {
 public:
  EndToEnd(fs::path conf, fs::path work) : conf_(std::move(conf)), work_(std::move(work)) {}

  Outcome Learning() {
    const PipelineResult& r = Run("full");
    if (!r.ok) return {false, r.error};
    const double mate = r.f1.at("MATE"), masc = r.acc.at("MASC");
    const double secs = gen_seconds_ + r.seconds;
    return {mate >= 0.95 && masc >= 0.90 && secs < 600.0,
            Fmt("test MATE F1 %.4f (>= 0.95), ", mate) +
                Fmt("MASC acc %.4f (>= 0.90), ", masc) +
                Fmt("%.0f s end to end (< 600 s)", secs)};
  }

  Outcome Ablation() {
    std::map<std::string, double> amb;
    for (const char* v : {"full", "no-pdq", "no-epe", "psa"}) {
      const PipelineResult& r = Run(v);
      if (!r.ok) return {false, r.error};
      amb[v] = r.acc.at("MASC-ambiguous");
    }
    const bool pass = amb["full"] > amb["no-pdq"] && amb["full"] > amb["no-epe"] &&
                      amb["full"] - amb["no-pdq"] >= 0.10 && amb["psa"] <= 0.45;
    std::string detail = "ambiguous-subset MASC acc";
    for (const char* v : {"full", "no-pdq", "no-epe", "psa"}) {
      detail += std::string(" ") + v + Fmt(" %.4f", amb[v]);
    }
    detail += "; need full > no-pdq + 0.10, full > no-epe, psa <= 0.45";
    return {pass, detail};
  }

  Outcome Determinism() {
    const PipelineResult& first = Run("full");
    if (!first.ok) return {false, first.error};
    const fs::path again = work_ / "full-repeat";
    const PipelineResult second = RunPipeline(conf_, Data(), again, "full");
    if (!second.ok) return {false, second.error};
    const fs::path a = work_ / "full";
    int same = 0;
    std::string differs;
    for (const char* f : {"pretrain/metrics.csv", "pretrain/model.ckpt",
                          "finetune/metrics.csv", "finetune/model.ckpt"}) {
      const std::string x = ReadFile(a / f), y = ReadFile(again / f);
      if (!x.empty() && x == y) {
        ++same;
      } else {
        differs += std::string(" ") + f;
      }
    }
    return {same == 4, std::to_string(same) +
                           "/4 metrics logs and checkpoints byte-identical" +
                           (differs.empty() ? "" : ", differing:" + differs)};
  }

 private:
  fs::path Data() {
    if (!data_ready_) {
      gen_seconds_ = GenData(conf_, work_ / "data", &gen_error_);
      data_ready_ = true;
    }
    return work_ / "data";
  }

  const PipelineResult& Run(const std::string& variant) {
    auto it = runs_.find(variant);
    if (it != runs_.end()) return it->second;
    const fs::path data = Data();
    PipelineResult r;
    if (!gen_error_.empty()) {
      r.error = "gen-data failed: " + gen_error_;
    } else {
      r = RunPipeline(conf_, data, work_ / variant, variant);
    }
    return runs_.emplace(variant, std::move(r)).first->second;
  }

  fs::path conf_, work_;
  bool data_ready_ = false;
  double gen_seconds_ = 0.0;
  std::string gen_error_;
  std::map<std::string, PipelineResult> runs_;
};

// ---- 8: stage defaults ----

Outcome StageDefaults() {
  struct Row {
    Stage stage;
    double itm, itc, epe, lr;
  };
  const Row table[] = {{Stage::kPretrain1, 2.0, 2.0, 1.0, 5e-5},
                       {Stage::kPretrain2, 1.0, 1.0, 1.0, 3e-5},
                       {Stage::kFinetune, 0.1, 0.1, 1.0, 2e-5}};
  int equal = 0;
  for (const Row& row : table) {
    const TrainConfig c = TrainConfig::Defaults(row.stage);
    equal += c.lambda_itm == row.itm && c.lambda_itc == row.itc &&
             c.lambda_epe == row.epe && c.learning_rate == row.lr;
  }
  return {equal == 3, std::to_string(equal) +
                          "/3 stage defaults equal (2/2/1 5e-5, 1/1/1 3e-5, 0.1/0.1/1 2e-5)"};
}

}  // namespace
}  // namespace dqpsa

int main(int argc, char** argv) {
  using namespace dqpsa;
  if (argc < 3) {
    std::cerr << "usage: acceptance <run.conf> <work-dir> [criterion ...]\n";
    return 2;
  }
  const fs::path conf = argv[1], work = argv[2];
  std::set<int> only;
  for (int i = 3; i < argc; ++i) only.insert(std::atoi(argv[i]));
  fs::create_directories(work);
  EndToEnd e2e(conf, work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", GradientSuite},
      {"decode oracle", DecodeOracle},
      {"closed-form losses", ClosedForms},
      {"attention algebra", AttentionAlgebra},
      {"end-to-end learning", [&] { return e2e.Learning(); }},
      {"ablation direction", [&] { return e2e.Ablation(); }},
      {"determinism", [&] { return e2e.Determinism(); }},
      {"stage defaults", StageDefaults},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " ("
              << criteria[i].first << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
