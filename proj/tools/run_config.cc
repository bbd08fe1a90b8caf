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

#include "run_config.h"

#include <charconv>
#include <functional>
#include <sstream>

#include "dqpsa/errors.h"

namespace dqpsa::cli {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Bad(std::string_view key, std::string_view value,
                      std::string_view expected) {
  throw ConfigError(std::string(key) + ": expected " + std::string(expected) +
                    ", got '" + std::string(value) + "'");
}

template <typename T>
T ParseNumber(std::string_view key, std::string_view value,
              std::string_view expected) {
  T out{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || res.ec != std::errc() ||
      res.ptr != value.data() + value.size()) {
    Bad(key, value, expected);
  }
  return out;
}

int ParseInt(std::string_view k, std::string_view v) {
  return ParseNumber<int>(k, v, "an integer");
}
double ParseDouble(std::string_view k, std::string_view v) {
  return ParseNumber<double>(k, v, "a number");
}

bool ParseBool(std::string_view key, std::string_view value) {
  if (value == "true") return true;
  if (value == "false") return false;
  Bad(key, value, "true or false");
}

std::vector<std::string> ParseList(std::string_view value) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (at <= value.size()) {
    std::size_t comma = value.find(',', at);
    if (comma == std::string_view::npos) comma = value.size();
    std::string item = Trim(value.substr(at, comma - at));
    if (!item.empty()) out.push_back(std::move(item));
    at = comma + 1;
  }
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string JoinList(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename M>
Field IntField(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(c)); },
          [member, key](RunConfig& c, std::string_view v) {
            member(c) = ParseInt(key, v);
          }};
}

template <typename M>
Field DoubleField(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return FormatDouble(member(c)); },
          [member, key](RunConfig& c, std::string_view v) {
            member(c) = ParseDouble(key, v);
          }};
}

template <typename M>
Field StringField(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return member(c); },
          [member](RunConfig& c, std::string_view v) { member(c) = std::string(v); }};
}

// Mutable/const accessor pair folded into one generic lambda.
#define DQPSA_MEMBER(expr) [](auto& c) -> auto& { return expr; }

void AddStageFields(std::vector<Field>& fields, const std::string& name,
                    TrainConfig TwoStageConfigs::*stage) {
  fields.push_back(DoubleField(name + ".lambda_itm",
                               [stage](auto& c) -> auto& { return (c.stages.*stage).lambda_itm; }));
  fields.push_back(DoubleField(name + ".lambda_itc",
                               [stage](auto& c) -> auto& { return (c.stages.*stage).lambda_itc; }));
  fields.push_back(DoubleField(name + ".lambda_epe",
                               [stage](auto& c) -> auto& { return (c.stages.*stage).lambda_epe; }));
  fields.push_back(DoubleField(name + ".lr",
                               [stage](auto& c) -> auto& { return (c.stages.*stage).learning_rate; }));
  fields.push_back(IntField(name + ".epochs",
                            [stage](auto& c) -> auto& { return (c.stages.*stage).epochs; }));
  const std::string key = name + ".frozen";
  fields.push_back(
      {key,
       [stage](const RunConfig& c) { return JoinList((c.stages.*stage).frozen_groups); },
       [stage](RunConfig& c, std::string_view v) {
         (c.stages.*stage).frozen_groups = ParseList(v);
       }});
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, std::string_view v) {
                   c.seed = ParseNumber<std::uint64_t>("seed", v, "an unsigned integer");
                 }});
    f.push_back({"variant",
                 [](const RunConfig& c) { return std::string(VariantName(c.variant)); },
                 [](RunConfig& c, std::string_view v) {
                   auto parsed = ParseVariant(v);
                   if (!parsed) Bad("variant", v, "full, no-pdq, no-epe or psa");
                   c.variant = *parsed;
                 }});
    f.push_back(StringField("out", DQPSA_MEMBER(c.out)));
    f.push_back(StringField("data", DQPSA_MEMBER(c.data)));
    f.push_back(StringField("init", DQPSA_MEMBER(c.init)));
    f.push_back(StringField("checkpoint", DQPSA_MEMBER(c.checkpoint)));
    f.push_back(StringField("eval_data", DQPSA_MEMBER(c.eval_data)));
    f.push_back(StringField("predictions", DQPSA_MEMBER(c.predictions)));

    f.push_back(IntField("entity_count", DQPSA_MEMBER(c.world.entity_count)));
    f.push_back(IntField("filler_words", DQPSA_MEMBER(c.world.filler_words)));
    f.push_back(IntField("two_token_every", DQPSA_MEMBER(c.world.two_token_every)));
    f.push_back(IntField("image_tokens", DQPSA_MEMBER(c.world.image_tokens)));
    f.push_back(DoubleField("rho", DQPSA_MEMBER(c.world.ambiguity_rate)));
    f.push_back(DoubleField("sigma", DQPSA_MEMBER(c.world.noise_sigma)));
    f.push_back(IntField("n_train", DQPSA_MEMBER(c.n_train)));
    f.push_back(IntField("n_dev", DQPSA_MEMBER(c.n_dev)));
    f.push_back(IntField("n_test", DQPSA_MEMBER(c.n_test)));
    f.push_back(IntField("n_pretrain", DQPSA_MEMBER(c.n_pretrain)));

    f.push_back(IntField("d", DQPSA_MEMBER(c.geometry.width)));
    f.push_back(IntField("N", DQPSA_MEMBER(c.geometry.pdq_blocks)));
    f.push_back(IntField("M", DQPSA_MEMBER(c.geometry.text_blocks)));
    f.push_back(IntField("heads", DQPSA_MEMBER(c.geometry.heads)));
    f.push_back(IntField("prompt_len", DQPSA_MEMBER(c.geometry.prompt_len)));
    f.push_back(IntField("d_img", DQPSA_MEMBER(c.geometry.image_width)));
    f.push_back(IntField("d_raw", DQPSA_MEMBER(c.geometry.raw_width)));
    f.push_back(IntField("ffn_mult", DQPSA_MEMBER(c.geometry.ffn_mult)));
    f.push_back(IntField("max_len", DQPSA_MEMBER(c.geometry.max_len)));
    f.push_back(IntField("d_e", DQPSA_MEMBER(c.geometry.energy_width)));

    f.push_back(IntField("batch_size", DQPSA_MEMBER(c.batch_size)));
    f.push_back(IntField("patience", DQPSA_MEMBER(c.patience)));
    f.push_back(DoubleField("weight_decay", DQPSA_MEMBER(c.weight_decay)));
    f.push_back(DoubleField("clip_norm", DQPSA_MEMBER(c.clip_norm)));
    AddStageFields(f, "pretrain1", &TwoStageConfigs::pretrain1);
    AddStageFields(f, "pretrain2", &TwoStageConfigs::pretrain2);
    AddStageFields(f, "finetune", &TwoStageConfigs::finetune);

    f.push_back(IntField("dump_limit", DQPSA_MEMBER(c.dump_limit)));
    f.push_back({"dump_pgm",
                 [](const RunConfig& c) { return std::string(c.dump_pgm ? "true" : "false"); },
                 [](RunConfig& c, std::string_view v) { c.dump_pgm = ParseBool("dump_pgm", v); }});
    return f;
  }();
  return fields;
}

#undef DQPSA_MEMBER

}  // namespace

void RunConfig::Validate() const {
  if (world.ambiguity_rate < 0.0 || world.ambiguity_rate > 1.0) {
    throw ConfigError("rho: must lie in [0, 1]");
  }
  if (world.noise_sigma < 0.0) throw ConfigError("sigma: must be >= 0");
  if (world.entity_count < 10) throw ConfigError("entity_count: must be >= 10");
  if (world.filler_words < 4) throw ConfigError("filler_words: must be >= 4");
  if (world.image_tokens < 3) throw ConfigError("image_tokens: must be >= 3");
  if (world.two_token_every < 0) throw ConfigError("two_token_every: must be >= 0");
  if (n_train < 1) throw ConfigError("n_train: must be >= 1");
  if (n_dev < 1) throw ConfigError("n_dev: must be >= 1");
  if (n_test < 1) throw ConfigError("n_test: must be >= 1");
  if (n_pretrain < 1) throw ConfigError("n_pretrain: must be >= 1");
  if (dump_limit < 1) throw ConfigError("dump_limit: must be >= 1");
  if (out.empty()) throw ConfigError("out: must not be empty");
  ModelGeometry g = geometry;
  g.vocab_size = std::max(g.vocab_size, 1);
  g.Validate();
  for (Stage s : {Stage::kPretrain1, Stage::kPretrain2, Stage::kFinetune}) {
    try {
      StageConfig(s).Validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(StageName(s)) + "." + e.what());
    }
  }
}

TrainConfig RunConfig::StageConfig(Stage stage) const {
  TrainConfig c = stage == Stage::kPretrain1   ? stages.pretrain1
                  : stage == Stage::kPretrain2 ? stages.pretrain2
                                               : stages.finetune;
  c.stage = stage;
  c.batch_size = batch_size;
  c.patience = patience;
  c.weight_decay = weight_decay;
  c.clip_norm = clip_norm;
  c.seed = seed;
  return c;
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const Field& f : Fields()) keys.push_back(f.key);
  return keys;
}

void SetConfigValue(RunConfig& config, std::string_view key,
                    std::string_view value) {
  for (const Field& f : Fields()) {
    if (f.key == key) {
      f.set(config, Trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void ApplyConfigText(RunConfig& config, std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    try {
      SetConfigValue(config, Trim(trimmed.substr(0, eq)),
                     Trim(trimmed.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string ConfigText(const RunConfig& config) {
  std::string out;
  for (const Field& f : Fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace dqpsa::cli
