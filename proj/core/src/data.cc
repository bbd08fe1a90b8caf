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

#include "dqpsa/data.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dqpsa/errors.h"
#include "dqpsa/rng.h"

namespace dqpsa {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary(std::vector<std::string> words)
    : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw FormatError("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
}

std::optional<int> Vocabulary::Find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::Id(std::string_view word) const {
  if (auto id = Find(word)) return *id;
  throw FormatError("unknown word '" + std::string(word) + "'");
}

const std::string& Vocabulary::Word(int id) const {
  if (id < 0 || id >= size()) {
    throw BoundsError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[id];
}

std::vector<int> Vocabulary::Encode(std::string_view text) const {
  std::vector<int> out;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) out.push_back(Id(w));
  return out;
}

std::string Vocabulary::Decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += Word(ids[i]);
  }
  return out;
}

// --------------------------------------------------------------------- world

namespace {

constexpr std::array<std::string_view, 3> kPolarityWords = {
    "positive", "negative", "neutral"};
constexpr std::array<Polarity, 3> kPolarities = {
    Polarity::kPositive, Polarity::kNegative, Polarity::kNeutral};

int PolarityIndex(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return 0;
    case Polarity::kNegative: return 1;
    case Polarity::kNeutral: return 2;
    case Polarity::kNone: break;
  }
  throw UsageError("polarity kNone has no index");
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t StreamSeed(std::uint64_t seed, std::string_view split) {
  return seed * 0x9E3779B97F4A7C15ULL ^ Fnv1a(split);
}

std::string ExampleId(std::string_view split, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", i);
  return std::string(split) + "-" + buf;
}

}  // namespace

SyntheticWorld::SyntheticWorld(SyntheticWorldSpec spec) : spec_(std::move(spec)) {
  if (spec_.entity_count < 10) {
    throw ConfigError("entity_count must be >= 10");
  }
  if (spec_.image_tokens < 3) throw ConfigError("image_tokens must be >= 3");
  if (spec_.raw_dim < 1) throw ConfigError("raw_dim must be >= 1");
  if (spec_.filler_words < 4) throw ConfigError("filler_words must be >= 4");
  if (spec_.ambiguity_rate < 0.0 || spec_.ambiguity_rate > 1.0) {
    throw ConfigError("ambiguity_rate must lie in [0, 1]");
  }
  if (spec_.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  for (const auto& cues : spec_.cue_lexicon) {
    if (cues.empty()) throw ConfigError("every polarity needs a cue word");
  }

  std::vector<std::string> words = {std::string(kPadToken),
                                    std::string(kClsToken), ",", ".", "?"};
  for (const char* w : {"extract", "all", "aspect", "terms", "what", "is",
                        "the", "sentiment", "of", "does", "this", "image",
                        "contains", "provide", "a", "description", "for"}) {
    words.emplace_back(w);
  }
  for (auto w : kPolarityWords) words.emplace_back(w);
  for (const auto& cues : spec_.cue_lexicon)
    for (const auto& w : cues) words.push_back(w);
  std::vector<std::vector<std::string>> name_words(spec_.entity_count);
  for (int e = 0; e < spec_.entity_count; ++e) {
    name_words[e].push_back("e" + std::to_string(e));
    if (spec_.two_token_every > 0 &&
        e % spec_.two_token_every == spec_.two_token_every - 1) {
      name_words[e].push_back("e" + std::to_string(e) + "b");
    }
    for (const auto& w : name_words[e]) words.push_back(w);
  }
  for (int i = 0; i < spec_.filler_words; ++i) {
    words.push_back("w" + std::to_string(i));
  }
  vocab_ = Vocabulary(std::move(words));
  for (const auto& nw : name_words) {
    std::vector<int> ids;
    for (const auto& w : nw) ids.push_back(vocab_.Id(w));
    names_.push_back(std::move(ids));
  }

  Rng rng(StreamSeed(spec_.seed, "world"));
  entity_sig_.resize(spec_.entity_count);
  for (auto& sig : entity_sig_) {
    sig.resize(spec_.raw_dim);
    for (double& v : sig) v = rng.Normal();
  }
  for (auto& sig : polarity_sig_) {
    sig.resize(spec_.raw_dim);
    for (double& v : sig) v = rng.Normal();
  }
}

std::vector<double> SyntheticWorld::Signature(int entity,
                                              Polarity polarity) const {
  std::vector<double> out = entity_sig_.at(entity);
  if (polarity != Polarity::kNone) {
    const auto& ps = polarity_sig_[PolarityIndex(polarity)];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += ps[i];
  }
  return out;
}

int SyntheticWorld::PolarityWordId(Polarity p) const {
  return vocab_.Id(kPolarityWords[PolarityIndex(p)]);
}

std::string_view PromptKindName(PromptKind k) {
  switch (k) {
    case PromptKind::kLabelChoice: return "label_choice";
    case PromptKind::kDescriptionChoice: return "description_choice";
    case PromptKind::kMabsa: return "mabsa";
  }
  return "mabsa";
}

std::optional<PromptKind> ParsePromptKind(std::string_view name) {
  if (name == "label_choice") return PromptKind::kLabelChoice;
  if (name == "description_choice") return PromptKind::kDescriptionChoice;
  if (name == "mabsa") return PromptKind::kMabsa;
  return std::nullopt;
}

const Matrix* Dataset::Image(const std::string& ref) const {
  if (ref.empty()) return nullptr;
  auto it = images.find(ref);
  return it == images.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------- generators

namespace {

Matrix NoiseImage(const SyntheticWorld& world, Rng& rng) {
  const auto& s = world.spec();
  Matrix img(s.image_tokens, s.raw_dim);
  for (double& v : img.values()) v = s.noise_sigma * rng.Normal();
  return img;
}

void PlaceRegion(Matrix& img, int row, const std::vector<double>& sig) {
  for (int c = 0; c < img.cols(); ++c) img(row, c) += sig[c];
}

// k distinct values from [0, n).
std::vector<int> SampleDistinct(Rng& rng, int n, int k) {
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  rng.Shuffle(all);
  all.resize(k);
  return all;
}

int Filler(const SyntheticWorld& world, Rng& rng) {
  const int n = world.spec().filler_words;
  return world.vocab().Id("w" + std::to_string(rng.Below(n)));
}

Dataset EmptyDataset(const SyntheticWorld& world) {
  Dataset ds;
  ds.vocab = world.vocab();
  return ds;
}

}  // namespace

Dataset GenLabelChoice(const SyntheticWorld& world, int n,
                       std::string_view split) {
  Rng rng(StreamSeed(world.spec().seed, split));
  Dataset ds = EmptyDataset(world);
  const int comma = world.vocab().Id(",");
  const int period = world.vocab().Id(".");
  for (int i = 0; i < n; ++i) {
    Example ex;
    ex.id = ExampleId(split, i);
    ex.prompt_kind = PromptKind::kLabelChoice;
    std::vector<int> candidates =
        SampleDistinct(rng, world.spec().entity_count, 10);
    const int correct = candidates[0];
    rng.Shuffle(candidates);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (c) ex.tokens.push_back(comma);
      const auto& name = world.EntityName(candidates[c]);
      const int start = static_cast<int>(ex.tokens.size());
      ex.tokens.insert(ex.tokens.end(), name.begin(), name.end());
      if (candidates[c] == correct) {
        ex.spans.push_back({start, static_cast<int>(ex.tokens.size()) - 1,
                            Polarity::kNone});
        ex.ambiguous.push_back(false);
      }
    }
    ex.tokens.push_back(period);
    Matrix img = NoiseImage(world, rng);
    PlaceRegion(img, static_cast<int>(rng.Below(img.rows())),
                world.Signature(correct, Polarity::kNone));
    ex.image_ref = ex.id;
    ds.images.emplace(ex.id, std::move(img));
    ex.description = world.EntityName(correct);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Dataset GenDescriptionChoice(const SyntheticWorld& world, int n,
                             std::string_view split) {
  Rng rng(StreamSeed(world.spec().seed, split));
  Dataset ds = EmptyDataset(world);
  const int comma = world.vocab().Id(",");
  const int period = world.vocab().Id(".");
  const int entities = world.spec().entity_count;
  auto describe = [&world](int e, Polarity p) {
    std::vector<int> d = world.EntityName(e);
    d.push_back(world.PolarityWordId(p));
    return d;
  };
  for (int i = 0; i < n; ++i) {
    Example ex;
    ex.id = ExampleId(split, i);
    ex.prompt_kind = PromptKind::kDescriptionChoice;
    const int entity = static_cast<int>(rng.Below(entities));
    const Polarity pol = kPolarities[rng.Below(3)];
    struct Choice {
      int entity;
      Polarity polarity;
    };
    std::vector<Choice> choices = {{entity, pol}};
    // One distractor shares the entity, so the polarity must be read off
    // the image; the other two name different entities.
    choices.push_back(
        {entity, kPolarities[(PolarityIndex(pol) + 1 + rng.Below(2)) % 3]});
    std::vector<int> others = SampleDistinct(rng, entities - 1, 2);
    for (int o : others) {
      choices.push_back({o >= entity ? o + 1 : o, kPolarities[rng.Below(3)]});
    }
    std::vector<int> order = {0, 1, 2, 3};
    rng.Shuffle(order);
    for (std::size_t c = 0; c < order.size(); ++c) {
      if (c) ex.tokens.push_back(comma);
      const Choice& ch = choices[order[c]];
      const auto d = describe(ch.entity, ch.polarity);
      const int start = static_cast<int>(ex.tokens.size());
      ex.tokens.insert(ex.tokens.end(), d.begin(), d.end());
      if (order[c] == 0) {
        ex.spans.push_back(
            {start, static_cast<int>(ex.tokens.size()) - 1, pol});
        ex.ambiguous.push_back(false);
      }
    }
    ex.tokens.push_back(period);
    Matrix img = NoiseImage(world, rng);
    PlaceRegion(img, static_cast<int>(rng.Below(img.rows())),
                world.Signature(entity, pol));
    ex.image_ref = ex.id;
    ds.images.emplace(ex.id, std::move(img));
    ex.description = describe(entity, pol);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Dataset GenMabsa(const SyntheticWorld& world, int n, std::string_view split) {
  Rng rng(StreamSeed(world.spec().seed, split));
  Dataset ds = EmptyDataset(world);
  const auto& spec = world.spec();
  const int period = world.vocab().Id(".");
  for (int i = 0; i < n; ++i) {
    Example ex;
    ex.id = ExampleId(split, i);
    ex.prompt_kind = PromptKind::kMabsa;
    const int k = 1 + static_cast<int>(rng.Below(3));
    const std::vector<int> entities = SampleDistinct(rng, spec.entity_count, k);
    const std::vector<int> slots = SampleDistinct(rng, spec.image_tokens, k);
    Matrix img = NoiseImage(world, rng);
    const int lead = 1 + static_cast<int>(rng.Below(2));
    for (int f = 0; f < lead; ++f) ex.tokens.push_back(Filler(world, rng));
    for (int a = 0; a < k; ++a) {
      const Polarity pol = kPolarities[rng.Below(3)];
      const bool omit_cue = rng.Bernoulli(spec.ambiguity_rate);
      const auto& name = world.EntityName(entities[a]);
      const int start = static_cast<int>(ex.tokens.size());
      ex.tokens.insert(ex.tokens.end(), name.begin(), name.end());
      ex.spans.push_back({start, static_cast<int>(ex.tokens.size()) - 1, pol});
      ex.ambiguous.push_back(omit_cue);
      const auto& cues = spec.cue_lexicon[PolarityIndex(pol)];
      const int cue = world.vocab().Id(cues[rng.Below(cues.size())]);
      if (!omit_cue) ex.tokens.push_back(cue);
      const int gap = 1 + static_cast<int>(rng.Below(2));
      for (int f = 0; f < gap; ++f) ex.tokens.push_back(Filler(world, rng));
      PlaceRegion(img, slots[a], world.Signature(entities[a], pol));
      ex.description.insert(ex.description.end(), name.begin(), name.end());
      ex.description.push_back(world.PolarityWordId(pol));
    }
    ex.tokens.push_back(period);
    ex.image_ref = ex.id;
    ds.images.emplace(ex.id, std::move(img));
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// ----------------------------------------------------------------------- I/O

std::string MatrixToCsv(const Matrix& m) {
  std::string out;
  char buf[512];
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      auto res = std::to_chars(buf, buf + sizeof(buf), m(r, c),
                               std::chars_format::fixed);
      if (res.ec != std::errc()) throw FormatError("cannot format double");
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

Matrix MatrixFromCsv(std::string_view text) {
  std::vector<double> values;
  int rows = 0, cols = -1;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    int count = 0;
    std::size_t at = 0;
    while (true) {
      std::size_t comma = line.find(',', at);
      std::string_view cell = line.substr(
          at, comma == std::string_view::npos ? line.size() - at : comma - at);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw FormatError("CSV row " + std::to_string(rows + 1) +
                          ": bad number '" + std::string(cell) + "'");
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      at = comma + 1;
    }
    if (cols >= 0 && count != cols) {
      throw FormatError("CSV row " + std::to_string(rows + 1) + " has " +
                        std::to_string(count) + " columns, expected " +
                        std::to_string(cols));
    }
    cols = count;
    ++rows;
  }
  return Matrix(rows, std::max(cols, 0), std::move(values));
}

void WriteFileAtomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string ReadFile(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

json ExampleToJson(const Example& ex) {
  json spans = json::array();
  for (const Span& s : ex.spans) {
    spans.push_back(json::array({s.start, s.end, PolarityCode(s.polarity)}));
  }
  json rec;
  rec["id"] = ex.id;
  rec["tokens"] = ex.tokens;
  rec["spans"] = spans;
  rec["prompt"] = {{"kind", PromptKindName(ex.prompt_kind)},
                   {"args", ex.prompt_args}};
  rec["image_ref"] =
      ex.image_ref.empty() ? json(nullptr) : json(ex.image_ref);
  rec["description"] = ex.description;
  rec["ambiguous"] = ex.ambiguous;
  return rec;
}

[[noreturn]] void FieldError(int line, std::string_view field,
                             std::string_view what) {
  throw FormatError("line " + std::to_string(line) + ": field '" +
                    std::string(field) + "': " + std::string(what));
}

const json& Require(const json& rec, int line, const char* field) {
  if (!rec.contains(field)) FieldError(line, field, "missing");
  return rec.at(field);
}

std::vector<int> IdList(const json& j, int line, const char* field,
                        int vocab_size) {
  if (!j.is_array()) FieldError(line, field, "expected an array of ids");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) FieldError(line, field, "non-integer id");
    const int id = v.get<int>();
    if (id < 0 || id >= vocab_size) FieldError(line, field, "id out of range");
    out.push_back(id);
  }
  return out;
}

Example ExampleFromJson(const json& rec, int line, int vocab_size) {
  if (!rec.is_object()) FieldError(line, "<record>", "not a JSON object");
  Example ex;
  const json& id = Require(rec, line, "id");
  if (!id.is_string()) FieldError(line, "id", "expected a string");
  ex.id = id.get<std::string>();
  ex.tokens = IdList(Require(rec, line, "tokens"), line, "tokens", vocab_size);

  const json& spans = Require(rec, line, "spans");
  if (!spans.is_array()) FieldError(line, "spans", "expected an array");
  for (const auto& s : spans) {
    if (!s.is_array() || s.size() != 3 || !s[0].is_number_integer() ||
        !s[1].is_number_integer() || !s[2].is_string()) {
      FieldError(line, "spans", "expected [start, end, polarity]");
    }
    auto pol = ParsePolarityCode(s[2].get<std::string>());
    if (!pol) FieldError(line, "spans", "unknown polarity");
    Span sp{s[0].get<int>(), s[1].get<int>(), *pol};
    if (sp.start < 0 || sp.start > sp.end ||
        sp.end >= static_cast<int>(ex.tokens.size())) {
      FieldError(line, "spans", "span outside token range");
    }
    ex.spans.push_back(sp);
  }

  const json& prompt = Require(rec, line, "prompt");
  if (!prompt.is_object() || !prompt.contains("kind") ||
      !prompt["kind"].is_string()) {
    FieldError(line, "prompt", "expected {\"kind\": ..., \"args\": [...]}");
  }
  auto kind = ParsePromptKind(prompt["kind"].get<std::string>());
  if (!kind) FieldError(line, "prompt", "unknown prompt kind");
  ex.prompt_kind = *kind;
  if (prompt.contains("args")) {
    if (!prompt["args"].is_array()) FieldError(line, "prompt", "bad args");
    for (const auto& a : prompt["args"]) {
      if (!a.is_string()) FieldError(line, "prompt", "non-string arg");
      ex.prompt_args.push_back(a.get<std::string>());
    }
  }

  const json& image = Require(rec, line, "image_ref");
  if (image.is_string()) {
    ex.image_ref = image.get<std::string>();
  } else if (!image.is_null()) {
    FieldError(line, "image_ref", "expected a string or null");
  }

  if (rec.contains("description")) {
    ex.description =
        IdList(rec["description"], line, "description", vocab_size);
  }
  if (rec.contains("ambiguous")) {
    const json& amb = rec["ambiguous"];
    if (!amb.is_array() || amb.size() != ex.spans.size()) {
      FieldError(line, "ambiguous", "expected one boolean per span");
    }
    for (const auto& b : amb) {
      if (!b.is_boolean()) FieldError(line, "ambiguous", "non-boolean entry");
      ex.ambiguous.push_back(b.get<bool>());
    }
  } else {
    ex.ambiguous.assign(ex.spans.size(), false);
  }
  return ex;
}

fs::path ImagePath(const fs::path& dir, const std::string& ref) {
  return dir / "images" / (ref + ".csv");
}

}  // namespace

void SaveDataset(const Dataset& dataset, const fs::path& path) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : ".";
  std::string vocab;
  for (const auto& w : dataset.vocab.words()) vocab += w + "\n";
  WriteFileAtomic(dir / "vocab.txt", vocab);
  for (const auto& [ref, img] : dataset.images) {
    WriteFileAtomic(ImagePath(dir, ref), MatrixToCsv(img));
  }
  std::string lines;
  for (const Example& ex : dataset.examples) {
    lines += ExampleToJson(ex).dump();
    lines += '\n';
  }
  WriteFileAtomic(path, lines);
}

Dataset LoadDataset(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError("no dataset at " + path.string());
  const fs::path dir = path.has_parent_path() ? path.parent_path() : ".";
  Dataset ds;
  {
    std::vector<std::string> words;
    std::istringstream is(ReadFile(dir / "vocab.txt"));
    std::string w;
    while (std::getline(is, w)) {
      if (!w.empty()) words.push_back(w);
    }
    ds.vocab = Vocabulary(std::move(words));
  }
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
      FieldError(line_no, "<record>", e.what());
    }
    Example ex = ExampleFromJson(rec, line_no, ds.vocab.size());
    if (!ex.image_ref.empty() && !ds.images.contains(ex.image_ref)) {
      const fs::path img = ImagePath(dir, ex.image_ref);
      if (!fs::exists(img)) {
        throw MissingFileError("line " + std::to_string(line_no) +
                               ": image file " + img.string() + " not found");
      }
      try {
        ds.images.emplace(ex.image_ref, MatrixFromCsv(ReadFile(img)));
      } catch (const FormatError& e) {
        FieldError(line_no, "image_ref", e.what());
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// ----------------------------------------------------------------- views

std::string_view TaskKindName(TaskKind k) {
  switch (k) {
    case TaskKind::kLabelChoice: return "label_choice";
    case TaskKind::kDescriptionChoice: return "description_choice";
    case TaskKind::kMate: return "MATE";
    case TaskKind::kMasc: return "MASC";
  }
  return "MATE";
}

std::vector<int> MatePrompt(const Vocabulary& vocab) {
  return vocab.Encode("[CLS] extract all aspect terms .");
}

std::vector<int> MascPrompt(const Vocabulary& vocab,
                            const std::vector<int>& aspect_tokens) {
  std::vector<int> p = vocab.Encode("[CLS] what is the sentiment of");
  p.insert(p.end(), aspect_tokens.begin(), aspect_tokens.end());
  p.push_back(vocab.Id("?"));
  return p;
}

namespace {

std::vector<int> WithCls(const Vocabulary& vocab, const std::vector<int>& t) {
  std::vector<int> out = {vocab.Id(kClsToken)};
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

TaskInstance BaseInstance(const Dataset& ds, const Example& ex) {
  TaskInstance t;
  t.example_id = ex.id;
  t.image = ds.Image(ex.image_ref);
  t.description = WithCls(ds.vocab, ex.description);
  return t;
}

}  // namespace

TaskInstance PretrainView(const Dataset& ds, const Example& ex) {
  TaskInstance t = BaseInstance(ds, ex);
  t.text = ex.tokens;
  for (const Span& s : ex.spans) t.gold.push_back({s.start, s.end});
  if (ex.prompt_kind == PromptKind::kLabelChoice) {
    t.task = TaskKind::kLabelChoice;
    t.prompt = ds.vocab.Encode("[CLS] what does this image contains .");
  } else if (ex.prompt_kind == PromptKind::kDescriptionChoice) {
    t.task = TaskKind::kDescriptionChoice;
    t.prompt = ds.vocab.Encode("[CLS] provide a description for image .");
  } else {
    throw UsageError("PretrainView on a non-pretraining example");
  }
  return t;
}

TaskInstance MateView(const Dataset& ds, const Example& ex) {
  TaskInstance t = BaseInstance(ds, ex);
  t.task = TaskKind::kMate;
  t.prompt = MatePrompt(ds.vocab);
  t.text = ex.tokens;
  for (const Span& s : ex.spans) t.gold.push_back({s.start, s.end});
  return t;
}

TaskInstance MascView(const Dataset& ds, const Example& ex, const Span& aspect,
                      Polarity target, bool ambiguous) {
  if (aspect.start < 0 || aspect.start > aspect.end ||
      aspect.end >= static_cast<int>(ex.tokens.size())) {
    throw BoundsError("aspect span outside example text");
  }
  TaskInstance t = BaseInstance(ds, ex);
  t.task = TaskKind::kMasc;
  std::vector<int> aspect_tokens(ex.tokens.begin() + aspect.start,
                                 ex.tokens.begin() + aspect.end + 1);
  t.prompt = MascPrompt(ds.vocab, aspect_tokens);
  t.text = ex.tokens;
  t.candidate_offset = static_cast<int>(t.text.size());
  for (auto w : kPolarityWords) t.text.push_back(ds.vocab.Id(w));
  t.target = target;
  t.ambiguous = ambiguous;
  if (target != Polarity::kNone) {
    const int at = t.candidate_offset + PolarityIndex(target);
    t.gold.push_back({at, at, target});
  }
  return t;
}

std::vector<TaskInstance> MascViews(const Dataset& ds, const Example& ex) {
  std::vector<TaskInstance> out;
  for (std::size_t i = 0; i < ex.spans.size(); ++i) {
    const bool amb = i < ex.ambiguous.size() && ex.ambiguous[i];
    out.push_back(MascView(ds, ex, ex.spans[i], ex.spans[i].polarity, amb));
  }
  return out;
}

std::vector<TaskInstance> FinetuneViews(const Dataset& ds) {
  std::vector<TaskInstance> out;
  for (const Example& ex : ds.examples) {
    out.push_back(MateView(ds, ex));
    for (auto& v : MascViews(ds, ex)) out.push_back(std::move(v));
  }
  return out;
}

std::vector<TaskInstance> PretrainViews(const Dataset& ds) {
  std::vector<TaskInstance> out;
  for (const Example& ex : ds.examples) out.push_back(PretrainView(ds, ex));
  return out;
}

// ---------------------------------------------------------------- metrics

EvalReport SpanPrf1(const std::vector<std::vector<Span>>& gold,
                    const std::vector<std::vector<Span>>& pred,
                    MatchMode mode) {
  if (gold.size() != pred.size()) {
    throw DimensionError("gold and prediction lists differ in length");
  }
  auto key = [mode](const Span& s) {
    return std::tuple(s.start, s.end,
                      mode == MatchMode::kSpanAndPolarity ? s.polarity
                                                          : Polarity::kNone);
  };
  EvalReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<std::tuple<int, int, Polarity>> g, p;
    for (const Span& s : gold[i]) g.insert(key(s));
    for (const Span& s : pred[i]) p.insert(key(s));
    r.gold += static_cast<long>(g.size());
    r.predicted += static_cast<long>(p.size());
    for (const auto& s : p) r.correct += g.contains(s);
  }
  r.precision = r.predicted ? double(r.correct) / r.predicted : 0.0;
  r.recall = r.gold ? double(r.correct) / r.gold : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

EvalReport PolarityAccuracy(const std::vector<Polarity>& gold,
                            const std::vector<Polarity>& pred) {
  if (gold.size() != pred.size()) {
    throw DimensionError("gold and prediction lists differ in length");
  }
  EvalReport r;
  r.gold = r.predicted = static_cast<long>(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) r.correct += gold[i] == pred[i];
  r.accuracy = r.gold ? double(r.correct) / r.gold : 0.0;
  // One label per aspect, so micro P = R = F1 = accuracy.
  r.precision = r.recall = r.f1 = r.accuracy;
  return r;
}

}  // namespace dqpsa
