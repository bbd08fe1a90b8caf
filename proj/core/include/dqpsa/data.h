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

// Synthetic corpora, dataset files and task views.
//
// A closed whitespace vocabulary is derived from SyntheticWorldSpec. Every
// entity has a fixed raw image signature u_e and every polarity a fixed
// signature v_p; an image region showing entity e with polarity p is
// u_e + v_p plus Gaussian noise. Sentiment cues in text are omitted with
// probability `ambiguity_rate`, in which case only the image carries the
// polarity.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dqpsa/matrix.h"
#include "dqpsa/span.h"

namespace dqpsa {

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  int Id(std::string_view word) const;  // throws FormatError if unknown
  std::optional<int> Find(std::string_view word) const;
  const std::string& Word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  std::vector<int> Encode(std::string_view whitespace_text) const;
  std::string Decode(const std::vector<int>& ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kClsToken = "[CLS]";

struct SyntheticWorldSpec {
  int filler_words = 40;       // size of the neutral filler vocabulary
  int entity_count = 24;       // >= 10 (label-choice lists ten names)
  int two_token_every = 4;     // every n-th entity has a two-token name; 0 = none
  int image_tokens = 4;        // L_I rows per image
  int raw_dim = 16;            // d_raw
  double ambiguity_rate = 0.5;  // rho
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;
  // Text cue words per polarity (positive, negative, neutral).
  std::array<std::vector<std::string>, 3> cue_lexicon = {{
      {"great", "lovely", "superb"},
      {"awful", "terrible", "poor"},
      {"okay", "average", "plain"},
  }};
};

// Deterministic world: vocabulary, entity names and image signatures.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(SyntheticWorldSpec spec);

  const SyntheticWorldSpec& spec() const { return spec_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<int>& EntityName(int entity) const { return names_[entity]; }
  // Raw region vector for (entity, polarity) without noise. Polarity kNone
  // contributes no polarity signature.
  std::vector<double> Signature(int entity, Polarity polarity) const;
  int PolarityWordId(Polarity p) const;  // "positive" / "negative" / "neutral"

 private:
  SyntheticWorldSpec spec_;
  Vocabulary vocab_;
  std::vector<std::vector<int>> names_;
  std::vector<std::vector<double>> entity_sig_;
  std::array<std::vector<double>, 3> polarity_sig_;
};

enum class PromptKind { kLabelChoice, kDescriptionChoice, kMabsa };
std::string_view PromptKindName(PromptKind k);
std::optional<PromptKind> ParsePromptKind(std::string_view name);

struct Example {
  std::string id;
  std::vector<int> tokens;
  std::string image_ref;  // empty when there is no image
  PromptKind prompt_kind = PromptKind::kMabsa;
  std::vector<std::string> prompt_args;
  std::vector<Span> spans;         // gold spans with polarity
  std::vector<int> description;    // token ids, no [CLS]
  std::vector<bool> ambiguous;     // per span: sentiment cue absent from text

  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  Vocabulary vocab;
  std::vector<Example> examples;
  std::map<std::string, Matrix> images;  // image_ref -> L_I x d_raw

  const Matrix* Image(const std::string& ref) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Image-contains-entity choice: ten candidate names, one correct.
Dataset GenLabelChoice(const SyntheticWorld& world, int n,
                       std::string_view split = "lc");
// Relevant description among one relevant and three irrelevant ones.
Dataset GenDescriptionChoice(const SyntheticWorld& world, int n,
                             std::string_view split = "dc");
// Aspect/sentiment sentences with 1-3 aspects.
Dataset GenMabsa(const SyntheticWorld& world, int n,
                 std::string_view split = "mabsa");

// Writes `<path>` (one JSON record per line), `<dir>/vocab.txt` and
// `<dir>/images/<image_ref>.csv`. Each file is written atomically.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& path);
// Throws FormatError naming the line and field on malformed records.
Dataset LoadDataset(const std::filesystem::path& path);

// Matrix <-> CSV with shortest round-trip fixed-notation doubles.
std::string MatrixToCsv(const Matrix& m);
Matrix MatrixFromCsv(std::string_view text);

// Writes `contents` to a sibling temp file, then renames over `path`.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

// ---- task views ----

enum class TaskKind { kLabelChoice, kDescriptionChoice, kMate, kMasc };
std::string_view TaskKindName(TaskKind k);

// One model input: prompt (with [CLS], unpadded), text, gold spans over text
// positions, optional image and the description used by matching/contrast.
struct TaskInstance {
  std::string example_id;
  TaskKind task = TaskKind::kMate;
  std::vector<int> prompt;
  std::vector<int> text;
  std::vector<Span> gold;
  const Matrix* image = nullptr;
  std::vector<int> description;  // with leading [CLS]
  // MASC only.
  int candidate_offset = -1;  // text position of "positive"
  Polarity target = Polarity::kNone;
  bool ambiguous = false;
};

std::vector<int> MatePrompt(const Vocabulary& vocab);
std::vector<int> MascPrompt(const Vocabulary& vocab,
                            const std::vector<int>& aspect_tokens);

// Pretraining record -> single instance.
TaskInstance PretrainView(const Dataset& ds, const Example& ex);
TaskInstance MateView(const Dataset& ds, const Example& ex);
// MASC instance for an arbitrary aspect span of `ex` (gold or predicted).
// The text is ex.tokens followed by "positive negative neutral"; the gold
// span is the polarity word of `target` (none when target is kNone).
TaskInstance MascView(const Dataset& ds, const Example& ex, const Span& aspect,
                      Polarity target, bool ambiguous);
std::vector<TaskInstance> MascViews(const Dataset& ds, const Example& ex);
// MATE plus all MASC views of every example, in example order.
std::vector<TaskInstance> FinetuneViews(const Dataset& ds);
std::vector<TaskInstance> PretrainViews(const Dataset& ds);

// ---- metrics ----

enum class MatchMode { kSpanOnly, kSpanAndPolarity };

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // MASC only
  long gold = 0;
  long predicted = 0;
  long correct = 0;
};

// Corpus-level micro P/R/F1. A zero denominator yields 0.
EvalReport SpanPrf1(const std::vector<std::vector<Span>>& gold,
                    const std::vector<std::vector<Span>>& pred,
                    MatchMode mode);

EvalReport PolarityAccuracy(const std::vector<Polarity>& gold,
                            const std::vector<Polarity>& pred);

}  // namespace dqpsa
