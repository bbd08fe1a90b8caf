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

#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace dqpsa {

enum class Polarity { kPositive, kNegative, kNeutral, kNone };

std::string_view PolarityCode(Polarity p);  // "POS", "NEG", "NEU", "NONE"
std::optional<Polarity> ParsePolarityCode(std::string_view code);

// Inclusive token interval [start, end], optionally labelled.
struct Span {
  int start = 0;
  int end = 0;
  Polarity polarity = Polarity::kNone;

  auto operator<=>(const Span&) const = default;
};

}  // namespace dqpsa
