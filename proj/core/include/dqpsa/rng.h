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

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace dqpsa {

// Seeded generator with platform-independent draws.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are not (their algorithms are
// implementation-defined), so every derived draw is computed here:
//   Uniform01  = (u64 >> 11) * 2^-53                 in [0, 1)
//   Below(n)   = rejection sampling on u64           in [0, n)
//   Normal     = Box-Muller, one fresh pair per call (second value dropped)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t NextU64() { return engine_(); }
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  std::uint64_t Below(std::uint64_t n);
  double Normal();
  bool Bernoulli(double p) { return Uniform01() < p; }

  // Fisher-Yates using Below().
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent child seed; used to give subsystems their own
  // streams without coupling their draw counts.
  std::uint64_t Fork() { return NextU64() ^ 0x9E3779B97F4A7C15ULL; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace dqpsa
