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

#include <memory>
#include <string>
#include <vector>

#include "dqpsa/graph.h"
#include "dqpsa/rng.h"

namespace dqpsa {

// Owns parameters in declaration order. Addresses are stable for the life of
// the store; the order is the initialization order and the checkpoint order.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& Add(std::string name, std::string group, Matrix value);
  // uniform(-a, a), a = sqrt(6 / (rows + cols)); drawn row-major.
  Parameter& AddXavier(std::string name, std::string group, int rows, int cols,
                       Rng& rng);
  Parameter& AddConstant(std::string name, std::string group, int rows,
                         int cols, double value);

  std::vector<Parameter*> All() const;
  std::vector<Parameter*> InGroup(const std::string& group) const;
  Parameter* Find(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t ScalarCount() const;

  void ZeroGrad();
  std::vector<Matrix> Snapshot() const;
  void Restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

}  // namespace dqpsa
