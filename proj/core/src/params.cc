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

#include "dqpsa/params.h"

#include <cmath>

#include "dqpsa/errors.h"

namespace dqpsa {

Parameter& ParamStore::Add(std::string name, std::string group, Matrix value) {
  if (Find(name) != nullptr) throw ConfigError("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->group = std::move(group);
  p->grad = Matrix(value.rows(), value.cols());
  p->value = std::move(value);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParamStore::AddXavier(std::string name, std::string group, int rows,
                                 int cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.Uniform(-a, a);
  return Add(std::move(name), std::move(group), std::move(m));
}

Parameter& ParamStore::AddConstant(std::string name, std::string group,
                                   int rows, int cols, double value) {
  return Add(std::move(name), std::move(group), Matrix(rows, cols, value));
}

std::vector<Parameter*> ParamStore::All() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParamStore::InGroup(const std::string& group) const {
  std::vector<Parameter*> out;
  for (const auto& p : params_)
    if (p->group == group) out.push_back(p.get());
  return out;
}

Parameter* ParamStore::Find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParamStore::ScalarCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamStore::ZeroGrad() {
  for (auto& p : params_) p->grad.SetZero();
}

std::vector<Matrix> ParamStore::Snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamStore::Restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) {
    throw DimensionError("snapshot has a different parameter count");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].SameShape(params_[i]->value)) {
      throw DimensionError("snapshot shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = values[i];
  }
}

}  // namespace dqpsa
