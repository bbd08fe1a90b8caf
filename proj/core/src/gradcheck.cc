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

#include "dqpsa/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "dqpsa/errors.h"

namespace dqpsa {

double RelativeGradError(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport FiniteDiffCheck(const LossBuilder& loss,
                                std::span<Parameter* const> params,
                                double h) {
  if (h <= 0.0) throw UsageError("finite difference step must be positive");
  for (Parameter* p : params) p->grad = Matrix(p->value.rows(), p->value.cols());
  {
    Graph g;
    Var root = loss(g);
    g.Backward(root);
  }
  auto eval = [&loss]() {
    Graph g(/*record_gradients=*/false);
    return loss(g).value()[0];
  };

  GradCheckReport report;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = eval();
      p->value[i] = saved - h;
      const double down = eval();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double err = RelativeGradError(analytic, numeric);
      ++report.entries_checked;
      if (err > report.max_rel_error || report.worst_param.empty()) {
        if (err >= report.max_rel_error) {
          report.max_rel_error = err;
          report.worst_param = p->name;
          report.worst_index = i;
          report.worst_analytic = analytic;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace dqpsa
