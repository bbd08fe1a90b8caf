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

// Tape-based reverse-mode differentiation over dense matrices.
//
// A Graph records nodes in creation order; since every op can only consume
// existing nodes, creation order is a topological order and Backward() walks
// it in reverse. Summation order inside every kernel is fixed, so identical
// inputs give bit-identical values and gradients.
//
// A Graph belongs to one thread. Parameters are read by reference, so several
// graphs may share a read-only parameter set concurrently as long as none of
// them runs Backward().

#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dqpsa/matrix.h"

namespace dqpsa {

inline constexpr double kLogClampEps = 1e-12;
inline constexpr double kLayerNormEps = 1e-5;

// A named trainable (or frozen) matrix plus its gradient accumulator.
struct Parameter {
  std::string name;
  std::string group;
  Matrix value;
  Matrix grad;
};

class Graph;

// Lightweight handle to a node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  const Matrix& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  // Called with the gradient of the node's output; accumulates into inputs.
  using BackwardFn = std::function<void(Graph&, int self, const Matrix& grad)>;

  // With record_gradients == false no backward closures are stored and
  // Backward() is unavailable (inference mode).
  explicit Graph(bool record_gradients = true)
      : record_(record_gradients) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Matrix value);
  Var Leaf(Matrix value, bool requires_grad = true);
  // Binds a parameter by reference. Repeated binds return the same node.
  // After Backward() the node gradient is added into p.grad.
  Var Param(Parameter& p);

  // Reverse pass from a 1x1 root.
  void Backward(Var root);

  const Matrix& Value(int id) const;
  // Gradient after Backward(); a zero matrix if the node received none.
  Matrix Grad(Var v) const;
  bool RequiresGrad(int id) const { return nodes_[id].requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // --- op authoring interface ---
  // Registers an op output. `fn` may be empty for ops with no grad path.
  Var Record(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  // Gradient buffer of node `id`, allocated on first use. Returns nullptr
  // when the node does not require a gradient.
  Matrix* GradBuffer(int id);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

// ---- Differentiable ops. All operands must belong to the same Graph. ----

Var MatMul(Var a, Var b);            // a[m x k] * b[k x n]
Var MatMulNT(Var a, Var b);          // a[m x k] * b[n x k]^T
Var Add(Var a, Var b);               // same shape
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);               // elementwise
Var AddRowBroadcast(Var x, Var row);  // x[m x n] + row[1 x n] on every row
Var Scale(Var x, double s);
Var AddScalar(Var x, double s);
Var Neg(Var x);
Var Transpose(Var x);
Var Concat(Var a, Var b, int axis);
Var ConcatRows(std::span<const Var> parts);
Var ConcatCols(std::span<const Var> parts);
// Half-open [begin, end) along `axis`.
Var Slice(Var x, int begin, int end, int axis);
Var SoftmaxRows(Var x);
Var LogSoftmaxRows(Var x);
Var Sigmoid(Var x);
// Natural log with input clamped to >= kLogClampEps (zero gradient below).
Var Log(Var x);
Var Gelu(Var x);
// Row-wise layer norm; gain and bias are 1 x n.
Var LayerNorm(Var x, Var gain, Var bias, double eps = kLayerNormEps);
// Rows of `table` selected by ids.
Var EmbeddingLookup(Var table, std::span<const int> ids);
// axis 0 -> 1 x n column means, axis 1 -> m x 1 row means.
Var Mean(Var x, int axis);
Var MeanAll(Var x);
Var SumAll(Var x);
// Single entry as a 1x1 node.
Var Pick(Var x, int row, int col);

}  // namespace dqpsa
