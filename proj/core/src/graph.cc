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

#include "dqpsa/graph.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "dqpsa/errors.h"

namespace dqpsa {

const Matrix& Var::value() const { return graph_->Value(id_); }
bool Var::requires_grad() const { return graph_->RequiresGrad(id_); }

Var Graph::Constant(Matrix value) { return Leaf(std::move(value), false); }

Var Graph::Leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::Param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

const Matrix& Graph::Value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Matrix Graph::Grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  const Matrix& val = Value(v.id());
  return Matrix(val.rows(), val.cols());
}

Var Graph::Record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& in : inputs) {
      if (in.graph() != this) {
        throw UsageError("operand belongs to a different graph");
      }
      n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix* Graph::GradBuffer(int id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    const Matrix& val = n.external ? *n.external : n.value;
    n.grad = Matrix(val.rows(), val.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

void Graph::Backward(Var root) {
  if (!record_) throw UsageError("Backward on a graph built without recording");
  if (root.graph() != this) throw UsageError("root belongs to another graph");
  const Matrix& rv = Value(root.id());
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw UsageError("Backward root must be scalar, got " + rv.ShapeString());
  }
  if (backward_done_) throw UsageError("Backward called twice on one graph");
  backward_done_ = true;
  Matrix* seed = GradBuffer(root.id());
  if (seed == nullptr) return;
  (*seed)[0] = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (n.backward) {
      // The closure may touch other nodes' buffers but never this one.
      n.backward(*this, id, n.grad);
    }
    if (n.param != nullptr) {
      if (n.param->grad.SameShape(n.param->value)) {
        n.param->grad.AddInPlace(n.grad);
      } else {
        n.param->grad = n.grad;
      }
    }
  }
}

namespace {

Graph& SameGraph(Var a, Var b) {
  if (a.graph() != b.graph()) throw UsageError("operands on different graphs");
  return *a.graph();
}

void RequireSameShape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.SameShape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.ShapeString() + " vs " + b.ShapeString());
  }
}

template <typename F>
Matrix Map(const Matrix& x, F f) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var MatMul(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + av.ShapeString() +
                         " x " + bv.ShapeString());
  }
  Matrix out;
  MatMulInto(av, bv, out);
  const int ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return g.Record(std::move(out), ins,
                  [ia, ib](Graph& g, int, const Matrix& gr) {
                    if (Matrix* ga = g.GradBuffer(ia)) {
                      MatMulNTAccumulate(gr, g.Value(ib), *ga);  // g * b^T
                    }
                    if (Matrix* gb = g.GradBuffer(ib)) {
                      MatMulTNAccumulate(g.Value(ia), gr, *gb);  // a^T * g
                    }
                  });
}

Var MatMulNT(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ " +
                         av.ShapeString() + " x " + bv.ShapeString() + "^T");
  }
  Matrix out(av.rows(), bv.rows());
  MatMulNTAccumulate(av, bv, out);
  const int ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return g.Record(std::move(out), ins,
                  [ia, ib](Graph& g, int, const Matrix& gr) {
                    if (Matrix* ga = g.GradBuffer(ia)) {
                      MatMulAccumulate(gr, g.Value(ib), *ga);  // g * b
                    }
                    if (Matrix* gb = g.GradBuffer(ib)) {
                      MatMulTNAccumulate(gr, g.Value(ia), *gb);  // g^T * a
                    }
                  });
}

Var Add(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  RequireSameShape("add", a.value(), b.value());
  Matrix out = a.value();
  out.AddInPlace(b.value());
  const int ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return g.Record(std::move(out), ins,
                  [ia, ib](Graph& g, int, const Matrix& gr) {
                    if (Matrix* ga = g.GradBuffer(ia)) ga->AddInPlace(gr);
                    if (Matrix* gb = g.GradBuffer(ib)) gb->AddInPlace(gr);
                  });
}

Var Sub(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  RequireSameShape("sub", a.value(), b.value());
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return g.Record(std::move(out), ins,
                  [ia, ib](Graph& g, int, const Matrix& gr) {
                    if (Matrix* ga = g.GradBuffer(ia)) ga->AddInPlace(gr);
                    if (Matrix* gb = g.GradBuffer(ib)) {
                      for (std::size_t i = 0; i < gr.size(); ++i)
                        (*gb)[i] -= gr[i];
                    }
                  });
}

Var Mul(Var a, Var b) {
  Graph& g = SameGraph(a, b);
  RequireSameShape("mul", a.value(), b.value());
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return g.Record(std::move(out), ins,
                  [ia, ib](Graph& g, int, const Matrix& gr) {
                    if (Matrix* ga = g.GradBuffer(ia)) {
                      const Matrix& bv = g.Value(ib);
                      for (std::size_t i = 0; i < gr.size(); ++i)
                        (*ga)[i] += gr[i] * bv[i];
                    }
                    if (Matrix* gb = g.GradBuffer(ib)) {
                      const Matrix& av = g.Value(ia);
                      for (std::size_t i = 0; i < gr.size(); ++i)
                        (*gb)[i] += gr[i] * av[i];
                    }
                  });
}

Var AddRowBroadcast(Var x, Var row) {
  Graph& g = SameGraph(x, row);
  const Matrix& xv = x.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw DimensionError("add_row_broadcast: " + xv.ShapeString() + " + " +
                         rv.ShapeString());
  }
  Matrix out = xv;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) += rv[j];
  const int ix = x.id(), ir = row.id();
  const Var ins[] = {x, row};
  return g.Record(std::move(out), ins,
                  [ix, ir](Graph& g, int, const Matrix& gr) {
                    if (Matrix* gx = g.GradBuffer(ix)) gx->AddInPlace(gr);
                    if (Matrix* grow = g.GradBuffer(ir)) {
                      for (int i = 0; i < gr.rows(); ++i)
                        for (int j = 0; j < gr.cols(); ++j)
                          (*grow)[j] += gr(i, j);
                    }
                  });
}

Var Scale(Var x, double s) {
  Graph& g = *x.graph();
  Matrix out = Map(x.value(), [s](double v) { return v * s; });
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix, s](Graph& g, int, const Matrix& gr) {
                    if (Matrix* gx = g.GradBuffer(ix)) {
                      for (std::size_t i = 0; i < gr.size(); ++i)
                        (*gx)[i] += gr[i] * s;
                    }
                  });
}

Var AddScalar(Var x, double s) {
  Graph& g = *x.graph();
  Matrix out = Map(x.value(), [s](double v) { return v + s; });
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int, const Matrix& gr) {
                    if (Matrix* gx = g.GradBuffer(ix)) gx->AddInPlace(gr);
                  });
}

Var Neg(Var x) { return Scale(x, -1.0); }

Var Transpose(Var x) {
  Graph& g = *x.graph();
  Matrix out = Transposed(x.value());
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int, const Matrix& gr) {
                    if (Matrix* gx = g.GradBuffer(ix)) {
                      gx->AddInPlace(Transposed(gr));
                    }
                  });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat of zero parts");
  Graph& g = *parts[0].graph();
  const int cols = parts[0].cols();
  int rows = 0;
  for (const Var& p : parts) {
    if (p.graph() != &g) throw UsageError("operands on different graphs");
    if (p.cols() != cols) {
      throw DimensionError("concat(axis 0): column counts differ " +
                           parts[0].value().ShapeString() + " vs " +
                           p.value().ShapeString());
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  int at = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    std::copy(v.values().begin(), v.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(at) * cols);
    ids.push_back(p.id());
    offsets.push_back(at);
    at += v.rows();
  }
  return g.Record(std::move(out), parts,
                  [ids, offsets, cols](Graph& g, int, const Matrix& gr) {
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      Matrix* gp = g.GradBuffer(ids[k]);
                      if (gp == nullptr) continue;
                      const std::size_t base =
                          static_cast<std::size_t>(offsets[k]) * cols;
                      for (std::size_t i = 0; i < gp->size(); ++i)
                        (*gp)[i] += gr[base + i];
                    }
                  });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat of zero parts");
  Graph& g = *parts[0].graph();
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Var& p : parts) {
    if (p.graph() != &g) throw UsageError("operands on different graphs");
    if (p.rows() != rows) {
      throw DimensionError("concat(axis 1): row counts differ " +
                           parts[0].value().ShapeString() + " vs " +
                           p.value().ShapeString());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  int at = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < v.cols(); ++j) out(i, at + j) = v(i, j);
    ids.push_back(p.id());
    offsets.push_back(at);
    at += v.cols();
  }
  return g.Record(std::move(out), parts,
                  [ids, offsets](Graph& g, int, const Matrix& gr) {
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      Matrix* gp = g.GradBuffer(ids[k]);
                      if (gp == nullptr) continue;
                      for (int i = 0; i < gp->rows(); ++i)
                        for (int j = 0; j < gp->cols(); ++j)
                          (*gp)(i, j) += gr(i, offsets[k] + j);
                    }
                  });
}

Var Concat(Var a, Var b, int axis) {
  const Var parts[] = {a, b};
  if (axis == 0) return ConcatRows(parts);
  if (axis == 1) return ConcatCols(parts);
  throw BoundsError("concat: axis must be 0 or 1");
}

Var Slice(Var x, int begin, int end, int axis) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  if (axis != 0 && axis != 1) throw BoundsError("slice: axis must be 0 or 1");
  const int extent = axis == 0 ? xv.rows() : xv.cols();
  if (begin < 0 || end > extent || begin > end) {
    throw BoundsError("slice [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ") out of range for axis " +
                      std::to_string(axis) + " of " + xv.ShapeString());
  }
  Matrix out = axis == 0 ? Matrix(end - begin, xv.cols())
                         : Matrix(xv.rows(), end - begin);
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j)
      out(i, j) = axis == 0 ? xv(begin + i, j) : xv(i, begin + j);
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix, begin, axis](Graph& g, int, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    for (int i = 0; i < gr.rows(); ++i)
                      for (int j = 0; j < gr.cols(); ++j) {
                        if (axis == 0) {
                          (*gx)(begin + i, j) += gr(i, j);
                        } else {
                          (*gx)(i, begin + j) += gr(i, j);
                        }
                      }
                  });
}

Var SoftmaxRows(Var x) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i) {
    auto in = xv.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int self, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    const Matrix& y = g.Value(self);
                    for (int i = 0; i < y.rows(); ++i) {
                      double dot = 0.0;
                      for (int j = 0; j < y.cols(); ++j)
                        dot += gr(i, j) * y(i, j);
                      for (int j = 0; j < y.cols(); ++j)
                        (*gx)(i, j) += y(i, j) * (gr(i, j) - dot);
                    }
                  });
}

Var LogSoftmaxRows(Var x) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (int i = 0; i < xv.rows(); ++i) {
    auto in = xv.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (double v : in) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - lse;
  }
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int self, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    const Matrix& y = g.Value(self);
                    for (int i = 0; i < y.rows(); ++i) {
                      double total = 0.0;
                      for (int j = 0; j < y.cols(); ++j) total += gr(i, j);
                      for (int j = 0; j < y.cols(); ++j)
                        (*gx)(i, j) += gr(i, j) - std::exp(y(i, j)) * total;
                    }
                  });
}

Var Sigmoid(Var x) {
  Graph& g = *x.graph();
  Matrix out = Map(x.value(), [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int self, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    const Matrix& y = g.Value(self);
                    for (std::size_t i = 0; i < y.size(); ++i)
                      (*gx)[i] += gr[i] * y[i] * (1.0 - y[i]);
                  });
}

Var Log(Var x) {
  Graph& g = *x.graph();
  Matrix out =
      Map(x.value(), [](double v) { return std::log(std::max(v, kLogClampEps)); });
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    const Matrix& xv = g.Value(ix);
                    for (std::size_t i = 0; i < xv.size(); ++i)
                      if (xv[i] >= kLogClampEps) (*gx)[i] += gr[i] / xv[i];
                  });
}

Var Gelu(Var x) {
  // Exact form x * Phi(x).
  Graph& g = *x.graph();
  Matrix out = Map(x.value(), [](double v) {
    return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  });
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix](Graph& g, int, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    const Matrix& xv = g.Value(ix);
                    constexpr double kInvSqrt2Pi =
                        0.3989422804014327;  // 1/sqrt(2*pi)
                    for (std::size_t i = 0; i < xv.size(); ++i) {
                      const double v = xv[i];
                      const double cdf =
                          0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
                      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                      (*gx)[i] += gr[i] * (cdf + v * pdf);
                    }
                  });
}

Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  const int n = xv.cols();
  if (gv.rows() != 1 || gv.cols() != n || !gv.SameShape(bv)) {
    throw DimensionError("layer_norm: input " + xv.ShapeString() + " gain " +
                         gv.ShapeString() + " bias " + bv.ShapeString());
  }
  Matrix xhat(xv.rows(), n);
  std::vector<double> rstd(xv.rows());
  Matrix out(xv.rows(), n);
  for (int i = 0; i < xv.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += xv(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
    var /= n;
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) {
      xhat(i, j) = (xv(i, j) - mu) * rstd[i];
      out(i, j) = xhat(i, j) * gv[j] + bv[j];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  const Var ins[] = {x, gain, bias};
  return g.Record(
      std::move(out), ins,
      [ix, ig, ib, xhat = std::move(xhat), rstd = std::move(rstd)](
          Graph& g, int, const Matrix& gr) {
        const int n = gr.cols();
        if (Matrix* gg = g.GradBuffer(ig)) {
          for (int i = 0; i < gr.rows(); ++i)
            for (int j = 0; j < n; ++j) (*gg)[j] += gr(i, j) * xhat(i, j);
        }
        if (Matrix* gb = g.GradBuffer(ib)) {
          for (int i = 0; i < gr.rows(); ++i)
            for (int j = 0; j < n; ++j) (*gb)[j] += gr(i, j);
        }
        if (Matrix* gx = g.GradBuffer(ix)) {
          const Matrix& gv = g.Value(ig);
          for (int i = 0; i < gr.rows(); ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (int j = 0; j < n; ++j) {
              const double d = gr(i, j) * gv[j];
              mean_d += d;
              mean_dx += d * xhat(i, j);
            }
            mean_d /= n;
            mean_dx /= n;
            for (int j = 0; j < n; ++j) {
              const double d = gr(i, j) * gv[j];
              (*gx)(i, j) += rstd[i] * (d - mean_d - xhat(i, j) * mean_dx);
            }
          }
        }
      });
}

Var EmbeddingLookup(Var table, std::span<const int> ids) {
  Graph& g = *table.graph();
  const Matrix& tv = table.value();
  Matrix out(static_cast<int>(ids.size()), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows()) {
      throw BoundsError("embedding id " + std::to_string(ids[r]) +
                        " outside table of " + std::to_string(tv.rows()) +
                        " rows");
    }
    auto src = tv.row(ids[r]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(r)).begin());
  }
  const int it = table.id();
  std::vector<int> idv(ids.begin(), ids.end());
  const Var ins[] = {table};
  return g.Record(std::move(out), ins,
                  [it, idv = std::move(idv)](Graph& g, int, const Matrix& gr) {
                    Matrix* gt = g.GradBuffer(it);
                    if (gt == nullptr) return;
                    for (std::size_t r = 0; r < idv.size(); ++r) {
                      auto dst = gt->row(idv[r]);
                      auto src = gr.row(static_cast<int>(r));
                      for (std::size_t j = 0; j < dst.size(); ++j)
                        dst[j] += src[j];
                    }
                  });
}

Var Mean(Var x, int axis) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  if (axis != 0 && axis != 1) throw BoundsError("mean: axis must be 0 or 1");
  if ((axis == 0 ? xv.rows() : xv.cols()) == 0) {
    throw DimensionError("mean over an empty axis of " + xv.ShapeString());
  }
  Matrix out = axis == 0 ? Matrix(1, xv.cols()) : Matrix(xv.rows(), 1);
  const double inv = 1.0 / (axis == 0 ? xv.rows() : xv.cols());
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < xv.cols(); ++j) {
      if (axis == 0) {
        out[j] += xv(i, j);
      } else {
        out[i] += xv(i, j);
      }
    }
  for (double& v : out.values()) v *= inv;
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(std::move(out), ins,
                  [ix, axis, inv](Graph& g, int, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    for (int i = 0; i < gx->rows(); ++i)
                      for (int j = 0; j < gx->cols(); ++j)
                        (*gx)(i, j) += inv * (axis == 0 ? gr[j] : gr[i]);
                  });
}

Var SumAll(Var x) {
  Graph& g = *x.graph();
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(Matrix::Scalar(s), ins,
                  [ix](Graph& g, int, const Matrix& gr) {
                    Matrix* gx = g.GradBuffer(ix);
                    if (gx == nullptr) return;
                    for (double& v : gx->values()) v += gr[0];
                  });
}

Var MeanAll(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return Scale(SumAll(x), 1.0 / static_cast<double>(n));
}

Var Pick(Var x, int row, int col) {
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  if (row < 0 || row >= xv.rows() || col < 0 || col >= xv.cols()) {
    throw BoundsError("pick (" + std::to_string(row) + ", " +
                      std::to_string(col) + ") outside " + xv.ShapeString());
  }
  const int ix = x.id();
  const Var ins[] = {x};
  return g.Record(Matrix::Scalar(xv(row, col)), ins,
                  [ix, row, col](Graph& g, int, const Matrix& gr) {
                    if (Matrix* gx = g.GradBuffer(ix)) (*gx)(row, col) += gr[0];
                  });
}

}  // namespace dqpsa
