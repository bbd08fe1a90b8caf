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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dqpsa {

// Dense row-major matrix of doubles. Every tensor in the library is rank 2;
// vectors are 1 x n and scalars 1 x 1. Extents may be zero.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);
  Matrix(int rows, int cols, std::vector<double> values);
  // Nested-list literal, e.g. Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix Identity(int n);
  static Matrix Scalar(double v) { return Matrix(1, 1, v); }
  static Matrix RowVector(std::span<const double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(int r, int c) { return values_[Index(r, c)]; }
  double operator()(int r, int c) const { return values_[Index(r, c)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> row(int r) {
    return {values_.data() + static_cast<std::size_t>(r) * cols_,
            static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(int r) const {
    return {values_.data() + static_cast<std::size_t>(r) * cols_,
            static_cast<std::size_t>(cols_)};
  }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool SameShape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  void SetZero();
  // this += other (shapes must match).
  void AddInPlace(const Matrix& other);
  bool AllFinite() const;

  std::string ShapeString() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  std::size_t Index(int r, int c) const {
    return static_cast<std::size_t>(r) * cols_ + c;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

// Plain (non-differentiable) kernels shared by the graph ops and oracles.
// out = a * b
void MatMulInto(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b^T
void MatMulNTAccumulate(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void MatMulTNAccumulate(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b
void MatMulAccumulate(const Matrix& a, const Matrix& b, Matrix& out);
Matrix Transposed(const Matrix& a);

}  // namespace dqpsa
