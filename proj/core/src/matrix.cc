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

#include "dqpsa/matrix.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dqpsa/errors.h"

namespace dqpsa {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) {
    throw DimensionError("negative matrix extent");
  }
  values_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Matrix::Matrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows < 0 || cols < 0 ||
      values_.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("value count does not match shape " + ShapeString());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ == 0 ? 0 : static_cast<int>(rows.begin()->size());
  values_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != cols_) {
      throw DimensionError("ragged matrix literal");
    }
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::Identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::RowVector(std::span<const double> values) {
  return Matrix(1, static_cast<int>(values.size()),
                std::vector<double>(values.begin(), values.end()));
}

void Matrix::SetZero() { std::fill(values_.begin(), values_.end(), 0.0); }

void Matrix::AddInPlace(const Matrix& other) {
  if (!SameShape(other)) {
    throw DimensionError("AddInPlace: " + ShapeString() + " vs " +
                         other.ShapeString());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other[i];
}

bool Matrix::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Matrix::ShapeString() const {
  std::ostringstream os;
  os << "[" << rows_ << "x" << cols_ << "]";
  return os.str();
}

void MatMulInto(const Matrix& a, const Matrix& b, Matrix& out) {
  out = Matrix(a.rows(), b.cols());
  MatMulAccumulate(a, b, out);
}

void MatMulAccumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    double* orow = po + static_cast<std::size_t>(i) * n;
    const double* arow = pa + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = pb + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void MatMulNTAccumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    const double* arow = pa + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* brow = pb + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      po[static_cast<std::size_t>(i) * n + j] += s;
    }
  }
}

void MatMulTNAccumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  // a: k x m, b: k x n, out: m x n
  const int k = a.rows(), m = a.cols(), n = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int p = 0; p < k; ++p) {
    const double* arow = pa + static_cast<std::size_t>(p) * m;
    const double* brow = pb + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = po + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

Matrix Transposed(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

}  // namespace dqpsa
