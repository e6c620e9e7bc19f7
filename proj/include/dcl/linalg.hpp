// Copyright 2026 The DCL Authors.
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

// Dense vector and matrix primitives. Everything accumulates in double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dcl/error.hpp"

namespace dcl {

using Vec = std::vector<double>;
using VecView = std::span<const double>;

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Row i holds the similarities of sample i of one side against every sample
// of the other side.
using SimMatrix = Matrix;

inline void require_same_dim(VecView u, VecView v, const char* what) {
  if (u.size() != v.size()) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" +
                     std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  }
}

inline double dot(VecView u, VecView v) {
  require_same_dim(u, v, "dot");
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) acc += u[k] * v[k];
  return acc;
}

inline double squared_norm(VecView u) {
  double acc = 0.0;
  for (double x : u) acc += x * x;
  return acc;
}

inline double norm(VecView u) { return std::sqrt(squared_norm(u)); }

inline double squared_distance(VecView u, VecView v) {
  require_same_dim(u, v, "squared_distance");
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = u[k] - v[k];
    acc += d * d;
  }
  return acc;
}

inline bool all_finite(VecView u) {
  return std::all_of(u.begin(), u.end(),
                     [](double x) { return std::isfinite(x); });
}

// Norm of u; throws on zero (or non-finite) norm.
inline double checked_norm(VecView u, const char* what) {
  const double n = norm(u);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DomainError(std::string(what) + ": zero-norm or non-finite vector");
  }
  return n;
}

inline double cosine_sim(VecView u, VecView v) {
  require_same_dim(u, v, "cosine_sim");
  const double nu = checked_norm(u, "cosine_sim");
  const double nv = checked_norm(v, "cosine_sim");
  return dot(u, v) / (nu * nv);
}

// log(sum(exp(xs))) shifted by the maximum.
inline double log_sum_exp(VecView xs) {
  if (xs.empty()) throw DomainError("log_sum_exp: empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) throw DomainError("log_sum_exp: non-finite input");
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// Softmax of xs, written into out.
inline void softmax(VecView xs, std::span<double> out) {
  const double lse = log_sum_exp(xs);
  for (std::size_t k = 0; k < xs.size(); ++k) out[k] = std::exp(xs[k] - lse);
}

inline Vec softmax(VecView xs) {
  Vec out(xs.size());
  softmax(xs, out);
  return out;
}

inline std::size_t argmax(VecView xs) {
  return static_cast<std::size_t>(
      std::distance(xs.begin(), std::max_element(xs.begin(), xs.end())));
}

inline std::size_t common_dim(const std::vector<Vec>& a, const char* what) {
  if (a.empty()) return 0;
  const std::size_t d = a.front().size();
  for (const Vec& v : a) {
    if (v.size() != d) {
      throw ShapeError(std::string(what) + ": ragged feature dimensions");
    }
  }
  return d;
}

// entries(i, j) = cosine_sim(a[i], b[j]).
inline SimMatrix pairwise_cosine(const std::vector<Vec>& a,
                                 const std::vector<Vec>& b) {
  const std::size_t da = common_dim(a, "pairwise_cosine");
  const std::size_t db = common_dim(b, "pairwise_cosine");
  if (!a.empty() && !b.empty() && da != db) {
    throw ShapeError("pairwise_cosine: dimension mismatch");
  }
  Vec na(a.size()), nb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    na[i] = checked_norm(a[i], "pairwise_cosine");
  for (std::size_t j = 0; j < b.size(); ++j)
    nb[j] = checked_norm(b[j], "pairwise_cosine");
  SimMatrix s(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      s(i, j) = dot(a[i], b[j]) / (na[i] * nb[j]);
  return s;
}

// y += alpha * x
inline void axpy(double alpha, VecView x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline Vec concat(VecView u, VecView v) {
  Vec out;
  out.reserve(u.size() + v.size());
  out.insert(out.end(), u.begin(), u.end());
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline double mean(VecView xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

}  // namespace dcl
