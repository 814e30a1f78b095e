// include/teachtext/numerics.h

// Copyright 2026  The teachtext authors

// See the top-level COPYING file for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TEACHTEXT_NUMERICS_H_
#define TEACHTEXT_NUMERICS_H_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace teachtext {

inline constexpr double kNormEps = 1e-12;

// Dense row-major matrix. Values held in memory are doubles; anything that
// is persisted (features, parameters) is rounded to float32 before it is
// stored, so a save/load cycle is exact.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> v);

// Throws NumericalError naming `what` when `m` holds NaN or Inf.
void check_finite(const Matrix& m, std::string_view what);

// a * b. Each output cell accumulates over the inner index in ascending order.
Matrix matmul(const Matrix& a, const Matrix& b);

// a * b^T, same accumulation order as matmul.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Divides every row by max(||row||_2, eps).
Matrix row_l2_normalize(const Matrix& m, double eps = kNormEps);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

// Rounds every entry to the nearest float32 value.
void round_to_float32(Matrix& m);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for each coordinate.
std::vector<double> finite_diff_grad(const ScalarFunction& f,
                                     std::span<const double> p, double h = 1e-3);

}  // namespace teachtext

#endif  // TEACHTEXT_NUMERICS_H_
