// tests/test_numerics.cc

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

#include <cmath>

#include "doctest.h"
#include "teachtext/error.h"
#include "teachtext/losses.h"
#include "teachtext/numerics.h"
#include "teachtext/rng.h"

using namespace teachtext;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("matmul identity and orthogonal vectors") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(Matrix::identity(2), a) == a);
  CHECK(matmul(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0}, {1}})) ==
        Matrix::from_rows({{0}}));
}

TEST_CASE("matmul matches a triple loop") {
  Rng rng(11);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);
  const Matrix c = matmul(a, b);
  REQUIRE(c.rows() == 3);
  REQUIRE(c.cols() == 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(acc).epsilon(1e-15));
    }
}

TEST_CASE("matmul rejects bad shapes and non-finite results") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
  Matrix big = Matrix::from_rows({{1e308, 1e308}});
  CHECK_THROWS_AS(matmul(big, Matrix::from_rows({{10}, {10}})), NumericalError);
}

TEST_CASE("matmul is associative") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 5, rng);
    const Matrix c = random_matrix(5, 2, rng);
    const Matrix l = matmul(matmul(a, b), c);
    const Matrix r = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < l.size(); ++i) {
      CHECK(std::abs(l.values()[i] - r.values()[i]) <=
            1e-4 * std::max(1.0, std::abs(r.values()[i])));
    }
  }
}

TEST_CASE("matmul_transposed and transpose agree with matmul") {
  Rng rng(8);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(5, 4, rng);
  const Matrix x = matmul_transposed(a, b);
  const Matrix y = matmul(a, transpose(b));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.values()[i] == doctest::Approx(y.values()[i]));
}

TEST_CASE("row_l2_normalize") {
  CHECK(row_l2_normalize(Matrix::from_rows({{3, 4}})) == Matrix::from_rows({{0.6, 0.8}}));
  CHECK(row_l2_normalize(Matrix::from_rows({{1, 0, 0}})) == Matrix::from_rows({{1, 0, 0}}));
  CHECK(row_l2_normalize(Matrix::from_rows({{0, 0}})) == Matrix::from_rows({{0, 0}}));
}

TEST_CASE("row_l2_normalize is idempotent and yields unit rows") {
  Rng rng(3);
  const Matrix m = random_matrix(6, 5, rng);
  const Matrix once = row_l2_normalize(m);
  const Matrix twice = row_l2_normalize(once);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    CHECK(std::sqrt(dot(once.row(r), once.row(r))) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(twice.values()[i] == doctest::Approx(once.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax examples") {
  auto a = softmax(std::vector<double>{0, 0});
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.5));
  for (double c : {-700.0, 0.0, 3.5, 900.0}) {
    auto b = softmax(std::vector<double>{c, c, c});
    for (double v : b) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  auto d = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  CHECK(d[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(softmax(std::vector<double>{}), DimensionError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(1 + rng.below(8));
    for (double& x : v) x = rng.uniform(-20, 20);
    const auto s = softmax(v);
    double total = 0.0;
    for (double x : s) {
      CHECK(x > 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
    const double c = rng.uniform(-50, 50);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    const auto s2 = softmax(shifted);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] - s2[i]) < 1e-6);
  }
}

TEST_CASE("finite_diff_grad examples") {
  auto sq = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
  const auto g = finite_diff_grad(sq, std::vector<double>{1, 2});
  CHECK(std::abs(g[0] - 2.0) < 1e-6);
  CHECK(std::abs(g[1] - 4.0) < 1e-6);

  const auto z = finite_diff_grad([](std::span<const double>) { return 7.0; },
                                  std::vector<double>{1, 2, 3});
  for (double v : z) CHECK(v == 0.0);

  const auto h = finite_diff_grad([](std::span<const double> p) { return huber(p[0], 0.0); },
                                  std::vector<double>{2.0});
  CHECK(std::abs(h[0] - 1.0) < 1e-6);
}

TEST_CASE("finite_diff_grad is exact on quadratics") {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.below(6);
    const Matrix q = random_matrix(n, n, rng);
    std::vector<double> lin(n), p(n);
    for (auto& v : lin) v = rng.uniform(-1, 1);
    for (auto& v : p) v = rng.uniform(-1, 1);
    auto f = [&](std::span<const double> x) {
      double acc = 3.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += lin[i] * x[i];
        for (std::size_t j = 0; j < n; ++j) acc += q(i, j) * x[i] * x[j];
      }
      return acc;
    };
    std::vector<double> analytic(n);
    for (std::size_t i = 0; i < n; ++i) {
      analytic[i] = lin[i];
      for (std::size_t j = 0; j < n; ++j) analytic[i] += (q(i, j) + q(j, i)) * p[j];
    }
    const auto numeric = finite_diff_grad(f, p);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(numeric[i] - analytic[i]) <= 1e-8 * std::max(1.0, std::abs(analytic[i])));
    }
  }
}

TEST_CASE("finite_diff_grad rejects non-finite evaluations") {
  auto f = [](std::span<const double> p) { return p[0] > 0 ? INFINITY : 0.0; };
  CHECK_THROWS_AS(finite_diff_grad(f, std::vector<double>{0.0}), NumericalError);
}

TEST_CASE("check_finite and float32 rounding") {
  Matrix m = Matrix::from_rows({{1, 2}});
  CHECK_NOTHROW(check_finite(m, "m"));
  m(0, 1) = NAN;
  CHECK_THROWS_AS(check_finite(m, "m"), NumericalError);
  Matrix r = Matrix::from_rows({{0.1}});
  round_to_float32(r);
  CHECK(r(0, 0) == static_cast<double>(0.1f));
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
