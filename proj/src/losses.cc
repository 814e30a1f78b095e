// src/losses.cc

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

#include "teachtext/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "teachtext/error.h"

namespace teachtext {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
  }
}

void require_square(const Matrix& s, const char* what) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix");
  }
}

// d huber(teacher, student) / d student.
double huber_grad(double teacher, double student) {
  const double diff = student - teacher;
  if (std::abs(diff) <= 1.0) return diff;
  return diff > 0.0 ? 1.0 : -1.0;
}

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Huber between mean-normalised distance matrices. When `off_diagonal` is
// set, the mean used for normalisation skips the diagonal (intra-set
// distances are zero there). Returns the loss and dL/d(student distances).
LossValueAndGrad normalized_distance_huber(const Matrix& student, const Matrix& teacher,
                                           bool off_diagonal) {
  const std::size_t n = student.rows();
  auto mean_of = [&](const Matrix& m) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (off_diagonal && i == j) continue;
        total += m(i, j);
        ++count;
      }
    return std::make_pair(total / static_cast<double>(count), count);
  };
  const auto [mu_s, count] = mean_of(student);
  const double mu_t = mean_of(teacher).first;
  if (!(mu_s > 0.0) || !(mu_t > 0.0)) {
    throw NumericalError("distance normalisation: zero mean distance");
  }
  const double num_entries = static_cast<double>(student.size());
  LossValueAndGrad out{0.0, Matrix(student.rows(), student.cols())};
  double weighted = 0.0;  // sum of g_hat * D over the normalised entries
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < student.cols(); ++j) {
      const double ds = student(i, j) / mu_s;
      const double dt = teacher(i, j) / mu_t;
      out.value += huber(dt, ds);
      const double g_hat = huber_grad(dt, ds) / num_entries;
      out.grad(i, j) = g_hat / mu_s;
      if (!(off_diagonal && i == j)) weighted += g_hat * student(i, j);
    }
  out.value /= num_entries;
  const double correction = weighted / (mu_s * mu_s * static_cast<double>(count));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < student.cols(); ++j) {
      if (off_diagonal && i == j) continue;
      out.grad(i, j) -= correction;
    }
  return out;
}

// Chains dL/dD for D = pairwise_distances(e) back to dL/de.
Matrix pairwise_distances_backward(const Matrix& e, const Matrix& distances,
                                   const Matrix& d_distances) {
  Matrix de(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = 0; j < e.rows(); ++j) {
      if (i == j) continue;
      const double dist = distances(i, j);
      const double g = d_distances(i, j);
      if (g == 0.0 || dist * dist <= kDistanceFloor) continue;
      auto ei = e.row(i);
      auto ej = e.row(j);
      auto dei = de.row(i);
      auto dej = de.row(j);
      for (std::size_t c = 0; c < ei.size(); ++c) {
        const double v = g * (ei[c] - ej[c]) / dist;
        dei[c] += v;
        dej[c] -= v;
      }
    }
  return de;
}

}  // namespace

LossValueAndGrad ranking_loss(const Matrix& s, double margin) {
  require_square(s, "ranking_loss");
  if (!(margin > 0.0)) throw ConfigError("ranking_loss: margin must be positive");
  const std::size_t b = s.rows();
  const double inv_b = 1.0 / static_cast<double>(b);
  LossValueAndGrad out{0.0, Matrix(b, b)};
  for (std::size_t i = 0; i < b; ++i) {
    const double pos = s(i, i);
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      // Text j ranked against video i's own caption, and video j against text i.
      const double a = s(i, j) - pos + margin;
      if (a > 0.0) {
        out.value += a;
        out.grad(i, j) += inv_b;
        out.grad(i, i) -= inv_b;
      }
      const double c = s(j, i) - pos + margin;
      if (c > 0.0) {
        out.value += c;
        out.grad(j, i) += inv_b;
        out.grad(i, i) -= inv_b;
      }
    }
  }
  out.value *= inv_b;
  return out;
}

double huber(double x, double y) {
  const double diff = std::abs(x - y);
  return diff <= 1.0 ? 0.5 * diff * diff : diff - 0.5;
}

DistillLoss parse_distill_loss(std::string_view name) {
  if (name == "huber") return DistillLoss::kHuber;
  if (name == "l1") return DistillLoss::kL1;
  if (name == "l2") return DistillLoss::kL2;
  throw ConfigError("unknown distillation loss '" + std::string(name) + "'");
}

LossValueAndGrad distill_loss(const Matrix& student, const Matrix& phi, DistillLoss variant) {
  require_same_shape(student, phi, "distill_loss");
  require_square(student, "distill_loss");
  const double inv_b = 1.0 / static_cast<double>(student.rows());
  LossValueAndGrad out{0.0, Matrix(student.rows(), student.cols())};
  for (std::size_t i = 0; i < student.size(); ++i) {
    const double s = student.values()[i];
    const double t = phi.values()[i];
    const double diff = s - t;
    double value = 0.0;
    double grad = 0.0;
    switch (variant) {
      case DistillLoss::kHuber:
        value = huber(t, s);
        grad = huber_grad(t, s);
        break;
      case DistillLoss::kL1:
        value = std::abs(diff);
        grad = sign_or_zero(diff);
        break;
      case DistillLoss::kL2:
        value = diff * diff;
        grad = 2.0 * diff;
        break;
    }
    out.value += value;
    out.grad.values()[i] = grad * inv_b;
  }
  out.value *= inv_b;
  return out;
}

LossValueAndGrad rank_k_distill_loss(const Matrix& student, const Matrix& phi, std::size_t k) {
  require_same_shape(student, phi, "rank_k_distill_loss");
  require_square(student, "rank_k_distill_loss");
  const std::size_t b = student.rows();
  if (k < 1 || k > b) {
    throw ConfigError("rank_k_distill_loss: K=" + std::to_string(k) + " outside [1, " +
                      std::to_string(b) + "]");
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  LossValueAndGrad out{0.0, Matrix(b, b)};
  std::vector<std::size_t> order(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return phi(i, x) > phi(i, y); });
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = order[r];
      out.value += huber(phi(i, j), student(i, j));
      out.grad(i, j) = huber_grad(phi(i, j), student(i, j)) * inv_b;
    }
  }
  out.value *= inv_b;
  return out;
}

Matrix cross_modal_distances(const Matrix& s) {
  Matrix d(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.size(); ++i) {
    d.values()[i] = std::sqrt(std::max(2.0 - 2.0 * s.values()[i], kDistanceFloor));
  }
  return d;
}

Matrix cross_modal_distances_backward(const Matrix& s, const Matrix& d_distances) {
  require_same_shape(s, d_distances, "cross_modal_distances_backward");
  Matrix ds(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double sq = 2.0 - 2.0 * s.values()[i];
    if (sq <= kDistanceFloor) continue;
    ds.values()[i] = -d_distances.values()[i] / std::sqrt(sq);
  }
  return ds;
}

LossValueAndGrad pdist_loss(const Matrix& student_distances,
                            const Matrix& teacher_distances) {
  require_same_shape(student_distances, teacher_distances, "pdist_loss");
  require_square(student_distances, "pdist_loss");
  return normalized_distance_huber(student_distances, teacher_distances, false);
}

Matrix pairwise_distances(const Matrix& e) {
  Matrix d(e.rows(), e.rows());
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = i + 1; j < e.rows(); ++j) {
      double sq = 0.0;
      auto ei = e.row(i);
      auto ej = e.row(j);
      for (std::size_t c = 0; c < ei.size(); ++c) sq += (ei[c] - ej[c]) * (ei[c] - ej[c]);
      d(i, j) = d(j, i) = std::sqrt(std::max(sq, kDistanceFloor));
    }
  return d;
}

EmbeddingLossAndGrad relational_intra_loss(const Matrix& student_video,
                                           const Matrix& student_text,
                                           const Matrix& teacher_video,
                                           const Matrix& teacher_text) {
  if (student_video.rows() != teacher_video.rows() ||
      student_text.rows() != teacher_text.rows()) {
    throw DimensionError("relational_intra_loss: student/teacher set sizes differ");
  }
  if (student_video.rows() < 2 || student_text.rows() < 2) {
    throw DimensionError("relational_intra_loss: needs at least two items per set");
  }
  EmbeddingLossAndGrad out;
  auto side = [](const Matrix& s, const Matrix& t, Matrix& grad) {
    const Matrix ds = pairwise_distances(s);
    const LossValueAndGrad l = normalized_distance_huber(ds, pairwise_distances(t), true);
    grad = pairwise_distances_backward(s, ds, l.grad);
    return l.value;
  };
  out.value = side(student_video, teacher_video, out.grad_video) +
              side(student_text, teacher_text, out.grad_text);
  return out;
}

EmbeddingLossAndGrad embed_regress_loss(const Matrix& student_video,
                                        const Matrix& student_text,
                                        const Matrix& teacher_video,
                                        const Matrix& teacher_text) {
  require_same_shape(student_video, teacher_video, "embed_regress_loss (video)");
  require_same_shape(student_text, teacher_text, "embed_regress_loss (text)");
  const double n = static_cast<double>(student_video.size() + student_text.size());
  if (n == 0.0) throw DimensionError("embed_regress_loss: empty embeddings");
  EmbeddingLossAndGrad out{0.0, Matrix(student_video.rows(), student_video.cols()),
                           Matrix(student_text.rows(), student_text.cols())};
  auto side = [&](const Matrix& s, const Matrix& t, Matrix& grad) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double diff = s.values()[i] - t.values()[i];
      out.value += diff * diff;
      grad.values()[i] = 2.0 * diff / n;
    }
  };
  side(student_video, teacher_video, out.grad_video);
  side(student_text, teacher_text, out.grad_text);
  out.value /= n;
  return out;
}

LossValueAndGrad composite_loss(const Matrix& student, const Matrix& phi, double margin,
                                double distill_weight, DistillLoss variant) {
  LossValueAndGrad out = ranking_loss(student, margin);
  if (distill_weight != 0.0) {
    LossValueAndGrad d = distill_loss(student, phi, variant);
    out.value += distill_weight * d.value;
    d.grad *= distill_weight;
    out.grad += d.grad;
  }
  return out;
}

}  // namespace teachtext
