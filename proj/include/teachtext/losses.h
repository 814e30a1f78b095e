// include/teachtext/losses.h

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

#ifndef TEACHTEXT_LOSSES_H_
#define TEACHTEXT_LOSSES_H_

// Training objectives over batch similarity matrices (rows = videos,
// columns = texts, positives on the diagonal) and over joint embeddings.

#include <cstddef>
#include <string_view>

#include "teachtext/numerics.h"

namespace teachtext {

inline constexpr double kDefaultMargin = 0.2;

struct LossValueAndGrad {
  double value = 0.0;
  Matrix grad;  // dL/d(student matrix)
};

struct EmbeddingLossAndGrad {
  double value = 0.0;
  Matrix grad_video;  // dL/d(student video embeddings)
  Matrix grad_text;   // dL/d(student text embeddings)
};

// Bidirectional max-margin ranking loss:
//   (1/B) sum_i sum_{j != i} [max(0, s_ij - s_ii + m) + max(0, s_ji - s_ii + m)]
// A hinge contributes gradient only when its argument is strictly positive.
LossValueAndGrad ranking_loss(const Matrix& s, double margin = kDefaultMargin);

// 0.5 (x - y)^2 when |x - y| <= 1, |x - y| - 0.5 otherwise.
double huber(double x, double y);

enum class DistillLoss { kHuber, kL1, kL2 };

DistillLoss parse_distill_loss(std::string_view name);

// (1/B) sum_ij l(phi_ij, s_ij); gradient with respect to the student only.
// l2 is the plain squared difference, l1 the absolute difference.
LossValueAndGrad distill_loss(const Matrix& student, const Matrix& phi,
                              DistillLoss variant = DistillLoss::kHuber);

// Huber distillation restricted, per row, to the k columns where phi is
// largest (ties go to the lower column index). Still normalised by 1/B.
LossValueAndGrad rank_k_distill_loss(const Matrix& student, const Matrix& phi,
                                     std::size_t k);

// Cross-modal distances in the weighted-concatenated joint space. With unit
// modality blocks, ||F(x_i) - Q(t_j)||^2 = 2 - 2 s_ij, so the distance is
// sqrt(max(2 - 2 s_ij, kDistanceFloor)).
inline constexpr double kDistanceFloor = 1e-12;
Matrix cross_modal_distances(const Matrix& s);
// Maps dL/dD back to dL/dS.
Matrix cross_modal_distances_backward(const Matrix& s, const Matrix& d_distances);

// Each distance matrix is divided by its own mean entry; the loss is the mean
// Huber over all entries.
LossValueAndGrad pdist_loss(const Matrix& student_distances,
                            const Matrix& teacher_distances);

// Mean-normalised pairwise distances within the video set and within the
// text set, each compared with Huber (mean over all B^2 pairs), summed.
EmbeddingLossAndGrad relational_intra_loss(const Matrix& student_video,
                                           const Matrix& student_text,
                                           const Matrix& teacher_video,
                                           const Matrix& teacher_text);

// Mean squared error over every element of both embedding sets.
EmbeddingLossAndGrad embed_regress_loss(const Matrix& student_video,
                                        const Matrix& student_text,
                                        const Matrix& teacher_video,
                                        const Matrix& teacher_text);

// ranking_loss + distill_weight * distill_loss; gradients sum.
LossValueAndGrad composite_loss(const Matrix& student, const Matrix& phi,
                                double margin = kDefaultMargin, double distill_weight = 1.0,
                                DistillLoss variant = DistillLoss::kHuber);

// Pairwise Euclidean distances between the rows of e (B x B, zero diagonal).
Matrix pairwise_distances(const Matrix& e);

}  // namespace teachtext

#endif  // TEACHTEXT_LOSSES_H_
