// include/teachtext/gradcheck.h

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

#ifndef TEACHTEXT_GRADCHECK_H_
#define TEACHTEXT_GRADCHECK_H_

// Analytic-vs-finite-difference gradient suite covering every loss and every
// encoder parameter block on small random instances.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace teachtext {

inline constexpr double kGradTolerance = 1e-4;
// Points whose hinge / Huber / L1 arguments lie this close to a kink are
// resampled.
inline constexpr double kKinkMargin = 1e-4;
// Step used by the suite; small enough that the stencil stays inside the
// kink margin, large enough that double rounding is negligible.
inline constexpr double kSuiteStep = 1e-6;

// ||a - b|| / max(||a||, ||b||, 1e-8).
double relative_error(std::span<const double> a, std::span<const double> b);

// Negative controls for the harness itself.
enum class GradFault { kNone, kScaleRankingGrad };

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checks = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::size_t trials = 0;
  std::size_t resampled = 0;  // instances rejected for sitting near a kink

  bool passed(double tolerance = kGradTolerance) const { return max_rel_error < tolerance; }
};

GradCheckReport run_gradient_suite(std::uint64_t seed, std::size_t trials,
                                   GradFault fault = GradFault::kNone);

}  // namespace teachtext

#endif  // TEACHTEXT_GRADCHECK_H_
