// include/teachtext/metrics.h

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

#ifndef TEACHTEXT_METRICS_H_
#define TEACHTEXT_METRICS_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "teachtext/data.h"
#include "teachtext/encoder.h"

namespace teachtext {

enum class Task { kT2V, kV2T };

std::string_view task_name(Task t);
Task parse_task(std::string_view name);

struct MetricsReport {
  Task task = Task::kT2V;
  double r1 = 0.0;  // percentages in [0, 100]
  double r5 = 0.0;
  double r10 = 0.0;
  double r50 = 0.0;
  double median_rank = 0.0;
  double geomean = 0.0;  // (r1 * r5 * r10)^(1/3)
  std::size_t num_queries = 0;

  double recall_at(std::size_t k) const;
  bool operator==(const MetricsReport&) const = default;
};

// Keys: task, r1, r5, r10, r50, mdr, geomean.
nlohmann::json to_json(const MetricsReport& r);

// 1-based rank of `truth` after sorting candidates by descending score, ties
// broken by ascending candidate index.
std::size_t rank_of_truth(std::span<const double> scores, std::size_t truth);

// Cube root of the product; throws ConfigError on negative inputs.
double geometric_mean(double r1, double r5, double r10);

// Recall and median rank from a list of 1-based ranks. The median of an
// even-length list is the lower of the two middle values.
MetricsReport metrics_from_ranks(Task task, std::vector<std::size_t> ranks);

// `scores` is videos x captions; caption_video[j] is the row index of
// caption j's video. t2v ranks each caption's video among all rows; v2t
// ranks every caption of a video among all columns and keeps the best.
// Videos with no caption are not queried.
MetricsReport metrics_from_scores(const Matrix& scores,
                                  std::span<const std::size_t> caption_video, Task task);

// Scores every caption of `split` against every video of `split`.
Matrix split_scores(const DualEncoderParams& model, const FeatureStore& store, Split split,
                    std::vector<std::size_t>* caption_video = nullptr);

MetricsReport evaluate(const DualEncoderParams& model, const FeatureStore& store, Split split,
                       Task task);

}  // namespace teachtext

#endif  // TEACHTEXT_METRICS_H_
