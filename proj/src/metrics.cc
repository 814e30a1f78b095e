// src/metrics.cc

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

#include "teachtext/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "teachtext/error.h"

namespace teachtext {

std::string_view task_name(Task t) { return t == Task::kT2V ? "t2v" : "v2t"; }

Task parse_task(std::string_view name) {
  if (name == "t2v") return Task::kT2V;
  if (name == "v2t") return Task::kV2T;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected t2v or v2t)");
}

double MetricsReport::recall_at(std::size_t k) const {
  switch (k) {
    case 1:
      return r1;
    case 5:
      return r5;
    case 10:
      return r10;
    case 50:
      return r50;
    default:
      throw ConfigError("recall is reported for K in {1, 5, 10, 50}");
  }
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"task", task_name(r.task)}, {"r1", r.r1},   {"r5", r.r5},
          {"r10", r.r10},              {"r50", r.r50}, {"mdr", r.median_rank},
          {"geomean", r.geomean}};
}

std::size_t rank_of_truth(std::span<const double> scores, std::size_t truth) {
  if (truth >= scores.size()) {
    throw DimensionError("rank_of_truth: truth index " + std::to_string(truth) +
                         " out of range for " + std::to_string(scores.size()) + " candidates");
  }
  const double t = scores[truth];
  std::size_t rank = 1;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (scores[c] > t || (scores[c] == t && c < truth)) ++rank;
  }
  return rank;
}

double geometric_mean(double r1, double r5, double r10) {
  if (r1 < 0.0 || r5 < 0.0 || r10 < 0.0) {
    throw ConfigError("geometric_mean: inputs must be non-negative");
  }
  if (r1 == 0.0 || r5 == 0.0 || r10 == 0.0) return 0.0;
  return std::cbrt(r1 * r5 * r10);
}

MetricsReport metrics_from_ranks(Task task, std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw DataError("no queries to evaluate");
  MetricsReport r;
  r.task = task;
  r.num_queries = ranks.size();
  auto recall = [&](std::size_t k) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t x) { return x <= k; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
  };
  r.r1 = recall(1);
  r.r5 = recall(5);
  r.r10 = recall(10);
  r.r50 = recall(50);
  std::sort(ranks.begin(), ranks.end());
  r.median_rank = static_cast<double>(ranks[(ranks.size() - 1) / 2]);
  r.geomean = geometric_mean(r.r1, r.r5, r.r10);
  return r;
}

MetricsReport metrics_from_scores(const Matrix& scores,
                                  std::span<const std::size_t> caption_video, Task task) {
  if (scores.cols() != caption_video.size()) {
    throw DimensionError("metrics_from_scores: one video index per caption column required");
  }
  std::vector<std::size_t> ranks;
  if (task == Task::kT2V) {
    std::vector<double> column(scores.rows());
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      for (std::size_t i = 0; i < scores.rows(); ++i) column[i] = scores(i, j);
      ranks.push_back(rank_of_truth(column, caption_video[j]));
    }
  } else {
    std::vector<std::size_t> best(scores.rows(), std::numeric_limits<std::size_t>::max());
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      const std::size_t v = caption_video[j];
      if (v >= scores.rows()) throw DimensionError("metrics_from_scores: video index out of range");
      best[v] = std::min(best[v], rank_of_truth(scores.row(v), j));
    }
    for (std::size_t b : best)
      if (b != std::numeric_limits<std::size_t>::max()) ranks.push_back(b);
  }
  return metrics_from_ranks(task, std::move(ranks));
}

Matrix split_scores(const DualEncoderParams& model, const FeatureStore& store, Split split,
                    std::vector<std::size_t>* caption_video) {
  const std::vector<std::size_t> videos = store.videos_in_split(split);
  const std::vector<std::size_t> captions = store.captions_in_split(split);
  if (videos.empty() || captions.empty()) {
    throw DataError("split '" + std::string(split_name(split)) + "' is empty");
  }
  if (!store.has_text_encoder(model.text_encoder_id)) {
    throw DataError("store has no embeddings for text encoder '" + model.text_encoder_id + "'");
  }
  if (caption_video != nullptr) {
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < videos.size(); ++i) local.emplace(videos[i], i);
    caption_video->clear();
    for (std::size_t c : captions) caption_video->push_back(local.at(store.video_of_caption(c)));
  }
  return batch_similarity_matrix(model, store.gather_videos(model.modalities, videos),
                                 store.gather_captions(model.text_encoder_id, captions));
}

MetricsReport evaluate(const DualEncoderParams& model, const FeatureStore& store, Split split,
                       Task task) {
  std::vector<std::size_t> caption_video;
  const Matrix scores = split_scores(model, store, split, &caption_video);
  return metrics_from_scores(scores, caption_video, task);
}

}  // namespace teachtext
