// tests/oracles.h

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

#ifndef TEACHTEXT_TESTS_ORACLES_H_
#define TEACHTEXT_TESTS_ORACLES_H_

// Slow, obviously-correct reference implementations used by the tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "teachtext/data.h"
#include "teachtext/encoder.h"
#include "teachtext/metrics.h"

namespace teachtext::oracle {

// Full sort of every candidate; 1-based position of truth.
inline std::size_t sorted_rank(const std::vector<double>& scores, std::size_t truth) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin()) + 1;
}

inline MetricsReport report_from_ranks(Task task, std::vector<std::size_t> ranks) {
  MetricsReport r;
  r.task = task;
  r.num_queries = ranks.size();
  auto pct = [&](std::size_t k) {
    std::size_t hit = 0;
    for (auto x : ranks) hit += x <= k ? 1 : 0;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(ranks.size());
  };
  r.r1 = pct(1);
  r.r5 = pct(5);
  r.r10 = pct(10);
  r.r50 = pct(50);
  std::sort(ranks.begin(), ranks.end());
  r.median_rank = static_cast<double>(ranks[(ranks.size() - 1) / 2]);
  r.geomean = std::cbrt(r.r1 * r.r5 * r.r10);
  return r;
}

// Scores every (video, caption) pair of the split one at a time.
inline MetricsReport brute_force_evaluate(const DualEncoderParams& model, const FeatureStore& store,
                                          Split split, Task task) {
  const auto videos = store.videos_in_split(split);
  const auto captions = store.captions_in_split(split);
  const auto specs = store.modality_specs(
      [&] {
        std::vector<std::string> ids;
        for (const auto& m : model.modalities) ids.push_back(m.id);
        return ids;
      }());
  const std::size_t te = store.text_encoder_index(model.text_encoder_id);

  std::vector<std::vector<double>> score(videos.size(), std::vector<double>(captions.size()));
  for (std::size_t i = 0; i < videos.size(); ++i) {
    std::vector<std::vector<double>> x;
    for (const auto& s : specs) {
      const auto row = store.video_features(store.modality_index(s.id)).row(videos[i]);
      x.emplace_back(row.begin(), row.end());
    }
    for (std::size_t j = 0; j < captions.size(); ++j) {
      score[i][j] = similarity(model, x, store.caption_embeddings(te).row(captions[j]));
    }
  }
  auto video_pos = [&](std::size_t caption) {
    return static_cast<std::size_t>(
        std::find(videos.begin(), videos.end(), store.video_of_caption(caption)) - videos.begin());
  };

  std::vector<std::size_t> ranks;
  if (task == Task::kT2V) {
    for (std::size_t j = 0; j < captions.size(); ++j) {
      std::vector<double> col(videos.size());
      for (std::size_t i = 0; i < videos.size(); ++i) col[i] = score[i][j];
      ranks.push_back(sorted_rank(col, video_pos(captions[j])));
    }
  } else {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 0; j < captions.size(); ++j) {
        if (video_pos(captions[j]) != i) continue;
        const std::size_t r = sorted_rank(score[i], j);
        if (best == 0 || r < best) best = r;
      }
      if (best != 0) ranks.push_back(best);
    }
  }
  return report_from_ranks(task, ranks);
}

}  // namespace teachtext::oracle

#endif  // TEACHTEXT_TESTS_ORACLES_H_
