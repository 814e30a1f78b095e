// include/teachtext/denoise.h

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

#ifndef TEACHTEXT_DENOISE_H_
#define TEACHTEXT_DENOISE_H_

// Caption filtering by teacher rank: a caption whose own video is ranked
// far down by the (mean-aggregated) teachers is treated as ambiguous and
// dropped from training.

#include <cstddef>
#include <filesystem>
#include <limits>
#include <vector>

#include "json.hpp"
#include "teachtext/data.h"
#include "teachtext/trainer.h"

namespace teachtext {

struct CaptionRank {
  std::size_t caption = 0;  // store caption index
  std::size_t video = 0;    // store video index
  std::size_t rank = 0;     // 1-based rank of the caption's video
};

// For every caption of `split`, ranks its video among all videos of the
// split under the element-wise mean of the teachers' similarities. Each
// teacher reads its own text embedding. Output ordered by caption index.
std::vector<CaptionRank> score_caption_ranks(const TeacherPool& teachers,
                                             const FeatureStore& store,
                                             Split split = Split::kTrain);

inline constexpr std::size_t kNoThreshold = std::numeric_limits<std::size_t>::max();

struct FilterResult {
  std::size_t threshold = 0;
  std::vector<std::size_t> kept;     // caption indices, ascending
  std::vector<std::size_t> dropped;  // caption indices, ascending
  double drop_fraction = 0.0;

  // keep[c] for every caption in the store (captions outside the table kept).
  std::vector<bool> keep_mask(std::size_t num_captions) const;
  nlohmann::json summary() const;
};

// Keeps captions with rank <= threshold. A video whose captions would all be
// dropped keeps its best-ranked one (lowest rank, then lowest caption index).
FilterResult filter_captions(const std::vector<CaptionRank>& ranks, std::size_t threshold);

struct DetectionStats {
  double precision = 0.0;  // dropped captions that are ambiguous
  double recall = 0.0;     // ambiguous captions that were dropped
  std::size_t true_positives = 0;
};

DetectionStats detection_stats(const FilterResult& filtered, const std::vector<bool>& ambiguous);

// JSON-lines of {"video_id", "caption_id"} for the kept captions, plus a
// summary JSON document.
void write_filter_outputs(const std::filesystem::path& dir, const FeatureStore& store,
                          const FilterResult& filtered, const nlohmann::json& summary);

// Reads a caption list written by write_filter_outputs into a keep mask.
std::vector<bool> read_caption_list(const std::filesystem::path& path,
                                    const FeatureStore& store);

}  // namespace teachtext

#endif  // TEACHTEXT_DENOISE_H_
