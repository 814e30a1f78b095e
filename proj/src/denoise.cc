// src/denoise.cc

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

#include "teachtext/denoise.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>

#include "teachtext/error.h"

namespace teachtext {

using nlohmann::json;

std::vector<CaptionRank> score_caption_ranks(const TeacherPool& teachers,
                                             const FeatureStore& store, Split split) {
  if (teachers.teachers.empty()) throw ConfigError("denoising needs at least one teacher");
  const std::vector<std::size_t> captions = store.captions_in_split(split);
  if (captions.empty()) {
    throw DataError("split '" + std::string(split_name(split)) + "' has no captions");
  }
  std::vector<std::size_t> caption_video;
  std::vector<Matrix> scores;
  for (const auto& t : teachers.teachers) {
    scores.push_back(split_scores(t, store, split, &caption_video));
  }
  const Matrix mean = aggregate(scores, Aggregation::kMean);
  std::vector<CaptionRank> out;
  std::vector<double> column(mean.rows());
  for (std::size_t j = 0; j < captions.size(); ++j) {
    for (std::size_t i = 0; i < mean.rows(); ++i) column[i] = mean(i, j);
    out.push_back({captions[j], store.video_of_caption(captions[j]),
                   rank_of_truth(column, caption_video[j])});
  }
  return out;
}

std::vector<bool> FilterResult::keep_mask(std::size_t num_captions) const {
  std::vector<bool> keep(num_captions, true);
  for (std::size_t c : dropped) keep.at(c) = false;
  return keep;
}

json FilterResult::summary() const {
  json threshold_json = threshold == kNoThreshold ? json("inf") : json(threshold);
  return {{"threshold", threshold_json},
          {"kept", kept.size()},
          {"dropped", dropped.size()},
          {"drop_fraction", drop_fraction}};
}

FilterResult filter_captions(const std::vector<CaptionRank>& ranks, std::size_t threshold) {
  if (threshold < 1) throw ConfigError("rank threshold must be at least 1");
  FilterResult out;
  out.threshold = threshold;
  std::map<std::size_t, const CaptionRank*> best_of_video;
  std::map<std::size_t, bool> video_has_keeper;
  for (const CaptionRank& r : ranks) {
    auto [it, inserted] = best_of_video.emplace(r.video, &r);
    if (!inserted) {
      const CaptionRank* b = it->second;
      if (r.rank < b->rank || (r.rank == b->rank && r.caption < b->caption)) it->second = &r;
    }
    video_has_keeper[r.video] |= r.rank <= threshold;
  }
  for (const CaptionRank& r : ranks) {
    const bool keep = r.rank <= threshold ||
                      (!video_has_keeper[r.video] && best_of_video[r.video] == &r);
    (keep ? out.kept : out.dropped).push_back(r.caption);
  }
  std::sort(out.kept.begin(), out.kept.end());
  std::sort(out.dropped.begin(), out.dropped.end());
  out.drop_fraction = ranks.empty() ? 0.0
                                    : static_cast<double>(out.dropped.size()) /
                                          static_cast<double>(ranks.size());
  return out;
}

DetectionStats detection_stats(const FilterResult& filtered, const std::vector<bool>& ambiguous) {
  DetectionStats s;
  std::size_t total_ambiguous = 0;
  std::vector<bool> considered(ambiguous.size(), false);
  for (std::size_t c : filtered.kept) considered.at(c) = true;
  for (std::size_t c : filtered.dropped) {
    considered.at(c) = true;
    if (ambiguous[c]) ++s.true_positives;
  }
  for (std::size_t c = 0; c < ambiguous.size(); ++c)
    if (considered[c] && ambiguous[c]) ++total_ambiguous;
  s.precision = filtered.dropped.empty() ? 0.0
                                         : static_cast<double>(s.true_positives) /
                                               static_cast<double>(filtered.dropped.size());
  s.recall = total_ambiguous == 0 ? 0.0
                                  : static_cast<double>(s.true_positives) /
                                        static_cast<double>(total_ambiguous);
  return s;
}

void write_filter_outputs(const std::filesystem::path& dir, const FeatureStore& store,
                          const FilterResult& filtered, const json& summary) {
  std::filesystem::create_directories(dir);
  const auto& captions = store.manifest().captions;
  {
    std::ofstream out(dir / "filtered_captions.jsonl", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "filtered_captions.jsonl").string());
    for (std::size_t c : filtered.kept) {
      out << json{{"video_id", captions[c].video_id}, {"caption_id", captions[c].id}}.dump()
          << '\n';
    }
  }
  std::ofstream out(dir / "summary.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "summary.json").string());
  out << summary.dump(2) << '\n';
}

std::vector<bool> read_caption_list(const std::filesystem::path& path,
                                    const FeatureStore& store) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::unordered_map<std::string, std::size_t> index;
  const auto& captions = store.manifest().captions;
  for (std::size_t c = 0; c < captions.size(); ++c) index.emplace(captions[c].id, c);
  // Captions outside the training split are never filtered.
  std::vector<bool> keep(captions.size(), false);
  for (std::size_t c = 0; c < captions.size(); ++c) {
    if (store.split_of_video(store.video_of_caption(c)) != Split::kTrain) keep[c] = true;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string id;
    try {
      id = json::parse(line).at("caption_id").get<std::string>();
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    auto it = index.find(id);
    if (it == index.end()) throw DanglingReferenceError(path.string() + ": unknown caption " + id);
    keep[it->second] = true;
  }
  return keep;
}

}  // namespace teachtext
