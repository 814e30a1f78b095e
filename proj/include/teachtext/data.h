// include/teachtext/data.h

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

#ifndef TEACHTEXT_DATA_H_
#define TEACHTEXT_DATA_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "teachtext/encoder.h"
#include "teachtext/numerics.h"

namespace teachtext {

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split s);
// Throws ConfigError for anything other than train/val/test.
Split parse_split(std::string_view name);

struct FeatureFileSpec {
  std::string id;
  std::size_t dim = 0;
  std::string file;  // relative to the store directory
};

struct VideoEntry {
  std::string id;
  Split split = Split::kTrain;
};

struct CaptionEntry {
  std::string id;
  std::string video_id;
};

struct Manifest {
  std::string dataset;
  std::vector<FeatureFileSpec> modalities;
  std::vector<FeatureFileSpec> text_encoders;
  std::vector<VideoEntry> videos;
  std::vector<CaptionEntry> captions;
};

// TTFS matrix files: "TTFS", u16 version, u32 rows, u32 cols, f32 LE row-major.
void write_matrix_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_file(const std::filesystem::path& path);

// Validated, immutable corpus of per-video modality features and per-caption
// text embeddings.
class FeatureStore {
 public:
  // Validates shapes, finiteness and references; throws the DataError
  // subclass matching the first problem found.
  FeatureStore(Manifest manifest, std::vector<Matrix> video_features,
               std::vector<Matrix> caption_embeddings);

  const Manifest& manifest() const { return manifest_; }
  std::size_t num_videos() const { return manifest_.videos.size(); }
  std::size_t num_captions() const { return manifest_.captions.size(); }

  // Index lookups; throw DataError naming the unknown id.
  std::size_t modality_index(std::string_view id) const;
  std::size_t text_encoder_index(std::string_view id) const;
  bool has_text_encoder(std::string_view id) const;

  std::vector<ModalitySpec> modality_specs() const;
  std::vector<ModalitySpec> modality_specs(const std::vector<std::string>& ids) const;
  std::size_t text_dim(std::string_view text_encoder_id) const;

  std::size_t video_of_caption(std::size_t caption) const { return caption_video_[caption]; }
  Split split_of_video(std::size_t video) const { return manifest_.videos[video].split; }

  // Ascending indices.
  std::vector<std::size_t> videos_in_split(Split s) const;
  std::vector<std::size_t> captions_in_split(Split s) const;

  const Matrix& video_features(std::size_t modality) const { return video_features_[modality]; }
  const Matrix& caption_embeddings(std::size_t encoder) const {
    return caption_embeddings_[encoder];
  }

  // Rows for the requested videos, one matrix per requested modality id.
  VideoFeatures gather_videos(const std::vector<ModalitySpec>& modalities,
                              const std::vector<std::size_t>& videos) const;
  Matrix gather_captions(std::string_view text_encoder_id,
                         const std::vector<std::size_t>& captions) const;

  // Copy of the store holding only the captions with keep[c] set.
  FeatureStore with_captions(const std::vector<bool>& keep) const;

 private:
  Manifest manifest_;
  std::vector<Matrix> video_features_;
  std::vector<Matrix> caption_embeddings_;
  std::vector<std::size_t> caption_video_;
};

FeatureStore load_store(const std::filesystem::path& dir);
// Writes manifest.json plus one TTFS file per modality / text encoder.
void save_store(const std::filesystem::path& dir, const FeatureStore& store);

struct Batch {
  std::vector<std::size_t> captions;
  std::vector<std::size_t> videos;  // videos[i] owns captions[i]
};

// Deterministic epoch batching over one split. Captions are shuffled with a
// seed derived from (seed, epoch) and dealt first-fit into batches that hold
// at most one caption per video, so the positives of every batch similarity
// matrix sit on its diagonal. The effective batch size is capped by the
// number of distinct videos in the split; batches that end up short are
// dropped, and nothing is produced when fewer than two videos are available.
std::vector<Batch> split_iter(const FeatureStore& store, Split split, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch);

// Synthetic corpus generator.
//
// Every video draws a latent z; modality m observes it through a fixed random
// linear map plus Gaussian noise. Each caption perturbs its video's latent,
// and text encoder k embeds the caption latent through its own linear map
// plus noise of standard deviation text_noise[k]. Ambiguous captions use the
// corpus-mean latent instead of their video's, so they describe nothing in
// particular; they are recorded in the ambiguity ledger.
struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_videos = 200;
  std::size_t captions_per_video = 5;
  std::size_t n_modalities = 3;
  std::size_t n_text_encoders = 3;
  std::vector<double> text_noise;  // per text encoder; empty = evenly spread 0.4..1.2
  double ambiguous_fraction = 0.0;
  std::size_t latent_dim = 16;
  std::size_t modality_dim = 24;
  std::size_t text_dim = 24;
  double video_noise = 0.6;
  double caption_spread = 0.35;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
};

struct SynthCorpus {
  FeatureStore store;
  std::vector<bool> ambiguous;  // per caption, in manifest order
};

SynthCorpus synth_corpus(const SynthOptions& options);

inline constexpr const char* kLedgerFile = "ambiguity_ledger.jsonl";

// Writes the store and the ambiguity ledger (one JSON object per ambiguous caption).
void write_synth_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

// Reads the ledger next to a store, if present.
bool has_ambiguity_ledger(const std::filesystem::path& dir);
std::vector<bool> load_ambiguity_ledger(const std::filesystem::path& dir,
                                        const FeatureStore& store);

}  // namespace teachtext

#endif  // TEACHTEXT_DATA_H_
