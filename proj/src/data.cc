// src/data.cc

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

#include "teachtext/data.h"

#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "teachtext/binary_io.h"
#include "teachtext/error.h"
#include "teachtext/rng.h"

namespace teachtext {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint16_t kMatrixVersion = 1;
constexpr const char* kManifestFile = "manifest.json";

std::vector<FeatureFileSpec> parse_file_specs(const json& arr, const char* key) {
  if (!arr.is_array()) throw FormatError(std::string("manifest: '") + key + "' is not an array");
  std::vector<FeatureFileSpec> out;
  for (const json& e : arr) {
    FeatureFileSpec s;
    s.id = e.at("id").get<std::string>();
    s.dim = e.at("dim").get<std::size_t>();
    s.file = e.at("file").get<std::string>();
    if (s.dim == 0) throw FormatError(std::string("manifest: ") + key + " '" + s.id + "' has dim 0");
    out.push_back(std::move(s));
  }
  return out;
}

Manifest parse_manifest(const json& j) {
  Manifest m;
  try {
    m.dataset = j.at("dataset").get<std::string>();
    m.modalities = parse_file_specs(j.at("modalities"), "modalities");
    m.text_encoders = parse_file_specs(j.at("text_encoders"), "text_encoders");
    for (const json& v : j.at("videos")) {
      m.videos.push_back({v.at("id").get<std::string>(),
                          parse_split(v.at("split").get<std::string>())});
    }
    for (const json& c : j.at("captions")) {
      m.captions.push_back({c.at("id").get<std::string>(), c.at("video_id").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["dataset"] = m.dataset;
  auto specs = [](const std::vector<FeatureFileSpec>& v) {
    json arr = json::array();
    for (const auto& s : v) arr.push_back({{"id", s.id}, {"dim", s.dim}, {"file", s.file}});
    return arr;
  };
  j["modalities"] = specs(m.modalities);
  j["text_encoders"] = specs(m.text_encoders);
  json videos = json::array();
  for (const auto& v : m.videos) videos.push_back({{"id", v.id}, {"split", split_name(v.split)}});
  j["videos"] = std::move(videos);
  json captions = json::array();
  for (const auto& c : m.captions) captions.push_back({{"id", c.id}, {"video_id", c.video_id}});
  j["captions"] = std::move(captions);
  return j;
}

template <typename Specs>
std::size_t find_id(const Specs& specs, std::string_view id, const char* kind) {
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].id == id) return i;
  throw DataError(std::string("unknown ") + kind + " id '" + std::string(id) + "'");
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// out = map * latent + noise_scale * N(0, 1), rounded to float32.
void project_into(std::span<double> out, const Matrix& map, std::span<const double> latent,
                  double noise_scale, Rng& rng) {
  for (std::size_t r = 0; r < map.rows(); ++r) {
    const double clean = dot(map.row(r), latent);
    out[r] = static_cast<double>(static_cast<float>(clean + noise_scale * rng.normal()));
  }
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

void write_matrix_file(const fs::path& path, const Matrix& m) {
  ByteWriter w;
  w.put_magic("TTFS");
  w.put_u16(kMatrixVersion);
  w.put_u32(static_cast<std::uint32_t>(m.rows()));
  w.put_u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) w.put_f32(static_cast<float>(v));
  write_file_bytes(path, w.bytes());
}

Matrix read_matrix_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  r.expect_magic("TTFS");
  const std::uint16_t version = r.get_u16();
  if (version != kMatrixVersion) {
    throw FormatError(path.string() + ": unsupported TTFS version " + std::to_string(version));
  }
  const std::uint32_t rows = r.get_u32();
  const std::uint32_t cols = r.get_u32();
  const std::size_t expected = 14 + 4 * static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != expected) {
    throw ShapeMismatchError(path.string() + ": header says " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " but payload is " +
                             std::to_string(bytes.size() - 14) + " bytes");
  }
  Matrix m(rows, cols);
  for (double& v : m.values()) v = static_cast<double>(r.get_f32());
  if (!all_finite(m.values())) throw NonFiniteDataError(path.string() + ": NaN or Inf entry");
  return m;
}

FeatureStore::FeatureStore(Manifest manifest, std::vector<Matrix> video_features,
                           std::vector<Matrix> caption_embeddings)
    : manifest_(std::move(manifest)),
      video_features_(std::move(video_features)),
      caption_embeddings_(std::move(caption_embeddings)) {
  if (video_features_.size() != manifest_.modalities.size() ||
      caption_embeddings_.size() != manifest_.text_encoders.size()) {
    throw ShapeMismatchError("feature matrix count does not match the manifest");
  }
  std::set<std::string> seen;
  for (const auto& s : manifest_.modalities)
    if (!seen.insert("m:" + s.id).second) throw FormatError("duplicate modality id " + s.id);
  for (const auto& s : manifest_.text_encoders)
    if (!seen.insert("t:" + s.id).second) throw FormatError("duplicate text encoder id " + s.id);

  std::unordered_map<std::string, std::size_t> video_index;
  for (std::size_t i = 0; i < manifest_.videos.size(); ++i) {
    if (!video_index.emplace(manifest_.videos[i].id, i).second) {
      throw FormatError("duplicate video id " + manifest_.videos[i].id);
    }
  }
  std::set<std::string> caption_ids;
  caption_video_.reserve(manifest_.captions.size());
  for (const auto& c : manifest_.captions) {
    if (!caption_ids.insert(c.id).second) throw FormatError("duplicate caption id " + c.id);
    auto it = video_index.find(c.video_id);
    if (it == video_index.end()) {
      throw DanglingReferenceError("caption '" + c.id + "' references unknown video '" +
                                   c.video_id + "'");
    }
    caption_video_.push_back(it->second);
  }

  auto check = [](const Matrix& m, const FeatureFileSpec& spec, std::size_t rows) {
    if (m.rows() != rows || m.cols() != spec.dim) {
      throw ShapeMismatchError("'" + spec.id + "' matrix is " + std::to_string(m.rows()) + "x" +
                               std::to_string(m.cols()) + ", manifest expects " +
                               std::to_string(rows) + "x" + std::to_string(spec.dim));
    }
    if (!all_finite(m.values())) throw NonFiniteDataError("'" + spec.id + "' has NaN or Inf");
  };
  for (std::size_t k = 0; k < video_features_.size(); ++k) {
    check(video_features_[k], manifest_.modalities[k], num_videos());
  }
  for (std::size_t k = 0; k < caption_embeddings_.size(); ++k) {
    check(caption_embeddings_[k], manifest_.text_encoders[k], num_captions());
  }
}

std::size_t FeatureStore::modality_index(std::string_view id) const {
  return find_id(manifest_.modalities, id, "modality");
}

std::size_t FeatureStore::text_encoder_index(std::string_view id) const {
  return find_id(manifest_.text_encoders, id, "text encoder");
}

bool FeatureStore::has_text_encoder(std::string_view id) const {
  for (const auto& t : manifest_.text_encoders)
    if (t.id == id) return true;
  return false;
}

std::vector<ModalitySpec> FeatureStore::modality_specs() const {
  std::vector<ModalitySpec> out;
  for (const auto& m : manifest_.modalities) out.push_back({m.id, m.dim});
  return out;
}

std::vector<ModalitySpec> FeatureStore::modality_specs(const std::vector<std::string>& ids) const {
  if (ids.empty()) return modality_specs();
  std::vector<ModalitySpec> out;
  for (const auto& id : ids) {
    const auto& m = manifest_.modalities[modality_index(id)];
    out.push_back({m.id, m.dim});
  }
  return out;
}

std::size_t FeatureStore::text_dim(std::string_view text_encoder_id) const {
  return manifest_.text_encoders[text_encoder_index(text_encoder_id)].dim;
}

std::vector<std::size_t> FeatureStore::videos_in_split(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < num_videos(); ++i)
    if (manifest_.videos[i].split == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> FeatureStore::captions_in_split(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_captions(); ++c)
    if (manifest_.videos[caption_video_[c]].split == s) out.push_back(c);
  return out;
}

VideoFeatures FeatureStore::gather_videos(const std::vector<ModalitySpec>& modalities,
                                          const std::vector<std::size_t>& videos) const {
  VideoFeatures out;
  for (const auto& spec : modalities) {
    const std::size_t k = modality_index(spec.id);
    const Matrix& src = video_features_[k];
    if (src.cols() != spec.dim) {
      throw ShapeMismatchError("modality '" + spec.id + "' has dim " + std::to_string(src.cols()) +
                               " in the store, model expects " + std::to_string(spec.dim));
    }
    Matrix m(videos.size(), src.cols());
    for (std::size_t r = 0; r < videos.size(); ++r) {
      auto s = src.row(videos[r]);
      std::copy(s.begin(), s.end(), m.row(r).begin());
    }
    out.push_back(std::move(m));
  }
  return out;
}

Matrix FeatureStore::gather_captions(std::string_view text_encoder_id,
                                     const std::vector<std::size_t>& captions) const {
  const Matrix& src = caption_embeddings_[text_encoder_index(text_encoder_id)];
  Matrix m(captions.size(), src.cols());
  for (std::size_t r = 0; r < captions.size(); ++r) {
    auto s = src.row(captions[r]);
    std::copy(s.begin(), s.end(), m.row(r).begin());
  }
  return m;
}

FeatureStore FeatureStore::with_captions(const std::vector<bool>& keep) const {
  if (keep.size() != num_captions()) {
    throw DimensionError("with_captions: mask length does not match caption count");
  }
  Manifest m = manifest_;
  m.captions.clear();
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < num_captions(); ++c) {
    if (!keep[c]) continue;
    m.captions.push_back(manifest_.captions[c]);
    rows.push_back(c);
  }
  std::vector<Matrix> embeddings;
  for (const Matrix& src : caption_embeddings_) {
    Matrix dst(rows.size(), src.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto s = src.row(rows[r]);
      std::copy(s.begin(), s.end(), dst.row(r).begin());
    }
    embeddings.push_back(std::move(dst));
  }
  return FeatureStore(std::move(m), video_features_, std::move(embeddings));
}

FeatureStore load_store(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) throw MissingFileError("missing " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  Manifest manifest = parse_manifest(j);
  std::vector<Matrix> videos;
  for (const auto& s : manifest.modalities) videos.push_back(read_matrix_file(dir / s.file));
  std::vector<Matrix> captions;
  for (const auto& s : manifest.text_encoders) captions.push_back(read_matrix_file(dir / s.file));
  return FeatureStore(std::move(manifest), std::move(videos), std::move(captions));
}

void save_store(const fs::path& dir, const FeatureStore& store) {
  fs::create_directories(dir);
  const Manifest& m = store.manifest();
  for (std::size_t k = 0; k < m.modalities.size(); ++k) {
    write_matrix_file(dir / m.modalities[k].file, store.video_features(k));
  }
  for (std::size_t k = 0; k < m.text_encoders.size(); ++k) {
    write_matrix_file(dir / m.text_encoders[k].file, store.caption_embeddings(k));
  }
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / kManifestFile).string());
  out << manifest_to_json(m).dump(1) << '\n';
}

std::vector<Batch> split_iter(const FeatureStore& store, Split split, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  std::vector<std::size_t> captions = store.captions_in_split(split);
  if (captions.empty()) {
    throw DataError("split '" + std::string(split_name(split)) + "' has no captions");
  }
  std::set<std::size_t> distinct;
  for (std::size_t c : captions) distinct.insert(store.video_of_caption(c));
  const std::size_t effective = std::min(batch_size, distinct.size());
  if (effective < 2) return {};

  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(captions);

  std::vector<Batch> batches;
  std::vector<bool> full;
  std::vector<std::size_t> open;  // indices of non-full batches, creation order
  std::unordered_map<std::size_t, std::vector<std::size_t>> batches_of_video;
  for (std::size_t c : captions) {
    const std::size_t v = store.video_of_caption(c);
    auto& owned = batches_of_video[v];
    std::size_t target = batches.size();
    for (std::size_t b : open) {
      if (std::find(owned.begin(), owned.end(), b) == owned.end()) {
        target = b;
        break;
      }
    }
    if (target == batches.size()) {
      batches.emplace_back();
      full.push_back(false);
      open.push_back(target);
    }
    batches[target].captions.push_back(c);
    batches[target].videos.push_back(v);
    owned.push_back(target);
    if (batches[target].captions.size() == effective) {
      full[target] = true;
      open.erase(std::find(open.begin(), open.end(), target));
    }
  }
  std::vector<Batch> out;
  for (std::size_t b = 0; b < batches.size(); ++b)
    if (full[b]) out.push_back(std::move(batches[b]));
  return out;
}

SynthCorpus synth_corpus(const SynthOptions& o) {
  if (o.n_videos < 1 || o.captions_per_video < 1 || o.n_modalities < 1 ||
      o.n_text_encoders < 1 || o.latent_dim < 1 || o.modality_dim < 1 || o.text_dim < 1) {
    throw ConfigError("synth_corpus: counts and dims must be at least 1");
  }
  if (!(o.ambiguous_fraction >= 0.0 && o.ambiguous_fraction <= 1.0)) {
    throw ConfigError("synth_corpus: ambiguous_fraction must lie in [0, 1]");
  }
  if (!(o.val_fraction >= 0.0 && o.test_fraction >= 0.0 &&
        o.val_fraction + o.test_fraction < 1.0)) {
    throw ConfigError("synth_corpus: invalid split fractions");
  }
  if (o.video_noise < 0.0 || o.caption_spread < 0.0) {
    throw ConfigError("synth_corpus: noise levels must be non-negative");
  }
  std::vector<double> text_noise = o.text_noise;
  if (text_noise.empty()) {
    for (std::size_t k = 0; k < o.n_text_encoders; ++k) {
      const double t = o.n_text_encoders == 1
                           ? 0.0
                           : static_cast<double>(k) / static_cast<double>(o.n_text_encoders - 1);
      text_noise.push_back(0.4 + 0.8 * t);
    }
  }
  if (text_noise.size() != o.n_text_encoders) {
    throw ConfigError("synth_corpus: need one noise level per text encoder");
  }
  for (double s : text_noise)
    if (!(s >= 0.0)) throw ConfigError("synth_corpus: noise levels must be non-negative");

  Rng rng(o.seed);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(o.latent_dim));
  std::vector<Matrix> video_maps;
  for (std::size_t m = 0; m < o.n_modalities; ++m) {
    video_maps.push_back(gaussian_matrix(o.modality_dim, o.latent_dim, map_scale, rng));
  }
  std::vector<Matrix> text_maps;
  for (std::size_t k = 0; k < o.n_text_encoders; ++k) {
    text_maps.push_back(gaussian_matrix(o.text_dim, o.latent_dim, map_scale, rng));
  }

  const Matrix latents = gaussian_matrix(o.n_videos, o.latent_dim, 1.0, rng);
  std::vector<double> mean_latent(o.latent_dim, 0.0);
  for (std::size_t i = 0; i < o.n_videos; ++i)
    for (std::size_t c = 0; c < o.latent_dim; ++c)
      mean_latent[c] += latents(i, c) / static_cast<double>(o.n_videos);

  Manifest manifest;
  manifest.dataset = "synthetic-" + std::to_string(o.seed);
  for (std::size_t m = 0; m < o.n_modalities; ++m) {
    const std::string id = "m" + std::to_string(m);
    manifest.modalities.push_back({id, o.modality_dim, "video_" + id + ".ttfs"});
  }
  for (std::size_t k = 0; k < o.n_text_encoders; ++k) {
    const std::string id = "te" + std::to_string(k);
    manifest.text_encoders.push_back({id, o.text_dim, "text_" + id + ".ttfs"});
  }

  std::vector<std::size_t> order(o.n_videos);
  for (std::size_t i = 0; i < o.n_videos; ++i) order[i] = i;
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(o.test_fraction * o.n_videos));
  const auto n_val = static_cast<std::size_t>(std::llround(o.val_fraction * o.n_videos));
  std::vector<Split> splits(o.n_videos, Split::kTrain);
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r < n_test) {
      splits[order[r]] = Split::kTest;
    } else if (r < n_test + n_val) {
      splits[order[r]] = Split::kVal;
    }
  }
  char buf[32];
  for (std::size_t i = 0; i < o.n_videos; ++i) {
    std::snprintf(buf, sizeof(buf), "v%05zu", i);
    manifest.videos.push_back({buf, splits[i]});
  }
  const std::size_t n_captions = o.n_videos * o.captions_per_video;
  for (std::size_t c = 0; c < n_captions; ++c) {
    std::snprintf(buf, sizeof(buf), "c%06zu", c);
    manifest.captions.push_back({buf, manifest.videos[c / o.captions_per_video].id});
  }

  std::vector<std::size_t> caption_order(n_captions);
  for (std::size_t c = 0; c < n_captions; ++c) caption_order[c] = c;
  rng.shuffle(caption_order);
  const auto n_ambiguous =
      static_cast<std::size_t>(std::llround(o.ambiguous_fraction * static_cast<double>(n_captions)));
  std::vector<bool> ambiguous(n_captions, false);
  for (std::size_t r = 0; r < n_ambiguous; ++r) ambiguous[caption_order[r]] = true;

  std::vector<Matrix> video_features;
  for (std::size_t m = 0; m < o.n_modalities; ++m) {
    Matrix f(o.n_videos, o.modality_dim);
    for (std::size_t i = 0; i < o.n_videos; ++i) {
      project_into(f.row(i), video_maps[m], latents.row(i), o.video_noise, rng);
    }
    video_features.push_back(std::move(f));
  }

  Matrix caption_latents(n_captions, o.latent_dim);
  for (std::size_t c = 0; c < n_captions; ++c) {
    auto dst = caption_latents.row(c);
    if (ambiguous[c]) {
      std::copy(mean_latent.begin(), mean_latent.end(), dst.begin());
      continue;
    }
    auto src = latents.row(c / o.captions_per_video);
    for (std::size_t d = 0; d < o.latent_dim; ++d) dst[d] = src[d] + o.caption_spread * rng.normal();
  }
  std::vector<Matrix> caption_embeddings;
  for (std::size_t k = 0; k < o.n_text_encoders; ++k) {
    Matrix e(n_captions, o.text_dim);
    for (std::size_t c = 0; c < n_captions; ++c) {
      project_into(e.row(c), text_maps[k], caption_latents.row(c), text_noise[k], rng);
    }
    caption_embeddings.push_back(std::move(e));
  }

  return {FeatureStore(std::move(manifest), std::move(video_features),
                       std::move(caption_embeddings)),
          std::move(ambiguous)};
}

void write_synth_corpus(const fs::path& dir, const SynthCorpus& corpus) {
  save_store(dir, corpus.store);
  std::ofstream out(dir / kLedgerFile, std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / kLedgerFile).string());
  const auto& captions = corpus.store.manifest().captions;
  // Only ambiguous captions are listed; anything absent is clean.
  for (std::size_t c = 0; c < captions.size(); ++c) {
    if (!corpus.ambiguous[c]) continue;
    out << json{{"caption_id", captions[c].id}, {"is_ambiguous", true}}.dump() << '\n';
  }
}

bool has_ambiguity_ledger(const fs::path& dir) { return fs::exists(dir / kLedgerFile); }

std::vector<bool> load_ambiguity_ledger(const fs::path& dir, const FeatureStore& store) {
  std::ifstream in(dir / kLedgerFile);
  if (!in) throw MissingFileError("missing " + (dir / kLedgerFile).string());
  std::unordered_map<std::string, std::size_t> index;
  const auto& captions = store.manifest().captions;
  for (std::size_t c = 0; c < captions.size(); ++c) index.emplace(captions[c].id, c);
  std::vector<bool> out(captions.size(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      auto it = index.find(j.at("caption_id").get<std::string>());
      if (it == index.end()) continue;
      out[it->second] = j.at("is_ambiguous").get<bool>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("ambiguity ledger: ") + e.what());
    }
  }
  return out;
}

}  // namespace teachtext
