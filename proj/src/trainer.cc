// src/trainer.cc

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

#include "teachtext/trainer.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "teachtext/error.h"
#include "teachtext/rng.h"

namespace teachtext {

using nlohmann::json;

namespace {

// Sub-seed tags so that initialisation and batching never share a stream.
constexpr std::uint64_t kInitStream = 0x1217;
constexpr std::uint64_t kBatchStream = 0xba7c;

bool uses_similarity_targets(DistillVariant v) {
  return v == DistillVariant::kHuber || v == DistillVariant::kL1 || v == DistillVariant::kL2 ||
         v == DistillVariant::kRankK || v == DistillVariant::kPdist;
}

DistillLoss elementwise_loss(DistillVariant v) {
  switch (v) {
    case DistillVariant::kL1:
      return DistillLoss::kL1;
    case DistillVariant::kL2:
      return DistillLoss::kL2;
    default:
      return DistillLoss::kHuber;
  }
}

std::vector<std::string> modality_ids(const std::vector<ModalitySpec>& specs) {
  std::vector<std::string> ids;
  for (const auto& s : specs) ids.push_back(s.id);
  return ids;
}

// Shared loop behind teacher and student training.
TrainResult train_model(const FeatureStore& store, const TrainConfig& cfg,
                        const std::string& text_encoder_id,
                        const std::vector<ModalitySpec>& modalities, const TeacherPool* pool) {
  cfg.validate();
  if (!store.has_text_encoder(text_encoder_id)) {
    throw DataError("store has no embeddings for text encoder '" + text_encoder_id + "'");
  }
  if (store.captions_in_split(Split::kTrain).empty()) {
    throw DataError("training split is empty");
  }
  const EncoderShape shape{modalities, store.text_dim(text_encoder_id), cfg.shared_dim,
                           text_encoder_id};
  DualEncoderParams params = init_params(shape, mix_seed(cfg.seed, kInitStream));
  AdamState adam = AdamState::for_blocks(std::as_const(params).blocks());
  const bool has_val = !store.captions_in_split(Split::kVal).empty();

  TrainResult result;
  result.params = params;
  result.best_val_geomean = -1.0;
  const std::uint64_t batch_seed = mix_seed(cfg.seed, kBatchStream);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<Batch> batches =
        split_iter(store, Split::kTrain, cfg.batch_size, batch_seed, epoch);
    if (batches.empty()) throw DataError("training split yields no batch of two or more videos");
    EpochRecord rec;
    rec.epoch = epoch + 1;
    for (const Batch& batch : batches) {
      const BatchInputs inputs = gather_batch(store, modalities, text_encoder_id, batch);
      ObjectiveValue v;
      if (pool != nullptr) {
        const DistillTargets targets = teacher_targets(*pool, store, batch, cfg);
        v = train_step(params, adam, inputs, &targets, cfg);
      } else {
        v = train_step(params, adam, inputs, nullptr, cfg);
      }
      rec.ranking_loss += v.ranking;
      rec.distill_loss += v.distill;
    }
    rec.ranking_loss /= static_cast<double>(batches.size());
    rec.distill_loss /= static_cast<double>(batches.size());
    rec.val_geomean = has_val ? evaluate(params, store, Split::kVal, Task::kT2V).geomean : 0.0;
    result.log.push_back(rec);
    if (!has_val || rec.val_geomean > result.best_val_geomean) {
      result.best_val_geomean = rec.val_geomean;
      result.best_epoch = rec.epoch;
      result.params = params;
    }
  }
  return result;
}

void check_same_modalities(const std::vector<ModalitySpec>& a, const std::vector<ModalitySpec>& b,
                           const std::string& what) {
  if (a != b) throw ConfigError(what + ": modality sets differ");
}

}  // namespace

std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::kMean:
      return "mean";
    case Aggregation::kMin:
      return "min";
    case Aggregation::kMax:
      return "max";
  }
  return "mean";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "min") return Aggregation::kMin;
  if (name == "max") return Aggregation::kMax;
  throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

std::string_view distill_variant_name(DistillVariant v) {
  switch (v) {
    case DistillVariant::kNone:
      return "none";
    case DistillVariant::kHuber:
      return "huber";
    case DistillVariant::kL1:
      return "l1";
    case DistillVariant::kL2:
      return "l2";
    case DistillVariant::kRankK:
      return "rank_k";
    case DistillVariant::kPdist:
      return "pdist";
    case DistillVariant::kRelational:
      return "relational";
    case DistillVariant::kEmbedRegress:
      return "embed_regress";
  }
  return "none";
}

DistillVariant parse_distill_variant(std::string_view name) {
  std::string n(name);
  std::replace(n.begin(), n.end(), '-', '_');
  for (auto v : {DistillVariant::kNone, DistillVariant::kHuber, DistillVariant::kL1,
                 DistillVariant::kL2, DistillVariant::kRankK, DistillVariant::kPdist,
                 DistillVariant::kRelational, DistillVariant::kEmbedRegress}) {
    if (distill_variant_name(v) == n) return v;
  }
  throw ConfigError("unknown distillation variant '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
  if (!(distill_weight >= 0.0)) throw ConfigError("distill_weight must be non-negative");
  if (rank_k < 1) throw ConfigError("rank_k must be at least 1");
  if (shared_dim < 1) throw ConfigError("shared_dim must be at least 1");
}

TrainConfig config_from_json(const json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "batch_size",          "epochs",       "learning_rate",
      "weight_decay",        "margin",       "distill_weight",
      "aggregation",         "distill_variant", "rank_k",
      "seed",                "shared_dim",   "student_text_encoder_id",
      "teacher_text_encoder_ids", "student_modalities", "teacher_modalities"};
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  TrainConfig c = std::move(base);
  try {
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("margin")) c.margin = j["margin"].get<double>();
    if (j.contains("distill_weight")) c.distill_weight = j["distill_weight"].get<double>();
    if (j.contains("aggregation")) c.aggregation = parse_aggregation(j["aggregation"].get<std::string>());
    if (j.contains("distill_variant")) {
      c.distill_variant = parse_distill_variant(j["distill_variant"].get<std::string>());
    }
    if (j.contains("rank_k")) c.rank_k = j["rank_k"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("shared_dim")) c.shared_dim = j["shared_dim"].get<std::size_t>();
    if (j.contains("student_text_encoder_id")) {
      c.student_text_encoder_id = j["student_text_encoder_id"].get<std::string>();
    }
    if (j.contains("teacher_text_encoder_ids")) {
      c.teacher_text_encoder_ids = j["teacher_text_encoder_ids"].get<std::vector<std::string>>();
    }
    if (j.contains("student_modalities")) {
      c.student_modalities = j["student_modalities"].get<std::vector<std::string>>();
    }
    if (j.contains("teacher_modalities")) {
      c.teacher_modalities = j["teacher_modalities"].get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"margin", c.margin},
          {"distill_weight", c.distill_weight},
          {"aggregation", aggregation_name(c.aggregation)},
          {"distill_variant", distill_variant_name(c.distill_variant)},
          {"rank_k", c.rank_k},
          {"seed", c.seed},
          {"shared_dim", c.shared_dim},
          {"student_text_encoder_id", c.student_text_encoder_id},
          {"teacher_text_encoder_ids", c.teacher_text_encoder_ids},
          {"student_modalities", c.student_modalities},
          {"teacher_modalities", c.teacher_modalities}};
}

Matrix aggregate(const std::vector<Matrix>& mats, Aggregation mode) {
  if (mats.empty()) throw ConfigError("aggregate: no teacher matrices");
  Matrix out = mats.front();
  for (std::size_t n = 1; n < mats.size(); ++n) {
    const Matrix& m = mats[n];
    if (m.rows() != out.rows() || m.cols() != out.cols()) {
      throw DimensionError("aggregate: teacher matrices differ in shape");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      double& acc = out.values()[i];
      const double v = m.values()[i];
      switch (mode) {
        case Aggregation::kMean:
          acc += v;
          break;
        case Aggregation::kMin:
          acc = std::min(acc, v);
          break;
        case Aggregation::kMax:
          acc = std::max(acc, v);
          break;
      }
    }
  }
  if (mode == Aggregation::kMean) out *= 1.0 / static_cast<double>(mats.size());
  return out;
}

AdamState AdamState::for_blocks(std::span<const Matrix* const> blocks) {
  AdamState s;
  for (const Matrix* b : blocks) {
    s.first_moment.emplace_back(b->rows(), b->cols());
    s.second_moment.emplace_back(b->rows(), b->cols());
  }
  return s;
}

void adam_step(AdamState& state, std::span<Matrix* const> params,
               std::span<const Matrix* const> grads, double learning_rate,
               double weight_decay) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b]->size() != grads[b]->size() || params[b]->size() != state.first_moment[b].size()) {
      throw DimensionError("adam_step: block shape mismatch");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b]->values();
    auto g = grads[b]->values();
    auto m = state.first_moment[b].values();
    auto v = state.second_moment[b].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + weight_decay * p[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    check_finite(*params[b], "parameters after Adam update");
  }
}

std::vector<std::uint64_t> TeacherPool::checksums() const {
  std::vector<std::uint64_t> out;
  for (const auto& t : teachers) out.push_back(model_checksum(t));
  return out;
}

BatchInputs gather_batch(const FeatureStore& store, const std::vector<ModalitySpec>& modalities,
                         const std::string& text_encoder_id, const Batch& batch) {
  return {store.gather_videos(modalities, batch.videos),
          store.gather_captions(text_encoder_id, batch.captions)};
}

DistillTargets teacher_targets(const TeacherPool& pool, const FeatureStore& store,
                               const Batch& batch, const TrainConfig& cfg) {
  if (pool.teachers.empty()) throw ConfigError("distillation requires at least one teacher");
  DistillTargets out;
  std::vector<Matrix> mats;
  for (const DualEncoderParams& teacher : pool.teachers) {
    const BatchInputs in = gather_batch(store, teacher.modalities, teacher.text_encoder_id, batch);
    const VideoEncoding venc = encode_videos(teacher, in.videos);
    const TextEncoding tenc = encode_texts(teacher, in.texts);
    if (uses_similarity_targets(cfg.distill_variant)) {
      Matrix s = similarity_matrix(venc, tenc);
      mats.push_back(cfg.distill_variant == DistillVariant::kPdist ? cross_modal_distances(s)
                                                                   : std::move(s));
    } else {
      out.teacher_video.push_back(video_joint_embedding(venc));
      out.teacher_text.push_back(text_joint_embedding(tenc));
    }
  }
  if (!mats.empty()) out.phi = aggregate(mats, cfg.aggregation);
  return out;
}

ObjectiveValue student_objective(const DualEncoderParams& student, const BatchInputs& inputs,
                                 const DistillTargets* targets, const TrainConfig& cfg,
                                 DualEncoderParams* grad) {
  const VideoEncoding venc = encode_videos(student, inputs.videos);
  const TextEncoding tenc = encode_texts(student, inputs.texts);
  const Matrix s = similarity_matrix(venc, tenc);

  ObjectiveValue value;
  LossValueAndGrad ranking = ranking_loss(s, cfg.margin);
  value.ranking = ranking.value;
  Matrix d_s = std::move(ranking.grad);
  EncodingGrads enc_grads = EncodingGrads::zeros(venc, tenc);

  const DistillVariant variant = cfg.distill_variant;
  if (targets != nullptr && variant != DistillVariant::kNone && cfg.distill_weight != 0.0) {
    const double w = cfg.distill_weight;
    if (variant == DistillVariant::kPdist) {
      const LossValueAndGrad l = pdist_loss(cross_modal_distances(s), targets->phi);
      value.distill = l.value;
      Matrix back = cross_modal_distances_backward(s, l.grad);
      back *= w;
      d_s += back;
    } else if (uses_similarity_targets(variant)) {
      LossValueAndGrad l =
          variant == DistillVariant::kRankK
              ? rank_k_distill_loss(s, targets->phi, std::min(cfg.rank_k, s.rows()))
              : distill_loss(s, targets->phi, elementwise_loss(variant));
      value.distill = l.value;
      l.grad *= w;
      d_s += l.grad;
    } else {
      const Matrix sv = video_joint_embedding(venc);
      const Matrix st = text_joint_embedding(tenc);
      const std::size_t n = targets->teacher_video.size();
      if (n == 0) throw ConfigError("embedding distillation requires teacher embeddings");
      const double scale = w / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) {
        EmbeddingLossAndGrad l =
            variant == DistillVariant::kRelational
                ? relational_intra_loss(sv, st, targets->teacher_video[k], targets->teacher_text[k])
                : embed_regress_loss(sv, st, targets->teacher_video[k], targets->teacher_text[k]);
        value.distill += l.value / static_cast<double>(n);
        l.grad_video *= scale;
        l.grad_text *= scale;
        joint_embedding_backward(venc, tenc, &l.grad_video, &l.grad_text, enc_grads);
      }
    }
  }
  value.total = value.ranking + cfg.distill_weight * value.distill;
  if (grad != nullptr) {
    similarity_backward(venc, tenc, d_s, enc_grads);
    *grad = encoder_backward(student, inputs.videos, inputs.texts, venc, tenc, enc_grads);
  }
  return value;
}

ObjectiveValue train_step(DualEncoderParams& params, AdamState& state,
                          const BatchInputs& inputs, const DistillTargets* targets,
                          const TrainConfig& cfg) {
  DualEncoderParams grad;
  const ObjectiveValue v = student_objective(params, inputs, targets, cfg, &grad);
  adam_step(state, params.blocks(), std::as_const(grad).blocks(), cfg.learning_rate,
            cfg.weight_decay);
  for (Matrix* b : params.blocks()) round_to_float32(*b);
  return v;
}

json TrainResult::log_json(const TrainConfig& cfg) const {
  json epochs = json::array();
  for (const auto& r : log) {
    epochs.push_back({{"epoch", r.epoch},
                      {"ranking_loss", r.ranking_loss},
                      {"distill_loss", r.distill_loss},
                      {"val_geomean", r.val_geomean}});
  }
  return {{"config", to_json(cfg)},
          {"text_encoder_id", params.text_encoder_id},
          {"modalities", modality_ids(params.modalities)},
          {"epochs", std::move(epochs)},
          {"best_epoch", best_epoch},
          {"best_val_geomean", best_val_geomean}};
}

TrainResult train_teacher(const FeatureStore& store, const TrainConfig& cfg,
                          const std::string& text_encoder_id) {
  return train_model(store, cfg, text_encoder_id, store.modality_specs(cfg.teacher_modalities),
                     nullptr);
}

TrainResult train_student(const FeatureStore& store, const TrainConfig& cfg,
                          const TeacherPool& teachers) {
  if (cfg.student_text_encoder_id.empty()) {
    throw ConfigError("student_text_encoder_id is not set");
  }
  const auto modalities = store.modality_specs(cfg.student_modalities);
  if (cfg.distill_variant == DistillVariant::kNone) {
    return train_model(store, cfg, cfg.student_text_encoder_id, modalities, nullptr);
  }
  if (teachers.teachers.empty()) throw ConfigError("distillation requires at least one teacher");
  if (!cfg.teacher_text_encoder_ids.empty()) {
    std::vector<std::string> ids;
    for (const auto& t : teachers.teachers) ids.push_back(t.text_encoder_id);
    if (ids != cfg.teacher_text_encoder_ids) {
      throw ConfigError("teacher_text_encoder_ids does not match the supplied teachers");
    }
  }
  for (const auto& t : teachers.teachers) {
    check_same_modalities(t.modalities, teachers.teachers.front().modalities, "teacher pool");
    if (!store.has_text_encoder(t.text_encoder_id)) {
      throw DataError("store has no embeddings for teacher text encoder '" + t.text_encoder_id + "'");
    }
    if (store.text_dim(t.text_encoder_id) != t.text_dim) {
      throw DataError("teacher text dim does not match store for '" + t.text_encoder_id + "'");
    }
    store.gather_videos(t.modalities, {});  // throws on unknown modality or dim mismatch
  }
  check_same_modalities(modalities, teachers.teachers.front().modalities,
                        "student vs teachers (use TeachVideo for a modality subset)");
  if (cfg.distill_variant == DistillVariant::kEmbedRegress) {
    for (const auto& t : teachers.teachers) {
      if (t.shared_dim != cfg.shared_dim) {
        throw ConfigError("embed_regress needs teacher and student shared_dim to match");
      }
    }
  }
  return train_model(store, cfg, cfg.student_text_encoder_id, modalities, &teachers);
}

TrainResult train_student_teachvideo(const FeatureStore& store, const TrainConfig& cfg,
                                     const DualEncoderParams& teacher) {
  if (cfg.student_text_encoder_id.empty()) {
    throw ConfigError("student_text_encoder_id is not set");
  }
  if (cfg.distill_variant == DistillVariant::kNone) {
    throw ConfigError("TeachVideo needs a distillation variant");
  }
  if (teacher.text_encoder_id != cfg.student_text_encoder_id) {
    throw ConfigError("TeachVideo teacher and student must use the same text encoder");
  }
  const auto student_modalities = store.modality_specs(cfg.student_modalities);
  std::set<std::string> teacher_ids;
  for (const auto& m : teacher.modalities) teacher_ids.insert(m.id);
  for (const auto& m : student_modalities) {
    if (!teacher_ids.count(m.id)) {
      throw ConfigError("TeachVideo student modality '" + m.id + "' is not used by the teacher");
    }
  }
  if (student_modalities.size() >= teacher.modalities.size()) {
    throw ConfigError("TeachVideo student modalities must be a strict subset of the teacher's");
  }
  store.gather_videos(teacher.modalities, {});
  if (cfg.distill_variant == DistillVariant::kEmbedRegress) {
    throw ConfigError("embed_regress cannot compare joint spaces of different widths");
  }
  TeacherPool pool{{teacher}};
  return train_model(store, cfg, cfg.student_text_encoder_id, student_modalities, &pool);
}

MetricMap metric_map(const MetricsReport& r) {
  return {{"r1", r.r1},   {"r5", r.r5},           {"r10", r.r10},
          {"r50", r.r50}, {"mdr", r.median_rank}, {"geomean", r.geomean}};
}

std::map<std::string, MetricSummary> multi_seed_report(
    const std::function<MetricMap(std::uint64_t)>& run, const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) throw ConfigError("multi_seed_report needs at least two seeds");
  std::map<std::string, std::vector<double>> values;
  for (std::uint64_t seed : seeds) {
    for (const auto& [k, v] : run(seed)) values[k].push_back(v);
  }
  std::map<std::string, MetricSummary> out;
  for (const auto& [k, vs] : values) {
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= static_cast<double>(vs.size());
    double var = 0.0;
    for (double v : vs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vs.size());
    out[k] = {mean, std::sqrt(var)};
  }
  return out;
}

}  // namespace teachtext
