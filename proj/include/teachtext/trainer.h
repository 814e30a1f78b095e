// include/teachtext/trainer.h

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

#ifndef TEACHTEXT_TRAINER_H_
#define TEACHTEXT_TRAINER_H_

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "teachtext/data.h"
#include "teachtext/encoder.h"
#include "teachtext/losses.h"
#include "teachtext/metrics.h"

namespace teachtext {

enum class Aggregation { kMean, kMin, kMax };

enum class DistillVariant {
  kNone,
  kHuber,
  kL1,
  kL2,
  kRankK,
  kPdist,
  kRelational,
  kEmbedRegress,
};

std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view name);
std::string_view distill_variant_name(DistillVariant v);
// Accepts both "rank_k" and "rank-k" spellings (likewise embed_regress).
DistillVariant parse_distill_variant(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double margin = kDefaultMargin;
  double distill_weight = 1.0;
  Aggregation aggregation = Aggregation::kMean;
  DistillVariant distill_variant = DistillVariant::kHuber;
  std::size_t rank_k = 10;
  std::uint64_t seed = 0;
  std::size_t shared_dim = 32;
  std::string student_text_encoder_id;
  std::vector<std::string> teacher_text_encoder_ids;
  // Empty means "every modality in the store".
  std::vector<std::string> student_modalities;
  std::vector<std::string> teacher_modalities;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// Keys mirror the field names. Keys present in `j` override `base`; unknown
// keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const TrainConfig& cfg);

// Element-wise mean / min / max of equally shaped matrices.
Matrix aggregate(const std::vector<Matrix>& mats, Aggregation mode = Aggregation::kMean);

// Adam with bias correction and coupled L2 weight decay (wd * param is added
// to the gradient before the moment updates).
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  static AdamState for_blocks(std::span<const Matrix* const> blocks);
};

void adam_step(AdamState& state, std::span<Matrix* const> params,
               std::span<const Matrix* const> grads, double learning_rate,
               double weight_decay);

// Frozen teachers. Distillation only reads them.
struct TeacherPool {
  std::vector<DualEncoderParams> teachers;

  std::vector<std::uint64_t> checksums() const;
};

struct BatchInputs {
  VideoFeatures videos;
  Matrix texts;
};

BatchInputs gather_batch(const FeatureStore& store, const std::vector<ModalitySpec>& modalities,
                         const std::string& text_encoder_id, const Batch& batch);

// Per-batch supervision computed from the frozen teachers. Every teacher
// sees the batch's videos and its own text embedding of the batch captions.
struct DistillTargets {
  Matrix phi;  // aggregated similarities (cross-modal distances for pdist)
  std::vector<Matrix> teacher_video;  // joint embeddings, relational / embed_regress
  std::vector<Matrix> teacher_text;
};

DistillTargets teacher_targets(const TeacherPool& pool, const FeatureStore& store,
                               const Batch& batch, const TrainConfig& cfg);

struct ObjectiveValue {
  double ranking = 0.0;
  double distill = 0.0;
  double total = 0.0;
};

// L = L_r + distill_weight * L_d on one batch. `targets` may be null (no
// distillation). When `grad` is non-null it receives dL/dparams.
ObjectiveValue student_objective(const DualEncoderParams& student, const BatchInputs& inputs,
                                 const DistillTargets* targets, const TrainConfig& cfg,
                                 DualEncoderParams* grad);

// One optimiser update. Parameters are rounded to float32 afterwards so the
// in-memory model always equals what a model file would hold. Returns the
// objective at the pre-update parameters.
ObjectiveValue train_step(DualEncoderParams& params, AdamState& state,
                          const BatchInputs& inputs, const DistillTargets* targets,
                          const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double ranking_loss = 0.0;
  double distill_loss = 0.0;
  double val_geomean = 0.0;
};

struct TrainResult {
  DualEncoderParams params;  // best-validation snapshot
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_geomean = 0.0;

  nlohmann::json log_json(const TrainConfig& cfg) const;
};

// Phase 1: ranking loss only, on `text_encoder_id` and cfg.teacher_modalities.
TrainResult train_teacher(const FeatureStore& store, const TrainConfig& cfg,
                          const std::string& text_encoder_id);

// Phase 2: ranking loss plus distillation from the frozen pool, on
// cfg.student_text_encoder_id and cfg.student_modalities. With
// distill_variant == kNone the teachers are ignored and the run is
// identical to train_teacher on the student's text encoder.
TrainResult train_student(const FeatureStore& store, const TrainConfig& cfg,
                          const TeacherPool& teachers);

// Single teacher over a strict superset of the student's modalities, same
// text encoder on both sides.
TrainResult train_student_teachvideo(const FeatureStore& store, const TrainConfig& cfg,
                                     const DualEncoderParams& teacher);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

using MetricMap = std::map<std::string, double>;

// r1, r5, r10, r50, mdr, geomean.
MetricMap metric_map(const MetricsReport& r);

std::map<std::string, MetricSummary> multi_seed_report(
    const std::function<MetricMap(std::uint64_t)>& run, const std::vector<std::uint64_t>& seeds);

}  // namespace teachtext

#endif  // TEACHTEXT_TRAINER_H_
