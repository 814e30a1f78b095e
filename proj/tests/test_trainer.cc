// tests/test_trainer.cc

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

#include <cmath>

#include "doctest.h"
#include "teachtext/data.h"
#include "teachtext/error.h"
#include "teachtext/metrics.h"
#include "teachtext/rng.h"
#include "teachtext/trainer.h"

using namespace teachtext;

namespace {

const SynthCorpus& corpus() {
  static const SynthCorpus c = [] {
    SynthOptions o;
    o.seed = 3;
    o.n_videos = 80;
    o.captions_per_video = 3;
    o.latent_dim = 6;
    o.modality_dim = 8;
    o.text_dim = 8;
    o.val_fraction = 0.2;
    return synth_corpus(o);
  }();
  return c;
}

TrainConfig small_config(std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 16;
  cfg.shared_dim = 8;
  cfg.seed = seed;
  cfg.learning_rate = 5e-3;
  cfg.student_text_encoder_id = "te0";
  return cfg;
}

const TeacherPool& pool() {
  static const TeacherPool p = [] {
    TeacherPool out;
    for (const char* te : {"te0", "te1", "te2"}) {
      out.teachers.push_back(train_teacher(corpus().store, small_config(), te).params);
    }
    return out;
  }();
  return p;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-1, 1);
  return m;
}

}  // namespace

TEST_CASE("aggregate examples") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(aggregate({a, a, a}) == a);
  const Matrix z = Matrix::from_rows({{0}}), t = Matrix::from_rows({{2}});
  CHECK(aggregate({z, t}, Aggregation::kMean) == Matrix::from_rows({{1}}));
  CHECK(aggregate({z, t}, Aggregation::kMin) == z);
  CHECK(aggregate({z, t}, Aggregation::kMax) == t);
  CHECK_THROWS_AS(aggregate({}), ConfigError);
  CHECK_THROWS_AS(aggregate({z, a}), DimensionError);
}

TEST_CASE("aggregation min <= mean <= max") {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    std::vector<Matrix> mats;
    const std::size_t n = 1 + rng.below(5), b = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) mats.push_back(random_matrix(b, b, rng));
    const Matrix lo = aggregate(mats, Aggregation::kMin);
    const Matrix mid = aggregate(mats, Aggregation::kMean);
    const Matrix hi = aggregate(mats, Aggregation::kMax);
    for (std::size_t i = 0; i < lo.size(); ++i) {
      CHECK(lo.values()[i] <= mid.values()[i] + 1e-15);
      CHECK(mid.values()[i] <= hi.values()[i] + 1e-15);
    }
  }
}

TEST_CASE("adam step") {
  SUBCASE("zero gradient without decay leaves params alone") {
    Matrix p = Matrix::from_rows({{0.3, -2.0}});
    const Matrix g(1, 2);
    const Matrix before = p;
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    AdamState st = AdamState::for_blocks(gs);
    adam_step(st, ps, gs, 1e-3, 0.0);
    CHECK(p == before);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    Matrix p = Matrix::from_rows({{1.0, 1.0}});
    const Matrix g = Matrix::from_rows({{0.37, -5.0}});
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    AdamState st = AdamState::for_blocks(gs);
    adam_step(st, ps, gs, 1e-3, 0.0);
    CHECK(p(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
    CHECK(p(0, 1) == doctest::Approx(1.0 + 1e-3).epsilon(1e-7));
    CHECK(st.step == 1);
  }
  SUBCASE("two steps on p^2 follow a scalar reference") {
    Matrix p = Matrix::from_rows({{1.0}});
    Matrix g(1, 1);
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    AdamState st = AdamState::for_blocks(gs);
    double x = 1.0, m = 0.0, v = 0.0;
    const double lr = 0.1, wd = 0.01;
    for (int t = 1; t <= 2; ++t) {
      g(0, 0) = 2.0 * p(0, 0);
      adam_step(st, ps, gs, lr, wd);
      const double gr = 2.0 * x + wd * x;
      m = 0.9 * m + 0.1 * gr;
      v = 0.999 * v + 0.001 * gr * gr;
      x -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(p(0, 0) == doctest::Approx(x).epsilon(1e-14));
    }
  }
  SUBCASE("shape mismatch") {
    Matrix p(1, 2);
    const Matrix g(1, 3);
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&g};
    AdamState st = AdamState::for_blocks(gs);
    CHECK_THROWS_AS(adam_step(st, ps, gs, 1e-3, 0.0), DimensionError);
  }
}

TEST_CASE("config JSON") {
  TrainConfig cfg = config_from_json({{"epochs", 3}, {"distill_variant", "rank-k"}, {"aggregation", "max"}});
  CHECK(cfg.epochs == 3);
  CHECK(cfg.distill_variant == DistillVariant::kRankK);
  CHECK(cfg.aggregation == Aggregation::kMax);
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.learning_rate == 1e-3);
  CHECK(cfg.weight_decay == 1e-5);
  CHECK(cfg.margin == 0.2);
  CHECK_THROWS_AS(config_from_json({{"epoch", 3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"epochs", "three"}}), ConfigError);
  const TrainConfig back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  TrainConfig bad;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_distill_variant("embed-regress") == DistillVariant::kEmbedRegress);
  CHECK_THROWS_AS(parse_distill_variant("kl"), ConfigError);
}

TEST_CASE("teacher training lowers the ranking loss and is deterministic") {
  const TrainConfig cfg = small_config();
  const TrainResult a = train_teacher(corpus().store, cfg, "te0");
  REQUIRE(a.log.size() == cfg.epochs);
  CHECK(a.log.back().ranking_loss < a.log.front().ranking_loss);
  const TrainResult b = train_teacher(corpus().store, cfg, "te0");
  CHECK(serialize_model(a.params) == serialize_model(b.params));
  CHECK(a.params == pool().teachers[0]);

  const TrainResult c = train_teacher(corpus().store, small_config(1), "te0");
  CHECK_FALSE(c.params == a.params);
  CHECK(c.best_val_geomean != a.best_val_geomean);

  double best = -1.0;
  for (const auto& r : a.log) best = std::max(best, r.val_geomean);
  CHECK(a.best_val_geomean == best);
  CHECK(evaluate(a.params, corpus().store, Split::kVal, Task::kT2V).geomean == a.best_val_geomean);
}

TEST_CASE("unknown text encoder is a data error") {
  CHECK_THROWS_AS(train_teacher(corpus().store, small_config(), "te9"), DataError);
}

TEST_CASE("distill none reduces to teacher training byte for byte") {
  TrainConfig cfg = small_config();
  cfg.distill_variant = DistillVariant::kNone;
  const TrainResult s = train_student(corpus().store, cfg, pool());
  CHECK(serialize_model(s.params) == serialize_model(pool().teachers[0]));
}

TEST_CASE("teachers are frozen during distillation") {
  const TeacherPool p = pool();
  const auto before = p.checksums();
  for (DistillVariant v : {DistillVariant::kHuber, DistillVariant::kPdist, DistillVariant::kRelational,
                           DistillVariant::kEmbedRegress, DistillVariant::kRankK}) {
    TrainConfig cfg = small_config();
    cfg.epochs = 2;
    cfg.distill_variant = v;
    cfg.rank_k = 4;
    const TrainResult r = train_student(corpus().store, cfg, p);
    CHECK(p.checksums() == before);
    CHECK(r.log.size() == 2);
    CHECK(r.log.front().distill_loss > 0.0);
  }
}

TEST_CASE("distilled students are deterministic and differ from the baseline") {
  TrainConfig cfg = small_config();
  const TrainResult a = train_student(corpus().store, cfg, pool());
  const TrainResult b = train_student(corpus().store, cfg, pool());
  CHECK(serialize_model(a.params) == serialize_model(b.params));
  CHECK_FALSE(a.params == pool().teachers[0]);
}

TEST_CASE("self-learning: a previous student as the only teacher") {
  TrainConfig cfg = small_config();
  TeacherPool self;
  self.teachers.push_back(train_student(corpus().store, cfg, pool()).params);
  const TrainResult r = train_student(corpus().store, cfg, self);
  CHECK(r.log.size() == cfg.epochs);
  CHECK(r.best_val_geomean > 0.0);
}

TEST_CASE("student configuration errors") {
  TrainConfig cfg = small_config();
  CHECK_THROWS_AS(train_student(corpus().store, cfg, TeacherPool{}), ConfigError);
  cfg.student_modalities = {"m0"};
  CHECK_THROWS_AS(train_student(corpus().store, cfg, pool()), ConfigError);
  cfg = small_config();
  cfg.distill_variant = DistillVariant::kEmbedRegress;
  cfg.shared_dim = 4;
  CHECK_THROWS_AS(train_student(corpus().store, cfg, pool()), ConfigError);
  cfg = small_config();
  cfg.student_text_encoder_id.clear();
  CHECK_THROWS_AS(train_student(corpus().store, cfg, pool()), ConfigError);
}

TEST_CASE("TeachVideo") {
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.student_modalities = {"m0"};
  const TrainResult r = train_student_teachvideo(corpus().store, cfg, pool().teachers[0]);
  REQUIRE(r.params.modalities.size() == 1);
  CHECK(r.params.modalities[0].id == "m0");
  CHECK(evaluate(r.params, corpus().store, Split::kTest, Task::kT2V).num_queries > 0);

  cfg.student_modalities = {"m0", "m1", "m2"};
  CHECK_THROWS_AS(train_student_teachvideo(corpus().store, cfg, pool().teachers[0]), ConfigError);
  cfg.student_modalities = {"m0"};
  CHECK_THROWS_AS(train_student_teachvideo(corpus().store, cfg, pool().teachers[1]), ConfigError);
}

TEST_CASE("one small step does not increase the batch objective") {
  std::vector<Batch> batches;
  for (std::uint64_t epoch = 0; batches.size() < 20; ++epoch) {
    for (const Batch& b : split_iter(corpus().store, Split::kTrain, 8, 11, epoch)) batches.push_back(b);
  }
  batches.resize(20);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 1e-4;
  cfg.weight_decay = 0.0;
  const DualEncoderParams start = pool().teachers[1];
  for (std::size_t b = 0; b < batches.size(); ++b) {
    cfg.student_text_encoder_id = "te1";
    const BatchInputs in = gather_batch(corpus().store, start.modalities, "te1", batches[b]);
    const DistillTargets tg = teacher_targets(pool(), corpus().store, batches[b], cfg);
    DualEncoderParams p = start;
    AdamState st = AdamState::for_blocks(std::as_const(p).blocks());
    const double before = student_objective(p, in, &tg, cfg, nullptr).total;
    train_step(p, st, in, &tg, cfg);
    const double after = student_objective(p, in, &tg, cfg, nullptr).total;
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("multi-seed report") {
  auto constant = [](std::uint64_t) { return MetricMap{{"geomean", 5.0}}; };
  CHECK(multi_seed_report(constant, {1, 2, 3}).at("geomean").std == 0.0);
  auto two = [](std::uint64_t s) { return MetricMap{{"r1", s == 0 ? 1.0 : 3.0}}; };
  const auto r = multi_seed_report(two, {0, 1});
  CHECK(r.at("r1").mean == 2.0);
  CHECK(r.at("r1").std == 1.0);
  CHECK_THROWS_AS(multi_seed_report(two, {}), ConfigError);
  CHECK_THROWS_AS(multi_seed_report(two, {1}), ConfigError);

  auto run = [](std::uint64_t seed) {
    TrainConfig cfg = small_config(seed);
    cfg.epochs = 2;
    return metric_map(evaluate(train_teacher(corpus().store, cfg, "te0").params, corpus().store,
                               Split::kTest, Task::kT2V));
  };
  const auto full = multi_seed_report(run, {0, 1, 2});
  for (const char* k : {"r1", "r5", "r10", "mdr", "geomean"}) CHECK(full.count(k) == 1);
}
