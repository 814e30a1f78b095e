// tests/test_metrics.cc

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
#include "oracles.h"
#include "teachtext/error.h"
#include "teachtext/metrics.h"
#include "teachtext/rng.h"

using namespace teachtext;

namespace {

SynthCorpus small_corpus(std::uint64_t seed, std::size_t videos, std::size_t cpv) {
  SynthOptions o;
  o.seed = seed;
  o.n_videos = videos;
  o.captions_per_video = cpv;
  o.n_modalities = 2;
  o.n_text_encoders = 1;
  o.latent_dim = 4;
  o.modality_dim = 5;
  o.text_dim = 6;
  o.val_fraction = 0.0;
  o.test_fraction = 0.5;
  return synth_corpus(o);
}

DualEncoderParams model_for(const FeatureStore& store, std::uint64_t seed) {
  EncoderShape s;
  s.modalities = store.modality_specs();
  s.text_dim = store.text_dim("te0");
  s.shared_dim = 4;
  s.text_encoder_id = "te0";
  return init_params(s, seed);
}

}  // namespace

TEST_CASE("rank_of_truth examples") {
  CHECK(rank_of_truth(std::vector<double>{0.9, 0.1}, 0) == 1);
  CHECK(rank_of_truth(std::vector<double>{0.5, 0.5, 0.5, 0.5}, 2) == 3);
  CHECK_THROWS_AS(rank_of_truth(std::vector<double>{0.5}, 1), DimensionError);
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(10);
    for (double& v : s) v = std::round(rng.uniform(0, 5));  // plenty of ties
    const std::size_t truth = rng.below(10);
    CHECK(rank_of_truth(s, truth) == oracle::sorted_rank(s, truth));
  }
}

TEST_CASE("geometric mean") {
  CHECK(geometric_mean(100, 100, 100) == doctest::Approx(100.0));
  CHECK(geometric_mean(0, 50, 80) == 0.0);
  CHECK(std::abs(geometric_mean(11.1, 30.7, 42.9) - 24.4) <= 0.1);
  CHECK_THROWS_AS(geometric_mean(-1, 2, 3), ConfigError);
}

TEST_CASE("metrics from ranks") {
  const MetricsReport r = metrics_from_ranks(Task::kT2V, {1, 1, 1, 1});
  CHECK(r.r1 == 100.0);
  CHECK(r.median_rank == 1.0);
  CHECK(r.geomean == doctest::Approx(100.0));

  const MetricsReport even = metrics_from_ranks(Task::kT2V, {7, 2, 4, 9});
  CHECK(even.median_rank == 4.0);
  CHECK(even.r5 == 50.0);
  CHECK(even.r10 == 100.0);
  CHECK(even.recall_at(10) == 100.0);
  CHECK_THROWS_AS(even.recall_at(3), ConfigError);
  CHECK_THROWS_AS(metrics_from_ranks(Task::kT2V, {}), DataError);
}

TEST_CASE("identity-like scores give perfect metrics for both tasks") {
  Matrix s(3, 6, 0.0);
  const std::vector<std::size_t> cv{0, 0, 1, 1, 2, 2};
  for (std::size_t j = 0; j < 6; ++j) s(cv[j], j) = 1.0;
  for (Task t : {Task::kT2V, Task::kV2T}) {
    const MetricsReport r = metrics_from_scores(s, cv, t);
    CHECK(r.r1 == 100.0);
    CHECK(r.median_rank == 1.0);
    CHECK(r.geomean == doctest::Approx(100.0));
  }
  CHECK(metrics_from_scores(s, cv, Task::kV2T).num_queries == 3);
  CHECK(metrics_from_scores(s, cv, Task::kT2V).num_queries == 6);
}

TEST_CASE("v2t keeps the best caption rank per video") {
  // Video 0 has captions 0 and 1; caption 1 is its top match, caption 0 is third.
  const Matrix s = Matrix::from_rows({{0.1, 0.9, 0.5}, {0.2, 0.3, 0.8}});
  const std::vector<std::size_t> cv{0, 0, 1};
  const MetricsReport r = metrics_from_scores(s, cv, Task::kV2T);
  CHECK(r.r1 == 100.0);
}

TEST_CASE("evaluate matches the brute-force evaluator") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const SynthCorpus c = small_corpus(seed, 5 + rng.below(16), 1 + rng.below(3));
    const DualEncoderParams m = model_for(c.store, seed);
    for (Task t : {Task::kT2V, Task::kV2T}) {
      CHECK(evaluate(m, c.store, Split::kTest, t) ==
            oracle::brute_force_evaluate(m, c.store, Split::kTest, t));
    }
  }
}

TEST_CASE("metrics depend only on score order") {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t nv = 2 + rng.below(10), nc = nv + rng.below(10);
    Matrix s(nv, nc);
    for (double& v : s.values()) v = rng.uniform(-1, 1);
    std::vector<std::size_t> cv(nc);
    for (std::size_t j = 0; j < nc; ++j) cv[j] = j < nv ? j : rng.below(nv);
    Matrix tr = s;
    for (double& v : tr.values()) v = std::exp(3.0 * v) + 7.0;
    for (Task task : {Task::kT2V, Task::kV2T}) {
      const MetricsReport a = metrics_from_scores(s, cv, task);
      CHECK(a == metrics_from_scores(tr, cv, task));
      CHECK(a.r1 <= a.r5);
      CHECK(a.r5 <= a.r10);
      CHECK(a.r10 <= a.r50);
      CHECK(a.geomean <= std::max({a.r1, a.r5, a.r10}) + 1e-9);
      CHECK(a.geomean >= std::min({a.r1, a.r5, a.r10}) - 1e-9);
      if (a.r1 == 100.0) CHECK(a.median_rank == 1.0);
    }
  }
}

TEST_CASE("metrics are invariant to candidate order") {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const std::size_t nv = 2 + rng.below(8), nc = nv + rng.below(8);
    Matrix s(nv, nc);
    for (double& v : s.values()) v = std::round(rng.uniform(0, 4));  // ties are frequent
    for (std::size_t j = 0; j < nc; ++j) s(j % nv, j) += 0.5;
    std::vector<std::size_t> cv(nc);
    for (std::size_t j = 0; j < nc; ++j) cv[j] = j % nv;
    // Break ties first; with ties the index rule legitimately reorders.
    Matrix strict = s;
    for (std::size_t i = 0; i < strict.size(); ++i) strict.values()[i] += 1e-6 * static_cast<double>(i % 997);
    std::vector<std::size_t> perm(nv);
    for (std::size_t i = 0; i < nv; ++i) perm[i] = nv - 1 - i;
    Matrix ps(nv, nc);
    std::vector<std::size_t> pcv(nc);
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t j = 0; j < nc; ++j) ps(perm[i], j) = strict(i, j);
    for (std::size_t j = 0; j < nc; ++j) pcv[j] = perm[cv[j]];
    for (Task task : {Task::kT2V, Task::kV2T}) {
      CHECK(metrics_from_scores(strict, cv, task) == metrics_from_scores(ps, pcv, task));
    }
  }
}

TEST_CASE("report JSON keys and error paths") {
  const nlohmann::json j = to_json(metrics_from_ranks(Task::kV2T, {1, 3}));
  for (const char* k : {"task", "r1", "r5", "r10", "r50", "mdr", "geomean"}) CHECK(j.contains(k));
  CHECK(j["task"] == "v2t");
  CHECK_THROWS_AS(parse_task("x2y"), ConfigError);
  const SynthCorpus c = small_corpus(1, 5, 2);
  CHECK_THROWS_AS(evaluate(model_for(c.store, 1), c.store, Split::kVal, Task::kT2V), DataError);
}
