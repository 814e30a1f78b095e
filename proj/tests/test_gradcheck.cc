// tests/test_gradcheck.cc

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

#include <set>

#include "doctest.h"
#include "teachtext/error.h"
#include "teachtext/gradcheck.h"

using namespace teachtext;

TEST_CASE("relative error") {
  CHECK(relative_error(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == 0.0);
  CHECK(relative_error(std::vector<double>{0, 0}, std::vector<double>{0, 0}) == 0.0);
  CHECK(relative_error(std::vector<double>{2, 0}, std::vector<double>{1, 0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(relative_error(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("gradient suite passes and covers every loss and block") {
  const GradCheckReport r = run_gradient_suite(0, 20);
  CHECK(r.passed());
  CHECK(r.trials == 20);
  std::set<std::string> names;
  for (const auto& e : r.entries) {
    names.insert(e.name);
    CHECK(e.checks >= 20);
  }
  for (const char* n : {"loss/ranking", "loss/distill_huber", "loss/distill_l1", "loss/distill_l2",
                        "loss/rank_k", "loss/pdist", "loss/relational", "loss/embed_regress",
                        "loss/composite", "encoder/similarity/video_weight",
                        "encoder/similarity/video_bias", "encoder/similarity/text_weight",
                        "encoder/similarity/text_bias", "encoder/similarity/mix_weight",
                        "encoder/similarity/mix_bias", "encoder/joint/text_weight",
                        "objective/pdist", "objective/relational", "objective/embed_regress"}) {
    CHECK_MESSAGE(names.count(n) == 1, n);
  }
}

TEST_CASE("gradient suite catches an injected fault") {
  const GradCheckReport r = run_gradient_suite(0, 3, GradFault::kScaleRankingGrad);
  CHECK_FALSE(r.passed());
}

TEST_CASE("gradient suite rejects zero trials") {
  CHECK_THROWS_AS(run_gradient_suite(0, 0), ConfigError);
}
