// src/gradcheck.cc

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

#include "teachtext/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "teachtext/encoder.h"
#include "teachtext/error.h"
#include "teachtext/losses.h"
#include "teachtext/numerics.h"
#include "teachtext/rng.h"
#include "teachtext/trainer.h"

namespace teachtext {

namespace {

constexpr std::size_t kMaxAttempts = 200;

class Recorder {
 public:
  void add(const std::string& name, double rel) {
    GradCheckEntry& e = entries_[name];
    e.name = name;
    e.max_rel_error = std::max(e.max_rel_error, rel);
    ++e.checks;
  }

  GradCheckReport report() const {
    GradCheckReport r;
    for (const auto& [name, e] : entries_) {
      r.entries.push_back(e);
      r.max_rel_error = std::max(r.max_rel_error, e.max_rel_error);
    }
    return r;
  }

 private:
  std::map<std::string, GradCheckEntry> entries_;
};

Matrix uniform_matrix(std::size_t r, std::size_t c, double lo, double hi, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

Matrix normal_matrix(std::size_t r, std::size_t c, double scale, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

std::vector<double> flatten(const DualEncoderParams& p) {
  std::vector<double> out;
  for (const Matrix* b : p.blocks()) out.insert(out.end(), b->values().begin(), b->values().end());
  return out;
}

void unflatten(std::span<const double> x, DualEncoderParams& p) {
  std::size_t pos = 0;
  for (Matrix* b : p.blocks()) {
    std::copy(x.begin() + pos, x.begin() + pos + b->size(), b->values().begin());
    pos += b->size();
  }
}

double hinge_kink(const Matrix& s, double margin) {
  double best = INFINITY;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (i == j) continue;
      best = std::min(best, std::abs(s(i, j) - s(i, i) + margin));
      best = std::min(best, std::abs(s(j, i) - s(i, i) + margin));
    }
  return best;
}

double elementwise_kink(const Matrix& s, const Matrix& t, DistillLoss loss) {
  double best = INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double diff = std::abs(s.values()[i] - t.values()[i]);
    if (loss == DistillLoss::kHuber) best = std::min(best, std::abs(diff - 1.0));
    if (loss == DistillLoss::kL1) best = std::min(best, diff);
  }
  return best;
}

double normalized_kink(const Matrix& s, const Matrix& t, bool off_diagonal) {
  auto mean_of = [&](const Matrix& m) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (off_diagonal && i == j) continue;
        total += m(i, j);
        ++n;
      }
    return total / static_cast<double>(n);
  };
  const double ms = mean_of(s);
  const double mt = mean_of(t);
  double best = INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double diff = std::abs(s.values()[i] / ms - t.values()[i] / mt);
    best = std::min(best, std::abs(diff - 1.0));
  }
  return best;
}

double relational_kink(const Matrix& sv, const Matrix& st, const Matrix& tv, const Matrix& tt) {
  return std::min(normalized_kink(pairwise_distances(sv), pairwise_distances(tv), true),
                  normalized_kink(pairwise_distances(st), pairwise_distances(tt), true));
}

// FD over the entries of `m` for a scalar function of m.
std::vector<double> fd_over_matrix(const Matrix& m,
                                   const std::function<double(const Matrix&)>& f) {
  return finite_diff_grad(
      [&](std::span<const double> x) {
        return f(Matrix(m.rows(), m.cols(), std::vector<double>(x.begin(), x.end())));
      },
      m.values(), kSuiteStep);
}

// Retries `attempt` until it reports a kink-free instance.
template <typename Attempt>
void with_resampling(Rng& rng, std::size_t& resampled, Attempt attempt) {
  for (std::size_t a = 0; a < kMaxAttempts; ++a) {
    if (attempt(rng)) return;
    ++resampled;
  }
  throw NumericalError("gradient suite: could not draw a kink-free instance");
}

DualEncoderParams random_params(const EncoderShape& shape, Rng& rng) {
  DualEncoderParams p = init_params(shape, rng.next_u64());
  for (Matrix* b : p.blocks())
    for (double& v : b->values()) v = 0.7 * rng.normal();
  return p;
}

EncoderShape random_shape(Rng& rng, std::size_t num_k, std::size_t shared_dim) {
  EncoderShape s;
  for (std::size_t k = 0; k < num_k; ++k) {
    s.modalities.push_back({"m" + std::to_string(k), pick(rng, 1, 8)});
  }
  s.text_dim = pick(rng, 1, 8);
  s.shared_dim = shared_dim;
  s.text_encoder_id = "te";
  return s;
}

VideoFeatures random_videos(const EncoderShape& s, std::size_t n, Rng& rng) {
  VideoFeatures v;
  for (const auto& m : s.modalities) v.push_back(normal_matrix(n, m.dim, 1.0, rng));
  return v;
}

void record_blocks(Recorder& rec, const std::string& prefix, const DualEncoderParams& p,
                   std::span<const double> analytic, std::span<const double> numeric) {
  std::size_t pos = 0;
  const auto names = p.block_names();
  const auto blocks = p.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::size_t n = blocks[b]->size();
    std::string name = names[b].substr(0, names[b].find('['));
    rec.add(prefix + name, relative_error(analytic.subspan(pos, n), numeric.subspan(pos, n)));
    pos += n;
  }
}

void check_matrix_losses(Recorder& rec, Rng& rng, std::size_t& resampled, GradFault fault) {
  const std::size_t b = pick(rng, 2, 5);
  const double margin = kDefaultMargin;

  with_resampling(rng, resampled, [&](Rng& r) {
    const Matrix s = uniform_matrix(b, b, -1.0, 1.0, r);
    if (hinge_kink(s, margin) < kKinkMargin) return false;
    Matrix analytic = ranking_loss(s, margin).grad;
    if (fault == GradFault::kScaleRankingGrad) analytic *= 1.01;
    const auto numeric = fd_over_matrix(s, [&](const Matrix& x) { return ranking_loss(x, margin).value; });
    rec.add("loss/ranking", relative_error(analytic.values(), numeric));
    return true;
  });

  for (auto [loss, name] : {std::pair{DistillLoss::kHuber, "loss/distill_huber"},
                            std::pair{DistillLoss::kL1, "loss/distill_l1"},
                            std::pair{DistillLoss::kL2, "loss/distill_l2"}}) {
    with_resampling(rng, resampled, [&, loss = loss, name = name](Rng& r) {
      const Matrix s = uniform_matrix(b, b, -1.0, 1.0, r);
      const Matrix phi = uniform_matrix(b, b, -1.0, 1.0, r);
      if (elementwise_kink(s, phi, loss) < kKinkMargin) return false;
      const auto numeric =
          fd_over_matrix(s, [&](const Matrix& x) { return distill_loss(x, phi, loss).value; });
      rec.add(name, relative_error(distill_loss(s, phi, loss).grad.values(), numeric));
      return true;
    });
  }

  with_resampling(rng, resampled, [&](Rng& r) {
    const Matrix s = uniform_matrix(b, b, -1.0, 1.0, r);
    const Matrix phi = uniform_matrix(b, b, -1.0, 1.0, r);
    const std::size_t k = pick(r, 1, b);
    if (elementwise_kink(s, phi, DistillLoss::kHuber) < kKinkMargin) return false;
    const auto numeric =
        fd_over_matrix(s, [&](const Matrix& x) { return rank_k_distill_loss(x, phi, k).value; });
    rec.add("loss/rank_k", relative_error(rank_k_distill_loss(s, phi, k).grad.values(), numeric));
    return true;
  });

  with_resampling(rng, resampled, [&](Rng& r) {
    const Matrix ds = uniform_matrix(b, b, 0.1, 2.0, r);
    const Matrix dt = uniform_matrix(b, b, 0.1, 2.0, r);
    if (normalized_kink(ds, dt, false) < kKinkMargin) return false;
    const auto numeric = fd_over_matrix(ds, [&](const Matrix& x) { return pdist_loss(x, dt).value; });
    rec.add("loss/pdist", relative_error(pdist_loss(ds, dt).grad.values(), numeric));
    return true;
  });

  with_resampling(rng, resampled, [&](Rng& r) {
    const Matrix s = uniform_matrix(b, b, -0.9, 0.9, r);
    const Matrix g = normal_matrix(b, b, 1.0, r);
    auto f = [&](const Matrix& x) {
      const Matrix d = cross_modal_distances(x);
      return dot(d.values(), g.values());
    };
    rec.add("loss/cross_modal_distances",
            relative_error(cross_modal_distances_backward(s, g).values(), fd_over_matrix(s, f)));
    return true;
  });

  with_resampling(rng, resampled, [&](Rng& r) {
    const std::size_t w = pick(r, 2, 8);
    const Matrix sv = normal_matrix(b, w, 1.0, r);
    const Matrix st = normal_matrix(b, w, 1.0, r);
    const Matrix tv = normal_matrix(b, w, 1.0, r);
    const Matrix tt = normal_matrix(b, w, 1.0, r);
    if (relational_kink(sv, st, tv, tt) < kKinkMargin) return false;
    const EmbeddingLossAndGrad l = relational_intra_loss(sv, st, tv, tt);
    const auto nv = fd_over_matrix(sv, [&](const Matrix& x) { return relational_intra_loss(x, st, tv, tt).value; });
    const auto nt = fd_over_matrix(st, [&](const Matrix& x) { return relational_intra_loss(sv, x, tv, tt).value; });
    rec.add("loss/relational", relative_error(l.grad_video.values(), nv));
    rec.add("loss/relational", relative_error(l.grad_text.values(), nt));
    return true;
  });

  with_resampling(rng, resampled, [&](Rng& r) {
    const std::size_t w = pick(r, 2, 8);
    const Matrix sv = normal_matrix(b, w, 1.0, r);
    const Matrix st = normal_matrix(b, w, 1.0, r);
    const Matrix tv = normal_matrix(b, w, 1.0, r);
    const Matrix tt = normal_matrix(b, w, 1.0, r);
    const EmbeddingLossAndGrad l = embed_regress_loss(sv, st, tv, tt);
    const auto nv = fd_over_matrix(sv, [&](const Matrix& x) { return embed_regress_loss(x, st, tv, tt).value; });
    const auto nt = fd_over_matrix(st, [&](const Matrix& x) { return embed_regress_loss(sv, x, tv, tt).value; });
    rec.add("loss/embed_regress", relative_error(l.grad_video.values(), nv));
    rec.add("loss/embed_regress", relative_error(l.grad_text.values(), nt));
    return true;
  });

  with_resampling(rng, resampled, [&](Rng& r) {
    const Matrix s = uniform_matrix(b, b, -1.0, 1.0, r);
    const Matrix phi = uniform_matrix(b, b, -1.0, 1.0, r);
    const double weight = r.uniform(0.5, 2.0);
    if (hinge_kink(s, margin) < kKinkMargin ||
        elementwise_kink(s, phi, DistillLoss::kHuber) < kKinkMargin) {
      return false;
    }
    const auto numeric = fd_over_matrix(
        s, [&](const Matrix& x) { return composite_loss(x, phi, margin, weight).value; });
    rec.add("loss/composite",
            relative_error(composite_loss(s, phi, margin, weight).grad.values(), numeric));
    return true;
  });
}

void check_encoder(Recorder& rec, Rng& rng) {
  const std::size_t b = pick(rng, 1, 5);
  const EncoderShape shape = random_shape(rng, pick(rng, 1, 3), pick(rng, 2, 8));
  const DualEncoderParams p = random_params(shape, rng);
  const VideoFeatures videos = random_videos(shape, b, rng);
  const Matrix texts = normal_matrix(pick(rng, 1, 5), shape.text_dim, 1.0, rng);
  const Matrix upstream = normal_matrix(b, texts.rows(), 1.0, rng);
  const std::vector<double> x0 = flatten(p);

  // Similarity route: f = <G, S(params)>.
  {
    const DualEncoderParams g = grad_wrt_params(p, videos, texts, upstream);
    DualEncoderParams scratch = p;
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          unflatten(x, scratch);
          return dot(batch_similarity_matrix(scratch, videos, texts).values(), upstream.values());
        },
        x0, kSuiteStep);
    record_blocks(rec, "encoder/similarity/", p, flatten(g), numeric);
  }

  // Joint-embedding route: f = <Gv, Ev> + <Gt, Et>.
  {
    const Matrix gv = normal_matrix(b, shape.modalities.size() * shape.shared_dim, 1.0, rng);
    const Matrix gt = normal_matrix(texts.rows(), gv.cols(), 1.0, rng);
    const VideoEncoding venc = encode_videos(p, videos);
    const TextEncoding tenc = encode_texts(p, texts);
    EncodingGrads eg = EncodingGrads::zeros(venc, tenc);
    joint_embedding_backward(venc, tenc, &gv, &gt, eg);
    const DualEncoderParams g = encoder_backward(p, videos, texts, venc, tenc, eg);
    DualEncoderParams scratch = p;
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          unflatten(x, scratch);
          const Matrix ev = video_joint_embedding(encode_videos(scratch, videos));
          const Matrix et = text_joint_embedding(encode_texts(scratch, texts));
          return dot(ev.values(), gv.values()) + dot(et.values(), gt.values());
        },
        x0, kSuiteStep);
    record_blocks(rec, "encoder/joint/", p, flatten(g), numeric);
  }
}

void check_objectives(Recorder& rec, Rng& rng, std::size_t& resampled) {
  for (DistillVariant variant :
       {DistillVariant::kNone, DistillVariant::kHuber, DistillVariant::kL1, DistillVariant::kL2,
        DistillVariant::kRankK, DistillVariant::kPdist, DistillVariant::kRelational,
        DistillVariant::kEmbedRegress}) {
    with_resampling(rng, resampled, [&](Rng& r) {
      const std::size_t b = pick(r, 2, 5);
      const std::size_t num_k = pick(r, 1, 3);
      const std::size_t d = pick(r, 2, 8);
      const EncoderShape shape = random_shape(r, num_k, d);
      const DualEncoderParams student = random_params(shape, r);
      TrainConfig cfg;
      cfg.distill_variant = variant;
      cfg.distill_weight = r.uniform(0.5, 2.0);
      cfg.rank_k = pick(r, 1, b);
      cfg.aggregation = Aggregation::kMean;
      const BatchInputs inputs{random_videos(shape, b, r), normal_matrix(b, shape.text_dim, 1.0, r)};

      // Two random teachers with their own text inputs; same joint width.
      DistillTargets targets;
      std::vector<Matrix> mats;
      for (int t = 0; t < 2; ++t) {
        EncoderShape ts = shape;
        ts.text_dim = pick(r, 1, 8);
        const DualEncoderParams teacher = random_params(ts, r);
        const Matrix ttexts = normal_matrix(b, ts.text_dim, 1.0, r);
        const VideoEncoding venc = encode_videos(teacher, inputs.videos);
        const TextEncoding tenc = encode_texts(teacher, ttexts);
        const Matrix s = similarity_matrix(venc, tenc);
        mats.push_back(variant == DistillVariant::kPdist ? cross_modal_distances(s) : s);
        targets.teacher_video.push_back(video_joint_embedding(venc));
        targets.teacher_text.push_back(text_joint_embedding(tenc));
      }
      targets.phi = aggregate(mats, cfg.aggregation);

      const VideoEncoding venc = encode_videos(student, inputs.videos);
      const TextEncoding tenc = encode_texts(student, inputs.texts);
      const Matrix s = similarity_matrix(venc, tenc);
      double kink = hinge_kink(s, cfg.margin);
      switch (variant) {
        case DistillVariant::kHuber:
        case DistillVariant::kRankK:
          kink = std::min(kink, elementwise_kink(s, targets.phi, DistillLoss::kHuber));
          break;
        case DistillVariant::kL1:
          kink = std::min(kink, elementwise_kink(s, targets.phi, DistillLoss::kL1));
          break;
        case DistillVariant::kPdist:
          kink = std::min(kink, normalized_kink(cross_modal_distances(s), targets.phi, false));
          kink = std::min(kink, 1.0 - *std::max_element(s.values().begin(), s.values().end()));
          break;
        case DistillVariant::kRelational:
          for (std::size_t t = 0; t < targets.teacher_video.size(); ++t) {
            kink = std::min(kink, relational_kink(video_joint_embedding(venc),
                                                  text_joint_embedding(tenc),
                                                  targets.teacher_video[t],
                                                  targets.teacher_text[t]));
          }
          break;
        default:
          break;
      }
      if (kink < kKinkMargin) return false;

      DualEncoderParams g;
      student_objective(student, inputs, &targets, cfg, &g);
      DualEncoderParams scratch = student;
      const auto numeric = finite_diff_grad(
          [&](std::span<const double> x) {
            unflatten(x, scratch);
            return student_objective(scratch, inputs, &targets, cfg, nullptr).total;
          },
          flatten(student), kSuiteStep);
      rec.add("objective/" + std::string(distill_variant_name(variant)),
              relative_error(flatten(g), numeric));
      return true;
    });
  }
}

}  // namespace

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("relative_error: length mismatch");
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

GradCheckReport run_gradient_suite(std::uint64_t seed, std::size_t trials, GradFault fault) {
  if (trials == 0) throw ConfigError("gradient suite needs at least one trial");
  Recorder rec;
  std::size_t resampled = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, t));
    check_matrix_losses(rec, rng, resampled, fault);
    check_encoder(rec, rng);
    check_objectives(rec, rng, resampled);
  }
  GradCheckReport report = rec.report();
  report.trials = trials;
  report.resampled = resampled;
  return report;
}

}  // namespace teachtext
