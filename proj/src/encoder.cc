// src/encoder.cc

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

#include "teachtext/encoder.h"

#include <cmath>
#include <set>

#include "teachtext/binary_io.h"
#include "teachtext/error.h"
#include "teachtext/rng.h"

namespace teachtext {

namespace {

constexpr std::uint16_t kModelVersion = 1;

// z = x W^T + b for every row of x.
Matrix affine_rows(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  Matrix z = matmul_transposed(x, weight);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] += bias(0, c);
  }
  return z;
}

// Normalises rows of z in place and returns the pre-normalisation norms.
std::vector<double> normalize_in_place(Matrix& z) {
  std::vector<double> norms(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    norms[i] = std::sqrt(dot(r, r));
    const double denom = std::max(norms[i], kNormEps);
    for (double& v : r) v /= denom;
  }
  return norms;
}

// dL/dz for v = z / max(||z||, eps): (I - v v^T) dv / ||z|| above eps, dv / eps below.
Matrix normalize_backward(const Matrix& unit, const std::vector<double>& norms,
                          const Matrix& d_unit) {
  Matrix dz(unit.rows(), unit.cols());
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    auto v = unit.row(i);
    auto dv = d_unit.row(i);
    auto out = dz.row(i);
    if (norms[i] >= kNormEps) {
      const double proj = dot(v, dv);
      for (std::size_t c = 0; c < v.size(); ++c) out[c] = (dv[c] - proj * v[c]) / norms[i];
    } else {
      for (std::size_t c = 0; c < v.size(); ++c) out[c] = dv[c] / kNormEps;
    }
  }
  return dz;
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) out(0, c) += r[c];
  }
  return out;
}

// dL/dW for z = x W^T: dz^T x.
Matrix weight_grad(const Matrix& dz, const Matrix& x) {
  Matrix g(dz.cols(), x.cols());
  for (std::size_t i = 0; i < dz.rows(); ++i) {
    auto dzr = dz.row(i);
    auto xr = x.row(i);
    for (std::size_t a = 0; a < dzr.size(); ++a) {
      const double s = dzr[a];
      if (s == 0.0) continue;
      auto gr = g.row(a);
      for (std::size_t b = 0; b < xr.size(); ++b) gr[b] += s * xr[b];
    }
  }
  return g;
}

void fill_uniform(Matrix& m, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& v : m.values()) v = static_cast<double>(static_cast<float>(rng.uniform(-a, a)));
}

void check_video_inputs(const DualEncoderParams& p, const VideoFeatures& features) {
  if (features.size() != p.num_modalities()) {
    throw DimensionError("expected features for " + std::to_string(p.num_modalities()) +
                         " modalities, got " + std::to_string(features.size()));
  }
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].cols() != p.modalities[k].dim) {
      throw DimensionError("modality '" + p.modalities[k].id + "' expects dim " +
                           std::to_string(p.modalities[k].dim) + ", got " +
                           std::to_string(features[k].cols()));
    }
    if (features[k].rows() != features[0].rows()) {
      throw DimensionError("modalities disagree on the number of videos");
    }
  }
}

}  // namespace

EncoderShape DualEncoderParams::shape() const {
  return {modalities, text_dim, shared_dim, text_encoder_id};
}

std::vector<Matrix*> DualEncoderParams::blocks() {
  std::vector<Matrix*> out;
  for (std::size_t k = 0; k < modalities.size(); ++k) {
    out.push_back(&video_weight[k]);
    out.push_back(&video_bias[k]);
  }
  for (std::size_t k = 0; k < modalities.size(); ++k) {
    out.push_back(&text_weight[k]);
    out.push_back(&text_bias[k]);
  }
  out.push_back(&mix_weight);
  out.push_back(&mix_bias);
  return out;
}

std::vector<const Matrix*> DualEncoderParams::blocks() const {
  auto mutable_blocks = const_cast<DualEncoderParams*>(this)->blocks();
  return {mutable_blocks.begin(), mutable_blocks.end()};
}

std::vector<std::string> DualEncoderParams::block_names() const {
  std::vector<std::string> names;
  for (const auto& m : modalities) {
    names.push_back("video_weight[" + m.id + "]");
    names.push_back("video_bias[" + m.id + "]");
  }
  for (const auto& m : modalities) {
    names.push_back("text_weight[" + m.id + "]");
    names.push_back("text_bias[" + m.id + "]");
  }
  names.push_back("mix_weight");
  names.push_back("mix_bias");
  return names;
}

std::size_t DualEncoderParams::num_parameters() const {
  std::size_t n = 0;
  for (const Matrix* b : blocks()) n += b->size();
  return n;
}

DualEncoderParams DualEncoderParams::zeros_like() const {
  DualEncoderParams z = *this;
  for (Matrix* b : z.blocks()) b->fill(0.0);
  return z;
}

void DualEncoderParams::validate() const {
  const std::size_t k = modalities.size();
  if (k == 0) throw DimensionError("model has no modalities");
  if (shared_dim == 0 || text_dim == 0) throw DimensionError("model has a zero dimension");
  std::set<std::string> ids;
  for (const auto& m : modalities) {
    if (m.dim == 0) throw DimensionError("modality '" + m.id + "' has dim 0");
    if (!ids.insert(m.id).second) throw DimensionError("duplicate modality id '" + m.id + "'");
  }
  if (video_weight.size() != k || video_bias.size() != k || text_weight.size() != k ||
      text_bias.size() != k) {
    throw DimensionError("parameter block count does not match modality count");
  }
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* what) {
    if (m.rows() != r || m.cols() != c) {
      throw DimensionError(std::string("block ") + what + " has shape " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  for (std::size_t i = 0; i < k; ++i) {
    expect(video_weight[i], shared_dim, modalities[i].dim, "video_weight");
    expect(video_bias[i], 1, shared_dim, "video_bias");
    expect(text_weight[i], shared_dim, text_dim, "text_weight");
    expect(text_bias[i], 1, shared_dim, "text_bias");
  }
  expect(mix_weight, k, text_dim, "mix_weight");
  expect(mix_bias, 1, k, "mix_bias");
  for (const Matrix* b : blocks()) check_finite(*b, "model parameters");
}

DualEncoderParams init_params(const EncoderShape& shape, std::uint64_t seed) {
  if (shape.modalities.empty() || shape.text_dim == 0 || shape.shared_dim == 0) {
    throw DimensionError("init_params: zero dimension");
  }
  DualEncoderParams p;
  p.text_encoder_id = shape.text_encoder_id;
  p.modalities = shape.modalities;
  p.text_dim = shape.text_dim;
  p.shared_dim = shape.shared_dim;
  const std::size_t d = shape.shared_dim;
  for (const auto& m : shape.modalities) {
    if (m.dim == 0) throw DimensionError("init_params: modality '" + m.id + "' has dim 0");
    p.video_weight.emplace_back(d, m.dim);
    p.video_bias.emplace_back(1, d);
    p.text_weight.emplace_back(d, shape.text_dim);
    p.text_bias.emplace_back(1, d);
  }
  p.mix_weight = Matrix(shape.modalities.size(), shape.text_dim);
  p.mix_bias = Matrix(1, shape.modalities.size());
  p.validate();

  Rng rng(seed);
  for (std::size_t k = 0; k < p.num_modalities(); ++k) fill_uniform(p.video_weight[k], rng);
  for (std::size_t k = 0; k < p.num_modalities(); ++k) fill_uniform(p.text_weight[k], rng);
  fill_uniform(p.mix_weight, rng);
  return p;
}

VideoEncoding encode_videos(const DualEncoderParams& p, const VideoFeatures& features) {
  check_video_inputs(p, features);
  VideoEncoding enc;
  for (std::size_t k = 0; k < p.num_modalities(); ++k) {
    Matrix z = affine_rows(features[k], p.video_weight[k], p.video_bias[k]);
    enc.norms.push_back(normalize_in_place(z));
    enc.unit.push_back(std::move(z));
  }
  return enc;
}

TextEncoding encode_texts(const DualEncoderParams& p, const Matrix& texts) {
  if (texts.cols() != p.text_dim) {
    throw DimensionError("text embedding dim " + std::to_string(texts.cols()) +
                         " != model text dim " + std::to_string(p.text_dim));
  }
  TextEncoding enc;
  for (std::size_t k = 0; k < p.num_modalities(); ++k) {
    Matrix z = affine_rows(texts, p.text_weight[k], p.text_bias[k]);
    enc.norms.push_back(normalize_in_place(z));
    enc.unit.push_back(std::move(z));
  }
  Matrix logits = affine_rows(texts, p.mix_weight, p.mix_bias);
  enc.weights = Matrix(texts.rows(), p.num_modalities());
  for (std::size_t j = 0; j < texts.rows(); ++j) {
    const auto w = softmax(logits.row(j));
    std::copy(w.begin(), w.end(), enc.weights.row(j).begin());
  }
  return enc;
}

Matrix similarity_matrix(const VideoEncoding& videos, const TextEncoding& texts) {
  const std::size_t num_k = videos.unit.size();
  if (num_k == 0 || texts.unit.size() != num_k) {
    throw DimensionError("similarity_matrix: modality count mismatch");
  }
  const std::size_t nv = videos.unit[0].rows();
  const std::size_t nt = texts.unit[0].rows();
  Matrix s(nv, nt);
  for (std::size_t k = 0; k < num_k; ++k) {
    const Matrix cos = matmul_transposed(videos.unit[k], texts.unit[k]);
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t j = 0; j < nt; ++j) s(i, j) += texts.weights(j, k) * cos(i, j);
  }
  check_finite(s, "similarity matrix");
  return s;
}

Matrix batch_similarity_matrix(const DualEncoderParams& p, const VideoFeatures& videos,
                               const Matrix& texts) {
  if (videos.empty() || videos[0].rows() == 0 || texts.rows() == 0) {
    throw DimensionError("batch_similarity_matrix: empty batch");
  }
  return similarity_matrix(encode_videos(p, videos), encode_texts(p, texts));
}

std::vector<std::vector<double>> encode_video(const DualEncoderParams& p,
                                              const std::vector<std::vector<double>>& x) {
  VideoFeatures features;
  for (const auto& v : x) features.emplace_back(1, v.size(), v);
  const VideoEncoding enc = encode_videos(p, features);
  std::vector<std::vector<double>> out;
  for (const Matrix& u : enc.unit) out.emplace_back(u.values().begin(), u.values().end());
  return out;
}

EncodedText encode_text(const DualEncoderParams& p, std::span<const double> t) {
  const Matrix texts(1, t.size(), std::vector<double>(t.begin(), t.end()));
  const TextEncoding enc = encode_texts(p, texts);
  EncodedText out;
  for (const Matrix& u : enc.unit) out.queries.emplace_back(u.values().begin(), u.values().end());
  out.weights.assign(enc.weights.values().begin(), enc.weights.values().end());
  return out;
}

double similarity(const DualEncoderParams& p, const std::vector<std::vector<double>>& x,
                  std::span<const double> t) {
  VideoFeatures features;
  for (const auto& v : x) features.emplace_back(1, v.size(), v);
  const Matrix texts(1, t.size(), std::vector<double>(t.begin(), t.end()));
  return batch_similarity_matrix(p, features, texts)(0, 0);
}

EncodingGrads EncodingGrads::zeros(const VideoEncoding& videos, const TextEncoding& texts) {
  EncodingGrads g;
  for (const Matrix& u : videos.unit) g.video_unit.emplace_back(u.rows(), u.cols());
  for (const Matrix& u : texts.unit) g.text_unit.emplace_back(u.rows(), u.cols());
  g.text_weights = Matrix(texts.weights.rows(), texts.weights.cols());
  return g;
}

void similarity_backward(const VideoEncoding& videos, const TextEncoding& texts,
                         const Matrix& upstream, EncodingGrads& grads) {
  const std::size_t nv = videos.unit[0].rows();
  const std::size_t nt = texts.unit[0].rows();
  if (upstream.rows() != nv || upstream.cols() != nt) {
    throw DimensionError("similarity_backward: upstream shape mismatch");
  }
  for (std::size_t k = 0; k < videos.unit.size(); ++k) {
    const Matrix& v = videos.unit[k];
    const Matrix& q = texts.unit[k];
    Matrix& dv = grads.video_unit[k];
    Matrix& dq = grads.text_unit[k];
    for (std::size_t i = 0; i < nv; ++i) {
      auto vi = v.row(i);
      auto dvi = dv.row(i);
      for (std::size_t j = 0; j < nt; ++j) {
        const double up = upstream(i, j);
        if (up == 0.0) continue;
        auto qj = q.row(j);
        const double w = texts.weights(j, k);
        grads.text_weights(j, k) += up * dot(vi, qj);
        const double coef = up * w;
        auto dqj = dq.row(j);
        for (std::size_t c = 0; c < vi.size(); ++c) {
          dvi[c] += coef * qj[c];
          dqj[c] += coef * vi[c];
        }
      }
    }
  }
}

DualEncoderParams encoder_backward(const DualEncoderParams& p, const VideoFeatures& videos,
                                   const Matrix& texts, const VideoEncoding& venc,
                                   const TextEncoding& tenc, const EncodingGrads& grads) {
  DualEncoderParams g = p.zeros_like();
  for (std::size_t k = 0; k < p.num_modalities(); ++k) {
    const Matrix dz_video = normalize_backward(venc.unit[k], venc.norms[k], grads.video_unit[k]);
    g.video_weight[k] = weight_grad(dz_video, videos[k]);
    g.video_bias[k] = column_sums(dz_video);

    const Matrix dz_text = normalize_backward(tenc.unit[k], tenc.norms[k], grads.text_unit[k]);
    g.text_weight[k] = weight_grad(dz_text, texts);
    g.text_bias[k] = column_sums(dz_text);
  }
  // Softmax Jacobian: dlogit = w * (dw - <w, dw>).
  Matrix dlogits(tenc.weights.rows(), tenc.weights.cols());
  for (std::size_t j = 0; j < dlogits.rows(); ++j) {
    auto w = tenc.weights.row(j);
    auto dw = grads.text_weights.row(j);
    const double inner = dot(w, dw);
    for (std::size_t k = 0; k < w.size(); ++k) dlogits(j, k) = w[k] * (dw[k] - inner);
  }
  g.mix_weight = weight_grad(dlogits, texts);
  g.mix_bias = column_sums(dlogits);
  for (const Matrix* b : g.blocks()) check_finite(*b, "parameter gradient");
  return g;
}

DualEncoderParams grad_wrt_params(const DualEncoderParams& p, const VideoFeatures& videos,
                                  const Matrix& texts, const Matrix& upstream) {
  check_finite(upstream, "upstream gradient");
  const VideoEncoding venc = encode_videos(p, videos);
  const TextEncoding tenc = encode_texts(p, texts);
  EncodingGrads grads = EncodingGrads::zeros(venc, tenc);
  similarity_backward(venc, tenc, upstream, grads);
  return encoder_backward(p, videos, texts, venc, tenc, grads);
}

Matrix video_joint_embedding(const VideoEncoding& videos) {
  const std::size_t num_k = videos.unit.size();
  const std::size_t n = videos.unit[0].rows();
  const std::size_t d = videos.unit[0].cols();
  const double scale = std::sqrt(1.0 / static_cast<double>(num_k));
  Matrix e(n, num_k * d);
  for (std::size_t k = 0; k < num_k; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) e(i, k * d + c) = scale * videos.unit[k](i, c);
  return e;
}

Matrix text_joint_embedding(const TextEncoding& texts) {
  const std::size_t num_k = texts.unit.size();
  const std::size_t n = texts.unit[0].rows();
  const std::size_t d = texts.unit[0].cols();
  Matrix e(n, num_k * d);
  for (std::size_t k = 0; k < num_k; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      const double scale = std::sqrt(texts.weights(j, k));
      for (std::size_t c = 0; c < d; ++c) e(j, k * d + c) = scale * texts.unit[k](j, c);
    }
  return e;
}

void joint_embedding_backward(const VideoEncoding& videos, const TextEncoding& texts,
                              const Matrix* d_video, const Matrix* d_text,
                              EncodingGrads& grads) {
  const std::size_t num_k = videos.unit.size();
  const std::size_t d = videos.unit[0].cols();
  if (d_video != nullptr) {
    const double scale = std::sqrt(1.0 / static_cast<double>(num_k));
    for (std::size_t k = 0; k < num_k; ++k)
      for (std::size_t i = 0; i < d_video->rows(); ++i)
        for (std::size_t c = 0; c < d; ++c)
          grads.video_unit[k](i, c) += scale * (*d_video)(i, k * d + c);
  }
  if (d_text != nullptr) {
    for (std::size_t k = 0; k < num_k; ++k)
      for (std::size_t j = 0; j < d_text->rows(); ++j) {
        const double w = texts.weights(j, k);
        const double scale = std::sqrt(w);
        double inner = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double g = (*d_text)(j, k * d + c);
          grads.text_unit[k](j, c) += scale * g;
          inner += g * texts.unit[k](j, c);
        }
        grads.text_weights(j, k) += inner / (2.0 * scale);
      }
  }
}

std::vector<std::uint8_t> serialize_model(const DualEncoderParams& p) {
  p.validate();
  ByteWriter w;
  w.put_magic("TTMD");
  w.put_u16(kModelVersion);
  w.put_string(p.text_encoder_id);
  w.put_u32(static_cast<std::uint32_t>(p.num_modalities()));
  for (const auto& m : p.modalities) {
    w.put_string(m.id);
    w.put_u32(static_cast<std::uint32_t>(m.dim));
  }
  w.put_u32(static_cast<std::uint32_t>(p.shared_dim));
  w.put_u32(static_cast<std::uint32_t>(p.text_dim));
  for (const Matrix* b : p.blocks())
    for (double v : b->values()) w.put_f32(static_cast<float>(v));
  return w.bytes();
}

DualEncoderParams deserialize_model(std::span<const std::uint8_t> bytes,
                                    const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("TTMD");
  const std::uint16_t version = r.get_u16();
  if (version != kModelVersion) {
    throw FormatError(source + ": unsupported model version " + std::to_string(version));
  }
  EncoderShape shape;
  shape.text_encoder_id = r.get_string();
  const std::uint32_t num_k = r.get_u32();
  if (num_k == 0 || num_k > 4096) throw FormatError(source + ": bad modality count");
  for (std::uint32_t k = 0; k < num_k; ++k) {
    ModalitySpec m;
    m.id = r.get_string();
    m.dim = r.get_u32();
    shape.modalities.push_back(std::move(m));
  }
  shape.shared_dim = r.get_u32();
  shape.text_dim = r.get_u32();
  DualEncoderParams p;
  try {
    p = init_params(shape, 0).zeros_like();
  } catch (const DimensionError& e) {
    throw FormatError(source + ": " + e.what());
  }
  for (Matrix* b : p.blocks())
    for (double& v : b->values()) v = static_cast<double>(r.get_f32());
  if (!r.at_end()) throw FormatError(source + ": trailing bytes after parameter blocks");
  for (const Matrix* b : p.blocks()) {
    if (!all_finite(b->values())) throw NonFiniteDataError(source + ": non-finite parameter");
  }
  return p;
}

void save_model(const std::filesystem::path& path, const DualEncoderParams& p) {
  write_file_bytes(path, serialize_model(p));
}

DualEncoderParams load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file_bytes(path), path.string());
}

std::uint64_t model_checksum(const DualEncoderParams& p) {
  return fnv1a64(serialize_model(p));
}

}  // namespace teachtext
