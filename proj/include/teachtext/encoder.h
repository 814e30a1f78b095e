// include/teachtext/encoder.h

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

#ifndef TEACHTEXT_ENCODER_H_
#define TEACHTEXT_ENCODER_H_

// Mixture-of-embedding-experts dual encoder.
//
// Video side: one affine projection per modality followed by L2
// normalisation, v_k = norm(W_k x_k + b_k).
// Text side: one affine projection per modality, q_k = norm(A_k t + c_k),
// plus a text-conditioned softmax over modalities, w = softmax(U t + u0).
// Score: s(x, t) = sum_k w_k <v_k, q_k>, which lies in [-1, 1].

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "teachtext/numerics.h"

namespace teachtext {

struct ModalitySpec {
  std::string id;
  std::size_t dim = 0;

  bool operator==(const ModalitySpec&) const = default;
};

struct EncoderShape {
  std::vector<ModalitySpec> modalities;
  std::size_t text_dim = 0;
  std::size_t shared_dim = 0;
  std::string text_encoder_id;
};

struct DualEncoderParams {
  std::string text_encoder_id;
  std::vector<ModalitySpec> modalities;
  std::size_t text_dim = 0;
  std::size_t shared_dim = 0;

  std::vector<Matrix> video_weight;  // per modality, shared_dim x dim_k
  std::vector<Matrix> video_bias;    // per modality, 1 x shared_dim
  std::vector<Matrix> text_weight;   // per modality, shared_dim x text_dim
  std::vector<Matrix> text_bias;     // per modality, 1 x shared_dim
  Matrix mix_weight;                 // K x text_dim
  Matrix mix_bias;                   // 1 x K

  std::size_t num_modalities() const { return modalities.size(); }
  EncoderShape shape() const;

  // Parameter blocks in serialisation order: all (W_k, b_k), then all
  // (A_k, c_k), then U, u0.
  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;
  std::vector<std::string> block_names() const;
  std::size_t num_parameters() const;

  // Same shape and metadata, every block zero.
  DualEncoderParams zeros_like() const;

  // Throws DimensionError / NumericalError on inconsistent or non-finite blocks.
  void validate() const;

  bool operator==(const DualEncoderParams&) const = default;
};

// Xavier-uniform weights (a = sqrt(6 / (fan_in + fan_out)) per block), zero
// biases. Values are rounded to float32; identical seeds give identical params.
DualEncoderParams init_params(const EncoderShape& shape, std::uint64_t seed);

// Per-modality feature rows for n videos, in the params' modality order.
using VideoFeatures = std::vector<Matrix>;

struct VideoEncoding {
  std::vector<Matrix> unit;                // per modality, n x d
  std::vector<std::vector<double>> norms;  // pre-normalisation row norms
};

struct TextEncoding {
  std::vector<Matrix> unit;
  std::vector<std::vector<double>> norms;
  Matrix weights;  // n x K mixture weights
};

VideoEncoding encode_videos(const DualEncoderParams& p, const VideoFeatures& features);
TextEncoding encode_texts(const DualEncoderParams& p, const Matrix& texts);

// S(i, j) = sum_k w_jk <v_ik, q_jk>; rows are videos, columns are texts.
Matrix similarity_matrix(const VideoEncoding& videos, const TextEncoding& texts);

Matrix batch_similarity_matrix(const DualEncoderParams& p, const VideoFeatures& videos,
                               const Matrix& texts);

// Single-item conveniences over the batched routines.
std::vector<std::vector<double>> encode_video(const DualEncoderParams& p,
                                              const std::vector<std::vector<double>>& x);

struct EncodedText {
  std::vector<std::vector<double>> queries;
  std::vector<double> weights;
};
EncodedText encode_text(const DualEncoderParams& p, std::span<const double> t);

double similarity(const DualEncoderParams& p, const std::vector<std::vector<double>>& x,
                  std::span<const double> t);

// Gradients with respect to the encoder outputs (unit vectors and mixture
// weights). Losses that act on similarities or on joint embeddings both
// reduce to this form before the parameter backward pass.
struct EncodingGrads {
  std::vector<Matrix> video_unit;
  std::vector<Matrix> text_unit;
  Matrix text_weights;

  static EncodingGrads zeros(const VideoEncoding& videos, const TextEncoding& texts);
};

// Accumulates dL/d(encodings) given upstream dL/dS into `grads`.
void similarity_backward(const VideoEncoding& videos, const TextEncoding& texts,
                         const Matrix& upstream, EncodingGrads& grads);

DualEncoderParams encoder_backward(const DualEncoderParams& p, const VideoFeatures& videos,
                                   const Matrix& texts, const VideoEncoding& venc,
                                   const TextEncoding& tenc, const EncodingGrads& grads);

// Full chain rule for dL/dparams from upstream = dL/dS (videos x texts).
DualEncoderParams grad_wrt_params(const DualEncoderParams& p, const VideoFeatures& videos,
                                  const Matrix& texts, const Matrix& upstream);

// Joint-space embeddings used by the embedding-level distillation baselines.
// Modality blocks are concatenated; a video block is scaled by sqrt(1/K), a
// text block by sqrt(w_k) of that text's own mixture weights. Both
// embeddings therefore have unit norm.
Matrix video_joint_embedding(const VideoEncoding& videos);
Matrix text_joint_embedding(const TextEncoding& texts);

// Accumulates dL/d(encodings) from gradients on the joint embeddings.
// Either gradient may be null.
void joint_embedding_backward(const VideoEncoding& videos, const TextEncoding& texts,
                              const Matrix* d_video, const Matrix* d_text,
                              EncodingGrads& grads);

// "TTMD" model files.
std::vector<std::uint8_t> serialize_model(const DualEncoderParams& p);
DualEncoderParams deserialize_model(std::span<const std::uint8_t> bytes,
                                    const std::string& source);
void save_model(const std::filesystem::path& path, const DualEncoderParams& p);
DualEncoderParams load_model(const std::filesystem::path& path);

// FNV-1a over the serialised model bytes.
std::uint64_t model_checksum(const DualEncoderParams& p);

}  // namespace teachtext

#endif  // TEACHTEXT_ENCODER_H_
