// Copyright 2026 The CRCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef CRCL_MATCHING_H_
#define CRCL_MATCHING_H_

#include <cstdint>
#include <utility>

#include "crcl/common.h"

namespace crcl {

inline constexpr double kDefaultTemperature = 0.05;
// Floor on the norm used when L2-normalizing embeddings.
inline constexpr double kNormFloor = 1e-12;

// Linear two-tower encoder: image x -> normalize(x * image_proj),
// text t -> normalize(t * text_proj).
struct EncoderParams {
  Matrix image_proj;  // d_v x d
  Matrix text_proj;   // d_t x d

  Index embed_dim() const { return image_proj.cols(); }
  void validate() const;

  // Scaled uniform (Glorot) initialization.
  static EncoderParams random(Index d_v, Index d_t, Index d, std::uint64_t seed);
};

// Normalizes every row to unit L2 norm; rows with norm below kNormFloor are
// divided by the floor instead.
Matrix normalize_rows(const Matrix& m);

// Backward pass of normalize_rows: given the pre-normalization rows `raw`
// and dL/d(normalized), returns dL/d(raw).
Matrix normalize_rows_backward(const Matrix& raw, const Matrix& grad_out);

struct Embeddings {
  Matrix images;  // K x d, unit rows
  Matrix texts;   // K x d, unit rows
};

Embeddings encode(const EncoderParams& params, const Matrix& images,
                  const Matrix& texts);

// S(i, j) = <img_i, txt_j>, clamped to [-1, 1].
Matrix similarity_matrix(const Matrix& img_emb, const Matrix& txt_emb);

// Row softmax (image-to-text) and column softmax (text-to-image) of S / tau.
struct SimilarityContext {
  Matrix sim;
  double tau = kDefaultTemperature;
  Matrix p_row;  // each row sums to one
  Matrix p_col;  // each column sums to one

  Index size() const { return sim.rows(); }

  static SimilarityContext build(Matrix sim, double tau);

  // Test hook: installs probabilities directly, bypassing the softmax and
  // its strict-positivity guarantee.
  static SimilarityContext from_probabilities(Matrix p_row, Matrix p_col,
                                              double tau);
};

std::pair<Matrix, Matrix> matching_probs(const Matrix& sim, double tau);

// Log of the row-softmax entry (i, j) and column-softmax entry (i, j),
// computed with log-sum-exp so that tiny probabilities stay finite.
double log_p_row(const Matrix& sim, double tau, Index i, Index j);
double log_p_col(const Matrix& sim, double tau, Index i, Index j);

}  // namespace crcl

#endif  // CRCL_MATCHING_H_
