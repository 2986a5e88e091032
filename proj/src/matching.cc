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
#include "crcl/matching.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "crcl/errors.h"

namespace crcl {

void EncoderParams::validate() const {
  if (image_proj.cols() < 1 || image_proj.cols() != text_proj.cols())
    throw ConfigError("EncoderParams: projections must share d >= 1");
  require_finite(image_proj, "image projection");
  require_finite(text_proj, "text projection");
}

EncoderParams EncoderParams::random(Index d_v, Index d_t, Index d,
                                    std::uint64_t seed) {
  if (d_v < 1 || d_t < 1 || d < 1)
    throw ConfigError("EncoderParams: dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  auto init = [&rng](Index rows, Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
  };
  EncoderParams p;
  p.image_proj = init(d_v, d);
  p.text_proj = init(d_t, d);
  return p;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    const double norm = std::max(m.row(r).norm(), kNormFloor);
    out.row(r) = m.row(r) / norm;
  }
  return out;
}

Matrix normalize_rows_backward(const Matrix& raw, const Matrix& grad_out) {
  Matrix grad(raw.rows(), raw.cols());
  for (Index r = 0; r < raw.rows(); ++r) {
    const double norm = raw.row(r).norm();
    if (norm <= kNormFloor) {
      grad.row(r) = grad_out.row(r) / kNormFloor;
      continue;
    }
    // d(z/|z|) = (I - u u^T) / |z|
    const Eigen::RowVectorXd u = raw.row(r) / norm;
    grad.row(r) = (grad_out.row(r) - grad_out.row(r).dot(u) * u) / norm;
  }
  return grad;
}

Embeddings encode(const EncoderParams& params, const Matrix& images,
                  const Matrix& texts) {
  if (images.cols() != params.image_proj.rows() ||
      texts.cols() != params.text_proj.rows())
    throw ConfigError("encode: input dimensions do not match the encoder");
  require_finite(images, "image batch");
  require_finite(texts, "text batch");
  return {normalize_rows(images * params.image_proj),
          normalize_rows(texts * params.text_proj)};
}

Matrix similarity_matrix(const Matrix& img_emb, const Matrix& txt_emb) {
  if (img_emb.cols() != txt_emb.cols())
    throw ConfigError("similarity_matrix: embedding dims differ");
  Matrix s = img_emb * txt_emb.transpose();
  require_finite(s, "similarity matrix");
  return s.cwiseMax(-1.0).cwiseMin(1.0);
}

std::pair<Matrix, Matrix> matching_probs(const Matrix& sim, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw DomainError("matching_probs: temperature must be > 0");
  if (sim.rows() != sim.cols())
    throw ConfigError("matching_probs: similarity matrix must be square");
  require_finite(sim, "similarity matrix");
  const Matrix logits = sim / tau;

  Matrix p_row(sim.rows(), sim.cols());
  for (Index i = 0; i < sim.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p_row.row(i) = (logits.row(i).array() - mx).exp().matrix();
    p_row.row(i) /= p_row.row(i).sum();
  }
  Matrix p_col(sim.rows(), sim.cols());
  for (Index j = 0; j < sim.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    p_col.col(j) = (logits.col(j).array() - mx).exp().matrix();
    p_col.col(j) /= p_col.col(j).sum();
  }
  return {std::move(p_row), std::move(p_col)};
}

SimilarityContext SimilarityContext::build(Matrix sim, double tau) {
  auto [p_row, p_col] = matching_probs(sim, tau);
  SimilarityContext ctx;
  ctx.sim = std::move(sim);
  ctx.tau = tau;
  ctx.p_row = std::move(p_row);
  ctx.p_col = std::move(p_col);
  return ctx;
}

SimilarityContext SimilarityContext::from_probabilities(Matrix p_row,
                                                        Matrix p_col,
                                                        double tau) {
  if (p_row.rows() != p_row.cols() || p_col.rows() != p_row.rows() ||
      p_col.cols() != p_row.cols())
    throw ConfigError("from_probabilities: shape mismatch");
  SimilarityContext ctx;
  ctx.sim = Matrix::Zero(p_row.rows(), p_row.cols());
  ctx.tau = tau;
  ctx.p_row = std::move(p_row);
  ctx.p_col = std::move(p_col);
  return ctx;
}

double log_p_row(const Matrix& sim, double tau, Index i, Index j) {
  const Eigen::RowVectorXd logits = sim.row(i) / tau;
  const double mx = logits.maxCoeff();
  return logits(j) - mx - std::log((logits.array() - mx).exp().sum());
}

double log_p_col(const Matrix& sim, double tau, Index i, Index j) {
  const Eigen::VectorXd logits = sim.col(j) / tau;
  const double mx = logits.maxCoeff();
  return logits(i) - mx - std::log((logits.array() - mx).exp().sum());
}

}  // namespace crcl
