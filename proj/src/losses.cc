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
#include "crcl/losses.h"

#include <cmath>

#include "crcl/errors.h"

namespace crcl {
namespace {

void check_index(const SimilarityContext& ctx, Index i) {
  if (i < 0 || i >= ctx.size())
    throw DomainError("loss: pair index out of range");
}

void check_label(double label, const char* where) {
  if (!(label >= 0.0 && label <= 1.0))
    throw DomainError(std::string(where) + ": label must lie in [0, 1]");
}

// Softmax backward: returns dL/dlogits for probabilities p and dL/dp = g.
Vector softmax_backward(const Vector& p, const Vector& g) {
  return p.cwiseProduct((g.array() - g.dot(p)).matrix());
}

double add_complementary(const SimilarityContext& ctx, Index i, double q,
                         double scale, Matrix* grad) {
  const Vector row = ctx.p_row.row(i).transpose();
  const Vector col = ctx.p_col.col(i);
  const ComplementaryTerm r = complementary_term(row, i, q);
  const ComplementaryTerm c = complementary_term(col, i, q);
  if (grad) {
    const double s = scale / ctx.tau;
    grad->row(i) += s * softmax_backward(row, r.grad_p).transpose();
    grad->col(i) += s * softmax_backward(col, c.grad_p);
  }
  return r.value + c.value;
}

double add_active(const SimilarityContext& ctx, Index i, double label,
                  double scale, Matrix* grad) {
  if (label == 0.0) return 0.0;
  const double value =
      -label * (std::log(ctx.p_row(i, i)) + std::log(ctx.p_col(i, i)));
  if (grad) {
    // d(-log softmax_i)/dlogits = p - e_i
    const double s = scale * label / ctx.tau;
    grad->row(i) += s * ctx.p_row.row(i);
    grad->col(i) += s * ctx.p_col.col(i);
    (*grad)(i, i) -= 2.0 * s;
  }
  return value;
}

double add_hard_negative(const Matrix& sim, Index i, double margin,
                         double scale, Matrix* grad) {
  const Index k = sim.rows();
  if (k < 2) return 0.0;
  Index best_txt = -1;
  Index best_img = -1;
  for (Index j = 0; j < k; ++j) {
    if (j == i) continue;
    if (best_txt < 0 || sim(i, j) > sim(i, best_txt)) best_txt = j;
    if (best_img < 0 || sim(j, i) > sim(best_img, i)) best_img = j;
  }
  const double hinge_txt = margin - sim(i, i) + sim(i, best_txt);
  const double hinge_img = margin - sim(i, i) + sim(best_img, i);
  double value = 0.0;
  if (hinge_txt > 0.0) {
    value += hinge_txt;
    if (grad) {
      (*grad)(i, i) -= scale;
      (*grad)(i, best_txt) += scale;
    }
  }
  if (hinge_img > 0.0) {
    value += hinge_img;
    if (grad) {
      (*grad)(i, i) -= scale;
      (*grad)(best_img, i) += scale;
    }
  }
  return value;
}

void check_q(double q) {
  if (!(q >= 0.0 && q <= 1.0))
    throw DomainError("complementary loss: q must lie in [0, 1]");
}

}  // namespace

ComplementaryTerm complementary_term(const Vector& p, Index positive,
                                     double q) {
  check_q(q);
  if (positive < 0 || positive >= p.size())
    throw DomainError("complementary_term: positive index out of range");
  const Vector t = p.array().tan().matrix();
  const double total = t.sum();
  const double numer = total - t(positive);
  const double norm = std::pow(total, -q);
  ComplementaryTerm out;
  out.value = numer * norm;
  // dL/dt_k = T^-q - q*num*T^(-q-1) for k != positive, -q*num*T^(-q-1) else.
  const double shared = -q * numer * norm / total;
  Vector d_t = Vector::Constant(p.size(), norm + shared);
  d_t(positive) = shared;
  out.grad_p = d_t.cwiseProduct((1.0 + t.array().square()).matrix());
  return out;
}

LossEvaluation complementary_loss(const SimilarityContext& ctx, Index i,
                                  double q) {
  check_index(ctx, i);
  check_q(q);
  LossEvaluation out;
  out.grad_sim = Matrix::Zero(ctx.size(), ctx.size());
  out.value = add_complementary(ctx, i, q, 1.0, &out.grad_sim);
  return out;
}

LossEvaluation active_loss(const SimilarityContext& ctx, Index i,
                           double label) {
  check_index(ctx, i);
  check_label(label, "active_loss");
  LossEvaluation out;
  out.grad_sim = Matrix::Zero(ctx.size(), ctx.size());
  out.value = add_active(ctx, i, label, 1.0, &out.grad_sim);
  return out;
}

LossEvaluation acl_loss(const SimilarityContext& ctx, Index i, double label,
                        const AclConfig& cfg) {
  check_index(ctx, i);
  check_label(label, "acl_loss");
  LossEvaluation out;
  out.grad_sim = Matrix::Zero(ctx.size(), ctx.size());
  out.value = add_active(ctx, i, label, 1.0, &out.grad_sim);
  out.value += cfg.lambda * add_complementary(ctx, i, 1.0 - label, cfg.lambda,
                                              &out.grad_sim);
  return out;
}

LossEvaluation batch_loss(const SimilarityContext& ctx,
                          std::span<const double> labels,
                          const AclConfig& cfg) {
  LossSpec spec;
  spec.kind = LossKind::kAcl;
  spec.acl = cfg;
  return evaluate_batch(spec, ctx, labels);
}

double soft_margin(double label, double margin, double curve) {
  if (!(curve > 1.0)) throw DomainError("soft margin: curve m must be > 1");
  check_label(label, "soft margin");
  return (std::pow(curve, label) - 1.0) / (curve - 1.0) * margin;
}

LossEvaluation triplet_hard_negative(const Matrix& sim, Index i,
                                     double margin) {
  if (i < 0 || i >= sim.rows() || sim.rows() != sim.cols())
    throw DomainError("triplet: bad index or non-square similarity");
  LossEvaluation out;
  out.grad_sim = Matrix::Zero(sim.rows(), sim.cols());
  out.value = add_hard_negative(sim, i, margin, 1.0, &out.grad_sim);
  return out;
}

LossEvaluation soft_margin_triplet(const Matrix& sim, Index i, double label,
                                   double margin, double curve) {
  return triplet_hard_negative(sim, i, soft_margin(label, margin, curve));
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kAcl:
      return "acl";
    case LossKind::kActiveOnly:
      return "active_only";
    case LossKind::kComplementaryOnly:
      return "complementary_only";
    case LossKind::kTripletHardNegative:
      return "triplet_hn";
    case LossKind::kSoftMarginTriplet:
      return "soft_margin";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  for (LossKind k : {LossKind::kAcl, LossKind::kActiveOnly,
                     LossKind::kComplementaryOnly,
                     LossKind::kTripletHardNegative,
                     LossKind::kSoftMarginTriplet})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown loss selector '" + name + "'");
}

LossEvaluation evaluate_batch(const LossSpec& spec,
                              const SimilarityContext& ctx,
                              std::span<const double> labels) {
  const Index k = ctx.size();
  if (static_cast<Index>(labels.size()) != k)
    throw ConfigError("batch loss: expected one label per pair");
  for (double y : labels) check_label(y, "batch loss");
  if (spec.fixed_q) check_q(*spec.fixed_q);

  LossEvaluation out;
  out.grad_sim = Matrix::Zero(k, k);
  const double scale = 1.0 / static_cast<double>(k);
  const double lambda = spec.acl.lambda;
  double total = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    double term = 0.0;
    switch (spec.kind) {
      case LossKind::kAcl:
        term = add_active(ctx, i, y, scale, &out.grad_sim) +
               lambda * add_complementary(ctx, i, 1.0 - y, scale * lambda,
                                          &out.grad_sim);
        break;
      case LossKind::kActiveOnly:
        term = add_active(ctx, i, y, scale, &out.grad_sim);
        break;
      case LossKind::kComplementaryOnly:
        term = add_complementary(ctx, i, spec.fixed_q.value_or(1.0 - y), scale,
                                 &out.grad_sim);
        break;
      case LossKind::kTripletHardNegative:
        term = add_hard_negative(ctx.sim, i, spec.margin, scale, &out.grad_sim);
        break;
      case LossKind::kSoftMarginTriplet:
        term = add_hard_negative(ctx.sim, i,
                                 soft_margin(y, spec.margin, spec.margin_curve),
                                 scale, &out.grad_sim);
        break;
    }
    total += term;
  }
  out.value = total * scale;
  return out;
}

}  // namespace crcl
