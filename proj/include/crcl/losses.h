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
#ifndef CRCL_LOSSES_H_
#define CRCL_LOSSES_H_

#include <optional>
#include <span>
#include <string>

#include "crcl/common.h"
#include "crcl/matching.h"

namespace crcl {

// A scalar loss and its gradient with respect to the similarity matrix.
struct LossEvaluation {
  double value = 0.0;
  Matrix grad_sim;
};

struct AclConfig {
  double tau = kDefaultTemperature;
  double lambda = 5.0;
};

inline constexpr double kDefaultTripletMargin = 0.2;
inline constexpr double kDefaultMarginCurve = 10.0;

// One direction of the complementary loss on a probability vector p with
// positive index `positive`:
//   sum_{k != positive} tan(p_k) / (sum_k tan(p_k))^q
// together with its gradient with respect to p.
struct ComplementaryTerm {
  double value = 0.0;
  Vector grad_p;
};
ComplementaryTerm complementary_term(const Vector& p, Index positive, double q);

// Robust complementary loss of diagonal pair i, summed over both retrieval
// directions (row i of p_row, column i of p_col).
LossEvaluation complementary_loss(const SimilarityContext& ctx, Index i,
                                  double q);

// Weighted positive log-likelihood: -y (log p_row(i,i) + log p_col(i,i)).
LossEvaluation active_loss(const SimilarityContext& ctx, Index i,
                           double label);

// active_loss(label) + lambda * complementary_loss(q = 1 - label). The label
// is treated as a constant.
LossEvaluation acl_loss(const SimilarityContext& ctx, Index i, double label,
                        const AclConfig& cfg);

// Mean of acl_loss over the K diagonal pairs.
LossEvaluation batch_loss(const SimilarityContext& ctx,
                          std::span<const double> labels, const AclConfig& cfg);

// VSE++-style hinge on the hardest in-batch negatives, both directions.
// Ties in the max go to the lowest index; an exactly-zero hinge has zero
// gradient.
LossEvaluation triplet_hard_negative(const Matrix& sim, Index i, double margin);

// Hard-negative triplet with the soft margin (m^y - 1) / (m - 1) * margin.
LossEvaluation soft_margin_triplet(const Matrix& sim, Index i, double label,
                                   double margin, double curve);
double soft_margin(double label, double margin, double curve);

// Loss selector used by the trainer.
enum class LossKind {
  kAcl,
  kActiveOnly,
  kComplementaryOnly,
  kTripletHardNegative,
  kSoftMarginTriplet,
};

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::kAcl;
  AclConfig acl;
  // Complementary-only: fixed exponent; when unset q = 1 - label.
  std::optional<double> fixed_q;
  double margin = kDefaultTripletMargin;
  double margin_curve = kDefaultMarginCurve;
};

// Mean per-pair loss over a batch under the selected objective.
LossEvaluation evaluate_batch(const LossSpec& spec, const SimilarityContext& ctx,
                              std::span<const double> labels);

}  // namespace crcl

#endif  // CRCL_LOSSES_H_
