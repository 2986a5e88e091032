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
#ifndef CRCL_GRADCHECK_H_
#define CRCL_GRADCHECK_H_

#include <cstddef>
#include <functional>
#include <string>

#include "crcl/common.h"
#include "crcl/losses.h"
#include "crcl/matching.h"

namespace crcl {

// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1):
// relative for entries of magnitude >= 1, absolute below, since the
// rounding error of a central difference is absolute (~eps * |f| / h).
struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;
  bool passed = true;
};

double gradient_relative_error(double analytic, double numeric);

using SimilarityLoss = std::function<LossEvaluation(const Matrix& sim)>;

// Central differences on every entry of `sim`.
GradCheckReport gradcheck_similarity(const SimilarityLoss& fn,
                                     const Matrix& sim, double h, double tol);

struct EncoderLossEvaluation {
  double value = 0.0;
  EncoderParams grad;
};

using EncoderLoss =
    std::function<EncoderLossEvaluation(const EncoderParams& params)>;

// Central differences on every entry of both projection matrices.
GradCheckReport gradcheck_encoder(const EncoderLoss& fn,
                                  const EncoderParams& params, double h,
                                  double tol);

}  // namespace crcl

#endif  // CRCL_GRADCHECK_H_
