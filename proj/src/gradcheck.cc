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
#include "crcl/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "crcl/errors.h"

namespace crcl {
namespace {

void note(GradCheckReport& report, double analytic, double numeric,
          const std::string& where, double tol) {
  const double abs_err = std::abs(analytic - numeric);
  const double rel_err = gradient_relative_error(analytic, numeric);
  ++report.checked;
  report.max_abs_error = std::max(report.max_abs_error, abs_err);
  if (!(rel_err <= report.max_rel_error)) {
    report.max_rel_error = rel_err;
    report.worst_entry = where;
  }
  if (!(rel_err <= tol)) report.passed = false;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradcheck_similarity(const SimilarityLoss& fn,
                                     const Matrix& sim, double h, double tol) {
  if (!(h > 0.0)) throw DomainError("gradcheck: step must be > 0");
  const LossEvaluation base = fn(sim);
  GradCheckReport report;
  Matrix probe = sim;
  for (Index r = 0; r < sim.rows(); ++r) {
    for (Index c = 0; c < sim.cols(); ++c) {
      const double old = probe(r, c);
      probe(r, c) = old + h;
      const double up = fn(probe).value;
      probe(r, c) = old - h;
      const double down = fn(probe).value;
      probe(r, c) = old;
      note(report, base.grad_sim(r, c), (up - down) / (2.0 * h),
           "sim(" + std::to_string(r) + "," + std::to_string(c) + ")", tol);
    }
  }
  return report;
}

GradCheckReport gradcheck_encoder(const EncoderLoss& fn,
                                  const EncoderParams& params, double h,
                                  double tol) {
  if (!(h > 0.0)) throw DomainError("gradcheck: step must be > 0");
  const EncoderLossEvaluation base = fn(params);
  GradCheckReport report;
  EncoderParams probe = params;
  auto sweep = [&](Matrix& target, const Matrix& analytic, const char* name) {
    for (Index r = 0; r < target.rows(); ++r) {
      for (Index c = 0; c < target.cols(); ++c) {
        const double old = target(r, c);
        target(r, c) = old + h;
        const double up = fn(probe).value;
        target(r, c) = old - h;
        const double down = fn(probe).value;
        target(r, c) = old;
        note(report, analytic(r, c), (up - down) / (2.0 * h),
             std::string(name) + "(" + std::to_string(r) + "," +
                 std::to_string(c) + ")",
             tol);
      }
    }
  };
  sweep(probe.image_proj, base.grad.image_proj, "image_proj");
  sweep(probe.text_proj, base.grad.text_proj, "text_proj");
  return report;
}

}  // namespace crcl
