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
#ifndef CRCL_THEORY_H_
#define CRCL_THEORY_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crcl/common.h"

namespace crcl {

inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kBoundTolerance = 1e-10;

// Extremes of sum_j tan(p_j) over the probability simplex with N cells:
// (N tan(1/N), tan(1)).
std::pair<double, double> amin_amax(std::size_t n);

// Symmetric Dirichlet(1) draw.
Vector sample_simplex(std::size_t n, std::uint64_t seed);

struct ExtremesReport {
  std::size_t n = 0;
  std::size_t samples = 0;
  double a_min = 0.0;
  double a_max = 0.0;
  double lowest_seen = 0.0;
  double highest_seen = 0.0;
  std::size_t violations = 0;
  bool uniform_attains_min = false;
  bool vertex_attains_max = false;

  bool passed() const {
    return violations == 0 && uniform_attains_min && vertex_attains_max;
  }
};

ExtremesReport simplex_extremes_check(std::size_t n, std::size_t samples,
                                      std::uint64_t seed);

// One-direction complementary loss with column `positive` as the match.
double directional_complementary(const Vector& p, Index positive, double q);

struct QueryRisks {
  double clean = 0.0;
  double noisy = 0.0;
};

// Per-query, one-direction risks under uniform noisy correspondence:
//   clean = L(p, i)
//   noisy = (1 - eta) L(p, i) + eta / (N - 1) * sum_{j != i} L(p, j)
QueryRisks per_query_risks(const Vector& p, Index i, double eta, double q);

// Lower end C of the risk-gap bound, over both directions. Equals 0 at q = 1
// and -inf when eta == (N-1)/N and q < 1.
double gap_lower_bound(std::size_t n, double eta, double q);
// C' = 2 eta (A_max^(1-q) - A_min^(1-q)).
double gap_upper_bound_noisy(std::size_t n, double eta, double q);

struct CurvePoint {
  double q = 0.0;
  double c = 0.0;
  double c_prime = 0.0;
};

std::vector<CurvePoint> c_curve(std::size_t n, double eta,
                                const std::vector<double>& q_grid);
// Evenly spaced grid of `points` values covering [0, 1].
std::vector<double> unit_grid(std::size_t points);

// Exhaustive search over the simplex grid {c / g : c composition of g into
// N parts}. Risks decompose per query and direction, so the search runs on a
// single query (positive index 0). Reported risk values cover both
// directions of that query.
struct RiskReport {
  std::size_t n = 0;
  double eta = 0.0;
  double q = 0.0;
  std::size_t grid_resolution = 0;
  std::size_t grid_points = 0;
  std::size_t random_samples = 0;
  double clean_risk_min = 0.0;
  double noisy_risk_min = 0.0;
  // Clean risk at the worst noisy minimizer, i.e. R(f*_eta).
  double clean_risk_at_noisy_min = 0.0;
  std::vector<std::vector<int>> clean_minimizers;
  std::vector<std::vector<int>> noisy_minimizers;
  double bound_lo = 0.0;  // C
  double bound_hi = 0.0;
  double gap = 0.0;       // R(f*) - R(f*_eta)
  bool minimizers_equal = false;
  bool gap_within_bounds = false;
  double max_sandwich_residual = 0.0;
  std::vector<std::string> residuals;  // violations above kBoundTolerance

  // Equality of minimizer sets is required only at q = 1.
  bool passed() const;
};

void to_json(nlohmann::json& j, const RiskReport& r);

RiskReport brute_force_minimizers(std::size_t n, double eta, double q,
                                  std::size_t grid_resolution,
                                  std::size_t random_samples = 0,
                                  std::uint64_t seed = 0);

// All compositions of `total` into `parts` non-negative integers.
std::vector<std::vector<int>> simplex_grid(std::size_t parts, int total);

}  // namespace crcl

#endif  // CRCL_THEORY_H_
