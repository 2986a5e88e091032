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
#include "crcl/theory.h"

#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "crcl/errors.h"
#include "test_support.h"

namespace crcl {
namespace {

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

TEST(Extremes, ClosedForms) {
  const auto [lo, hi] = amin_amax(4);
  EXPECT_NEAR(lo, 4.0 * std::tan(0.25), 1e-15);
  EXPECT_NEAR(lo, 1.0214, 1e-4);
  EXPECT_NEAR(hi, 1.5574, 1e-4);
  // N tan(1/N) decreases towards 1.
  double prev = amin_amax(2).first;
  for (std::size_t n = 3; n < 200; ++n) {
    const double a = amin_amax(n).first;
    EXPECT_LT(a, prev);
    EXPECT_GT(a, 1.0);
    prev = a;
  }
}

TEST(Extremes, SampledSumsStayInsideAndEndpointsAreAttained) {
  for (std::size_t n : {3u, 5u, 10u}) {
    const ExtremesReport r = simplex_extremes_check(n, 20000, n);
    EXPECT_TRUE(r.passed()) << "n=" << n;
    EXPECT_GE(r.lowest_seen, r.a_min - 1e-12);
    EXPECT_LE(r.highest_seen, r.a_max + 1e-12);
  }
}

TEST(Extremes, BruteForceGridMinimumIsUniform) {
  // Grid search over N = 3 with resolution divisible by 3 includes the
  // uniform point, which must be the minimizer of sum tan.
  const auto grid = simplex_grid(3, 30);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> arg;
  for (const auto& c : grid) {
    double s = 0;
    for (int v : c) s += std::tan(v / 30.0);
    if (s < best) best = s, arg = c;
  }
  EXPECT_EQ(arg, (std::vector<int>{10, 10, 10}));
  EXPECT_NEAR(best, amin_amax(3).first, 1e-14);
}

TEST(SimplexGrid, CountsCompositions) {
  for (int parts = 1; parts <= 4; ++parts)
    for (int total = 1; total <= 12; ++total) {
      const auto g = simplex_grid(parts, total);
      EXPECT_EQ(static_cast<double>(g.size()), binomial(total + parts - 1, parts - 1));
      std::set<std::vector<int>> unique(g.begin(), g.end());
      EXPECT_EQ(unique.size(), g.size());
      for (const auto& c : g) {
        int sum = 0;
        for (int v : c) {
          EXPECT_GE(v, 0);
          sum += v;
        }
        EXPECT_EQ(sum, total);
      }
    }
}

TEST(Risks, AffineIdentityAtQ1) {
  std::mt19937_64 rng(40);
  for (double eta : {0.1, 0.3, 0.6}) {
    for (int trial = 0; trial < 2000; ++trial) {
      const Index n = 3 + static_cast<Index>(rng() % 10);
      const Vector p = testing::random_probability(n, rng);
      const Index i = static_cast<Index>(rng() % n);
      const QueryRisks r = per_query_risks(p, i, eta, 1.0);
      const double factor = 1.0 - static_cast<double>(n) * eta / static_cast<double>(n - 1);
      EXPECT_NEAR(r.noisy, factor * r.clean + eta, 1e-12);
    }
  }
}

TEST(Risks, NoisyRiskMatchesExplicitAverageOverShuffledPositives) {
  // Under uniform noise the observed positive is i with probability 1 - eta
  // and each other index with probability eta / (N - 1).
  std::mt19937_64 rng(41);
  const Vector p = testing::random_probability(5, rng);
  const double eta = 0.35, q = 0.4;
  double expected = 0.0;
  for (Index j = 0; j < 5; ++j) {
    const double w = j == 2 ? 1.0 - eta : eta / 4.0;
    expected += w * directional_complementary(p, j, q);
  }
  EXPECT_NEAR(per_query_risks(p, 2, eta, q).noisy, expected, 1e-14);
}

TEST(Risks, SandwichHoldsForRandomScores) {
  std::mt19937_64 rng(42);
  for (double q : {0.0, 0.3, 0.7, 1.0}) {
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t n = 2 + rng() % 10;
      const double max_eta = static_cast<double>(n - 1) / static_cast<double>(n);
      const double eta = std::uniform_real_distribution<double>(0, max_eta)(rng);
      const Vector p = testing::random_probability(static_cast<Index>(n), rng);
      const auto [a_min, a_max] = amin_amax(n);
      const QueryRisks r = per_query_risks(p, 0, eta, q);
      const double factor = 1.0 - static_cast<double>(n) * eta / static_cast<double>(n - 1);
      EXPECT_GE(r.noisy - (factor * r.clean + eta * std::pow(a_min, 1 - q)), -1e-10);
      EXPECT_LE(r.noisy - (factor * r.clean + eta * std::pow(a_max, 1 - q)), 1e-10);
    }
  }
}

TEST(Risks, RejectsBadInputs) {
  Vector p = Vector::Constant(4, 0.25);
  EXPECT_THROW(per_query_risks(p, 0, 0.8, 1.0), DomainError);
  EXPECT_THROW(per_query_risks(p, 0, 0.5, 1.5), DomainError);
  p(0) = 0.5;
  EXPECT_THROW(per_query_risks(p, 0, 0.5, 1.0), DomainError);
}

TEST(Bounds, LowerBoundShape) {
  EXPECT_EQ(gap_lower_bound(10, 0.3, 1.0), 0.0);
  EXPECT_LT(gap_lower_bound(10, 0.3, 0.0), 0.0);
  EXPECT_EQ(gap_lower_bound(10, 0.9, 0.5), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(gap_lower_bound(10, 0.9, 1.0), 0.0);
  const auto [a_min, a_max] = amin_amax(10);
  EXPECT_NEAR(gap_lower_bound(10, 0.3, 0.0),
              2 * 0.3 * (a_min - a_max) / (1 - 10 * 0.3 / 9), 1e-15);
  EXPECT_NEAR(gap_upper_bound_noisy(10, 0.3, 0.0), 2 * 0.3 * (a_max - a_min), 1e-15);
  EXPECT_EQ(gap_upper_bound_noisy(10, 0.3, 1.0), 0.0);
}

TEST(Bounds, CurveIsMonotoneAtFigureSetting) {
  const auto curve = c_curve(100, 0.2, unit_grid(101));
  ASSERT_EQ(curve.size(), 101u);
  EXPECT_EQ(curve.front().q, 0.0);
  EXPECT_EQ(curve.back().q, 1.0);
  EXPECT_EQ(curve.back().c, 0.0);
  EXPECT_EQ(curve.back().c_prime, 0.0);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    EXPECT_GT(curve[k].c, curve[k - 1].c);
    EXPECT_LT(curve[k].c_prime, curve[k - 1].c_prime);
  }
  EXPECT_THROW(c_curve(100, 0.99, unit_grid(3)), DomainError);
}

TEST(BruteForce, NoiseToleranceAtQ1) {
  for (std::size_t n : {3u, 4u}) {
    const double edge = static_cast<double>(n - 1) / static_cast<double>(n) - 0.01;
    for (double eta : {0.1, 0.25, 0.5, edge}) {
      const RiskReport r = brute_force_minimizers(n, eta, 1.0, 30, 500, 1);
      EXPECT_TRUE(r.passed()) << "n=" << n << " eta=" << eta;
      EXPECT_TRUE(r.minimizers_equal);
      // The clean minimizer is the one-hot vector at the positive.
      std::vector<int> vertex(n, 0);
      vertex[0] = 30;
      ASSERT_EQ(r.clean_minimizers.size(), 1u);
      EXPECT_EQ(r.clean_minimizers[0], vertex);
      EXPECT_EQ(r.clean_risk_min, 0.0);
      EXPECT_EQ(r.grid_points, static_cast<std::size_t>(binomial(30 + n - 1, n - 1)));
    }
  }
}

TEST(BruteForce, GapStaysWithinBoundsBelowQ1) {
  for (double q : {0.0, 0.3, 0.7}) {
    const RiskReport r = brute_force_minimizers(3, 0.4, q, 24, 500, 2);
    EXPECT_TRUE(r.gap_within_bounds) << "q=" << q;
    EXPECT_TRUE(r.residuals.empty());
    EXPECT_LE(r.max_sandwich_residual, 1e-10);
  }
}

TEST(BruteForce, ReportSerializes) {
  const RiskReport r = brute_force_minimizers(3, 0.2, 1.0, 6);
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("passed"), true);
  EXPECT_EQ(j.at("grid_points"), 28);
}

}  // namespace
}  // namespace crcl
