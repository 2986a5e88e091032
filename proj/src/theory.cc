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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "crcl/errors.h"
#include "crcl/losses.h"

namespace crcl {
namespace {

void check_n(std::size_t n) {
  if (n < 2) throw DomainError("theory: N must be >= 2");
}

void check_eta(std::size_t n, double eta) {
  const double max_eta = static_cast<double>(n - 1) / static_cast<double>(n);
  if (!(eta >= 0.0) || eta > max_eta)
    throw DomainError("theory: eta must lie in [0, (N-1)/N]");
}

void check_q(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("theory: q must lie in [0, 1]");
}

double noise_factor(std::size_t n, double eta) {
  return 1.0 - static_cast<double>(n) * eta / static_cast<double>(n - 1);
}

void collect(std::vector<std::vector<int>>& out, std::vector<int>& cur,
             std::size_t k, int left) {
  if (k + 1 == cur.size()) {
    cur[k] = left;
    out.push_back(cur);
    return;
  }
  for (int c = left; c >= 0; --c) {
    cur[k] = c;
    collect(out, cur, k + 1, left - c);
  }
}

std::string describe(const Vector& p) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Index k = 0; k < p.size(); ++k) os << (k ? "," : "") << p(k);
  os << "]";
  return os.str();
}

}  // namespace

std::pair<double, double> amin_amax(std::size_t n) {
  check_n(n);
  const double nd = static_cast<double>(n);
  return {nd * std::tan(1.0 / nd), std::tan(1.0)};
}

Vector sample_simplex(std::size_t n, std::uint64_t seed) {
  check_n(n);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  Vector p(static_cast<Index>(n));
  for (Index k = 0; k < p.size(); ++k) p(k) = e(rng);
  return p / p.sum();
}

ExtremesReport simplex_extremes_check(std::size_t n, std::size_t samples,
                                      std::uint64_t seed) {
  check_n(n);
  if (samples < 1) throw DomainError("extremes check: samples must be >= 1");
  ExtremesReport rep;
  rep.n = n;
  rep.samples = samples;
  std::tie(rep.a_min, rep.a_max) = amin_amax(n);
  rep.lowest_seen = std::numeric_limits<double>::infinity();
  rep.highest_seen = -rep.lowest_seen;

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  Vector p(static_cast<Index>(n));
  for (std::size_t s = 0; s < samples; ++s) {
    for (Index k = 0; k < p.size(); ++k) p(k) = e(rng);
    p /= p.sum();
    const double y = p.array().tan().sum();
    rep.lowest_seen = std::min(rep.lowest_seen, y);
    rep.highest_seen = std::max(rep.highest_seen, y);
    if (y < rep.a_min - kIdentityTolerance || y > rep.a_max + kIdentityTolerance)
      ++rep.violations;
  }

  const Vector uniform =
      Vector::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n));
  rep.uniform_attains_min =
      std::abs(uniform.array().tan().sum() - rep.a_min) <= kIdentityTolerance;
  bool vertices = true;
  for (Index v = 0; v < static_cast<Index>(n); ++v) {
    Vector one_hot = Vector::Zero(static_cast<Index>(n));
    one_hot(v) = 1.0;
    vertices &= std::abs(one_hot.array().tan().sum() - rep.a_max) <=
                kIdentityTolerance;
  }
  rep.vertex_attains_max = vertices;
  return rep;
}

double directional_complementary(const Vector& p, Index positive, double q) {
  return complementary_term(p, positive, q).value;
}

QueryRisks per_query_risks(const Vector& p, Index i, double eta, double q) {
  const auto n = static_cast<std::size_t>(p.size());
  check_n(n);
  check_eta(n, eta);
  check_q(q);
  if (i < 0 || i >= p.size()) throw DomainError("risks: index out of range");
  if (p.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > 1e-9)
    throw DomainError("risks: p must lie on the probability simplex");
  QueryRisks r;
  r.clean = directional_complementary(p, i, q);
  double others = 0.0;
  for (Index j = 0; j < p.size(); ++j)
    if (j != i) others += directional_complementary(p, j, q);
  r.noisy = (1.0 - eta) * r.clean + eta / static_cast<double>(n - 1) * others;
  return r;
}

double gap_lower_bound(std::size_t n, double eta, double q) {
  check_n(n);
  check_eta(n, eta);
  check_q(q);
  const auto [a_min, a_max] = amin_amax(n);
  const double numer =
      2.0 * eta * (std::pow(a_min, 1.0 - q) - std::pow(a_max, 1.0 - q));
  if (numer == 0.0) return 0.0;
  const double factor = noise_factor(n, eta);
  if (factor <= 0.0) return -std::numeric_limits<double>::infinity();
  return numer / factor;
}

double gap_upper_bound_noisy(std::size_t n, double eta, double q) {
  check_n(n);
  check_eta(n, eta);
  check_q(q);
  const auto [a_min, a_max] = amin_amax(n);
  return 2.0 * eta * (std::pow(a_max, 1.0 - q) - std::pow(a_min, 1.0 - q));
}

std::vector<CurvePoint> c_curve(std::size_t n, double eta,
                                const std::vector<double>& q_grid) {
  check_n(n);
  check_eta(n, eta);
  if (noise_factor(n, eta) <= 0.0)
    throw DomainError("c_curve: eta must be strictly below (N-1)/N");
  std::vector<CurvePoint> out;
  out.reserve(q_grid.size());
  for (double q : q_grid)
    out.push_back({q, gap_lower_bound(n, eta, q), gap_upper_bound_noisy(n, eta, q)});
  return out;
}

std::vector<double> unit_grid(std::size_t points) {
  if (points < 2) throw DomainError("unit_grid: need at least two points");
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k)
    g[k] = static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

std::vector<std::vector<int>> simplex_grid(std::size_t parts, int total) {
  if (parts < 1 || total < 1)
    throw DomainError("simplex_grid: need parts >= 1 and total >= 1");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(parts, 0);
  collect(out, cur, 0, total);
  return out;
}

bool RiskReport::passed() const {
  return residuals.empty() && gap_within_bounds &&
         (q != 1.0 || minimizers_equal);
}

void to_json(nlohmann::json& j, const RiskReport& r) {
  auto finite_or_null = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"n", r.n},
                     {"eta", r.eta},
                     {"q", r.q},
                     {"grid_resolution", r.grid_resolution},
                     {"grid_points", r.grid_points},
                     {"random_samples", r.random_samples},
                     {"clean_risk_min", r.clean_risk_min},
                     {"noisy_risk_min", r.noisy_risk_min},
                     {"clean_risk_at_noisy_min", r.clean_risk_at_noisy_min},
                     {"clean_minimizers", r.clean_minimizers},
                     {"noisy_minimizers", r.noisy_minimizers},
                     {"bound_lo", finite_or_null(r.bound_lo)},
                     {"bound_hi", r.bound_hi},
                     {"gap", r.gap},
                     {"minimizers_equal", r.minimizers_equal},
                     {"gap_within_bounds", r.gap_within_bounds},
                     {"max_sandwich_residual", r.max_sandwich_residual},
                     {"residuals", r.residuals},
                     {"passed", r.passed()}};
}

RiskReport brute_force_minimizers(std::size_t n, double eta, double q,
                                  std::size_t grid_resolution,
                                  std::size_t random_samples,
                                  std::uint64_t seed) {
  check_n(n);
  check_eta(n, eta);
  check_q(q);
  if (grid_resolution < 1)
    throw DomainError("brute force: grid resolution must be >= 1");

  RiskReport rep;
  rep.n = n;
  rep.eta = eta;
  rep.q = q;
  rep.grid_resolution = grid_resolution;
  rep.random_samples = random_samples;
  rep.bound_lo = gap_lower_bound(n, eta, q);
  rep.bound_hi = 0.0;

  const auto [a_min, a_max] = amin_amax(n);
  const double factor = noise_factor(n, eta);
  const double lo_shift = eta * std::pow(a_min, 1.0 - q);
  const double hi_shift = eta * std::pow(a_max, 1.0 - q);

  auto sandwich = [&](const Vector& p, const QueryRisks& r) {
    const double lower = factor * r.clean + lo_shift;
    const double upper = factor * r.clean + hi_shift;
    const double residual = std::max({lower - r.noisy, r.noisy - upper, 0.0});
    rep.max_sandwich_residual = std::max(rep.max_sandwich_residual, residual);
    if (residual > kBoundTolerance) {
      std::ostringstream os;
      os.precision(6);
      os << "sandwich violated by " << residual << " at p=" << describe(p);
      rep.residuals.push_back(os.str());
    }
  };

  const auto grid = simplex_grid(n, static_cast<int>(grid_resolution));
  rep.grid_points = grid.size();
  std::vector<QueryRisks> risks(grid.size());
  Vector p(static_cast<Index>(n));
  const double g = static_cast<double>(grid_resolution);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (Index c = 0; c < p.size(); ++c) p(c) = grid[k][static_cast<std::size_t>(c)] / g;
    risks[k] = per_query_risks(p, 0, eta, q);
    sandwich(p, risks[k]);
  }

  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < random_samples; ++s) {
    const Vector f = sample_simplex(n, rng());
    sandwich(f, per_query_risks(f, 0, eta, q));
  }

  double clean_min = std::numeric_limits<double>::infinity();
  double noisy_min = std::numeric_limits<double>::infinity();
  for (const QueryRisks& r : risks) {
    clean_min = std::min(clean_min, r.clean);
    noisy_min = std::min(noisy_min, r.noisy);
  }
  double clean_at_noisy = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (risks[k].clean <= clean_min + kIdentityTolerance)
      rep.clean_minimizers.push_back(grid[k]);
    if (risks[k].noisy <= noisy_min + kIdentityTolerance) {
      rep.noisy_minimizers.push_back(grid[k]);
      clean_at_noisy = std::max(clean_at_noisy, risks[k].clean);
    }
  }
  // Both directions of the query share the same per-direction minimum.
  rep.clean_risk_min = 2.0 * clean_min;
  rep.noisy_risk_min = 2.0 * noisy_min;
  rep.clean_risk_at_noisy_min = 2.0 * clean_at_noisy;
  rep.gap = rep.clean_risk_min - rep.clean_risk_at_noisy_min;
  rep.minimizers_equal = rep.clean_minimizers == rep.noisy_minimizers;
  rep.gap_within_bounds = rep.gap <= rep.bound_hi + kBoundTolerance &&
                          rep.gap >= rep.bound_lo - kBoundTolerance;
  return rep;
}

}  // namespace crcl
