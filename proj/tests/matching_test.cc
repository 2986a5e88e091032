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

#include <cmath>

#include <gtest/gtest.h>

#include "crcl/errors.h"
#include "test_support.h"

namespace crcl {
namespace {

using testing::random_matrix;
using testing::random_similarity;

TEST(Encode, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(1);
  const EncoderParams p = EncoderParams::random(5, 4, 3, 17);
  const Matrix x = random_matrix(6, 5, rng);
  const Matrix t = random_matrix(6, 4, rng);
  const Embeddings e = encode(p, x, t);
  for (Index r = 0; r < 6; ++r) {
    std::vector<double> zi(3, 0.0), zt(3, 0.0);
    for (Index c = 0; c < 3; ++c) {
      for (Index k = 0; k < 5; ++k) zi[c] += x(r, k) * p.image_proj(k, c);
      for (Index k = 0; k < 4; ++k) zt[c] += t(r, k) * p.text_proj(k, c);
    }
    double ni = 0, nt = 0;
    for (Index c = 0; c < 3; ++c) ni += zi[c] * zi[c], nt += zt[c] * zt[c];
    for (Index c = 0; c < 3; ++c) {
      EXPECT_NEAR(e.images(r, c), zi[c] / std::sqrt(ni), 1e-14);
      EXPECT_NEAR(e.texts(r, c), zt[c] / std::sqrt(nt), 1e-14);
    }
  }
}

TEST(Encode, RejectsMismatchedDims) {
  const EncoderParams p = EncoderParams::random(5, 4, 3, 0);
  EXPECT_THROW(encode(p, Matrix::Ones(2, 4), Matrix::Ones(2, 4)), ConfigError);
}

TEST(NormalizeRows, UnitNormsAndZeroRowStaysFinite) {
  std::mt19937_64 rng(2);
  Matrix m = random_matrix(5, 7, rng);
  m.row(2).setZero();
  const Matrix u = normalize_rows(m);
  for (Index r = 0; r < 5; ++r) {
    if (r == 2) {
      EXPECT_EQ(u.row(r).norm(), 0.0);
    } else {
      EXPECT_NEAR(u.row(r).norm(), 1.0, 1e-12);
    }
  }
  EXPECT_TRUE(u.allFinite());
}

TEST(NormalizeRows, BackwardMatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  const Matrix raw = random_matrix(4, 3, rng);
  const Matrix g = random_matrix(4, 3, rng);
  const Matrix analytic = normalize_rows_backward(raw, g);
  const double h = 1e-6;
  for (Index r = 0; r < raw.rows(); ++r) {
    for (Index c = 0; c < raw.cols(); ++c) {
      Matrix plus = raw, minus = raw;
      plus(r, c) += h;
      minus(r, c) -= h;
      const double numeric =
          ((normalize_rows(plus) - normalize_rows(minus)).cwiseProduct(g)).sum() / (2 * h);
      EXPECT_NEAR(analytic(r, c), numeric, 1e-8);
    }
  }
}

TEST(Similarity, EqualsPairwiseDotProducts) {
  std::mt19937_64 rng(4);
  const Matrix a = normalize_rows(random_matrix(5, 6, rng));
  const Matrix b = normalize_rows(random_matrix(5, 6, rng));
  const Matrix s = similarity_matrix(a, b);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      double dot = 0;
      for (Index k = 0; k < 6; ++k) dot += a(i, k) * b(j, k);
      EXPECT_NEAR(s(i, j), dot, 1e-14);
    }
}

TEST(MatchingProbs, TwoByTwoClosedForm) {
  Matrix s(2, 2);
  s << 1, 0, 0, 1;
  const auto [pr, pc] = matching_probs(s, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(pr(0, 0), e / (e + 1), 1e-15);  // 0.7311
  EXPECT_NEAR(pr(0, 1), 1 / (e + 1), 1e-15);  // 0.2689
  EXPECT_NEAR(pc(1, 1), e / (e + 1), 1e-15);
  EXPECT_NEAR(pr(0, 0), 0.7311, 1e-4);
}

TEST(MatchingProbs, RowsAndColumnsAreDistributions) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index k = 2 + static_cast<Index>(rng() % 8);
    const Matrix s = random_similarity(k, rng);
    const double tau = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
    const auto [pr, pc] = matching_probs(s, tau);
    for (Index i = 0; i < k; ++i) {
      EXPECT_NEAR(pr.row(i).sum(), 1.0, 1e-12);
      EXPECT_NEAR(pc.col(i).sum(), 1.0, 1e-12);
      for (Index j = 0; j < k; ++j) {
        EXPECT_GE(pr(i, j), 0.0);
        EXPECT_NEAR(std::log(pr(i, j)), log_p_row(s, tau, i, j), 1e-9);
        EXPECT_NEAR(std::log(pc(i, j)), log_p_col(s, tau, i, j), 1e-9);
      }
    }
    // Column softmax of S is the row softmax of S^T.
    const auto [pr_t, pc_t] = matching_probs(s.transpose(), tau);
    EXPECT_LT((pc - pr_t.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MatchingProbs, ShiftInvariantPerRow) {
  std::mt19937_64 rng(6);
  const Matrix s = random_similarity(5, rng);
  Matrix shifted = s;
  for (Index i = 0; i < 5; ++i) shifted.row(i).array() += 0.3 * static_cast<double>(i);
  EXPECT_LT((matching_probs(s, 0.1).first - matching_probs(shifted, 0.1).first)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(MatchingProbs, SmallTemperatureStaysFinite) {
  Matrix s(3, 3);
  s << 1, -1, 0.5, -1, 1, 0.2, 0.9, 0.8, 1;
  const auto [pr, pc] = matching_probs(s, 1e-4);
  EXPECT_TRUE(pr.allFinite());
  EXPECT_TRUE(pc.allFinite());
  EXPECT_NEAR(pr(0, 0), 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(log_p_row(s, 1e-4, 0, 1)));
}

TEST(MatchingProbs, RejectsBadTemperature) {
  const Matrix s = Matrix::Identity(3, 3);
  EXPECT_THROW(matching_probs(s, 0.0), DomainError);
  EXPECT_THROW(matching_probs(s, -0.1), DomainError);
  EXPECT_THROW(SimilarityContext::build(s, 0.0), DomainError);
}

}  // namespace
}  // namespace crcl
