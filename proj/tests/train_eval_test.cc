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
#include "crcl/train_eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "crcl/errors.h"
#include "test_support.h"

namespace crcl {
namespace {

GenConfig toy_gen(std::size_t n, std::uint64_t seed) {
  GenConfig g;
  g.n = n;
  g.latent_dim = 4;
  g.d_v = 8;
  g.d_t = 8;
  g.noise_std = 0.3;
  g.seed = seed;
  return g;
}

TrainConfig toy_config() {
  TrainConfig c;
  c.batch_size = 16;
  c.embed_dim = 4;
  c.scc.piece_lengths = {2, 2, 3};
  c.lr_decay_epoch = 2;
  c.seed = 5;
  return c;
}

// Rank of the true match by sorting all candidates, ties by index.
std::size_t argsort_rank(const Matrix& sim, Index q, bool by_row) {
  std::vector<Index> order(static_cast<std::size_t>(sim.rows()));
  std::iota(order.begin(), order.end(), 0);
  auto score = [&](Index j) { return by_row ? sim(q, j) : sim(j, q); };
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return score(a) > score(b); });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), q) - order.begin());
}

TEST(Recalls, IdentityIsPerfect) {
  const EvalResult r = recalls_from_similarity(Matrix::Identity(20, 20));
  EXPECT_EQ(r.rsum, 600.0);
  EXPECT_EQ(r.i2t[0], 100.0);
}

TEST(Recalls, MatchesArgsortOracle) {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 30);
    Matrix s(n, n);
    // Coarse values force ties.
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) s(i, j) = static_cast<double>(rng() % 5);
    const EvalResult r = recalls_from_similarity(s);
    const std::array<std::size_t, 3> ks = {1, 5, 10};
    for (std::size_t k = 0; k < 3; ++k) {
      double i2t = 0, t2i = 0;
      for (Index q = 0; q < n; ++q) {
        i2t += argsort_rank(s, q, true) < ks[k];
        t2i += argsort_rank(s, q, false) < ks[k];
      }
      EXPECT_DOUBLE_EQ(r.i2t[k], 100.0 * i2t / static_cast<double>(n));
      EXPECT_DOUBLE_EQ(r.t2i[k], 100.0 * t2i / static_cast<double>(n));
    }
  }
}

TEST(Evaluate, RejectsNoisyTestSets) {
  const PairedDataset noisy = inject_noise(generate_bimodal(toy_gen(20, 1)), 0.5, 1);
  const EncoderParams p = EncoderParams::random(8, 8, 4, 1);
  EXPECT_THROW(evaluate(p, noisy), ValidationError);
}

TEST(CorrectionQuality, AucMatchesPairCounting) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng() % 50;
    std::vector<double> y(n);
    std::vector<bool> flags(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<double>(rng() % 6) / 5.0;
      flags[i] = rng() % 3 == 0;
    }
    flags[0] = true;
    flags[1] = false;
    double wins = 0, pairs = 0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (flags[a] && !flags[b]) {
          pairs += 1;
          wins += y[a] < y[b] ? 1.0 : (y[a] == y[b] ? 0.5 : 0.0);
        }
    const auto q = correction_quality(y, flags);
    ASSERT_TRUE(q.auc.has_value());
    EXPECT_NEAR(*q.auc, wins / pairs, 1e-12);
  }
}

TEST(CorrectionQuality, DegenerateWithoutNoise) {
  const std::vector<double> y = {0.5, 0.7};
  const auto q = correction_quality(y, {false, false});
  EXPECT_FALSE(q.auc.has_value());
  EXPECT_FALSE(q.mean_label_noisy.has_value());
  EXPECT_DOUBLE_EQ(*q.mean_label_clean, 0.6);
}

TEST(ForwardBackward, PredictionsAverageBothDirections) {
  std::mt19937_64 rng(52);
  const Matrix x = testing::random_matrix(5, 8, rng);
  const Matrix t = testing::random_matrix(5, 8, rng);
  const EncoderParams p = EncoderParams::random(8, 8, 4, 3);
  const std::vector<double> y(5, 1.0);
  const BatchStep step = forward_backward(p, x, t, LossSpec{}, y);
  const Embeddings e = encode(p, x, t);
  const auto ctx = SimilarityContext::build(similarity_matrix(e.images, e.texts), 0.05);
  for (Index i = 0; i < 5; ++i)
    EXPECT_NEAR(step.predictions(i), 0.5 * (ctx.p_row(i, i) + ctx.p_col(i, i)), 1e-15);
  EXPECT_NEAR(step.loss, batch_loss(ctx, y, AclConfig{}).value, 1e-12);
}

TEST(Trainer, ScheduleShapesHistory) {
  const PairedDataset ds = inject_noise(generate_bimodal(toy_gen(64, 2)), 0.5, 3);
  const TrainResult r = train(ds, toy_config());
  ASSERT_EQ(r.history.size(), 7u);
  const std::vector<std::size_t> pieces = {1, 1, 2, 2, 3, 3, 3};
  const std::vector<std::size_t> epochs = {1, 2, 1, 2, 1, 2, 3};
  for (std::size_t e = 0; e < 7; ++e) {
    EXPECT_EQ(r.history[e].epoch, e + 1);
    EXPECT_EQ(r.history[e].piece, pieces[e]);
    EXPECT_EQ(r.history[e].epoch_in_piece, epochs[e]);
    std::size_t total = 0;
    for (std::size_t b = 0; b < kHistogramBins; ++b)
      total += r.history[e].clean_hist[b] + r.history[e].noisy_hist[b];
    EXPECT_EQ(total, 64u);
  }
  // Decay applies only to the final piece past lr_decay_epoch.
  EXPECT_DOUBLE_EQ(r.history[3].learning_rate, 0.05);
  EXPECT_DOUBLE_EQ(r.history[5].learning_rate, 0.05);
  EXPECT_DOUBLE_EQ(r.history[6].learning_rate, 0.005);
  EXPECT_TRUE(r.state.finished());
}

TEST(Trainer, WithoutCorrectionRunsOneLongPiece) {
  const PairedDataset ds = inject_noise(generate_bimodal(toy_gen(64, 2)), 0.5, 3);
  TrainConfig cfg = toy_config();
  cfg.use_scc = false;
  const TrainResult r = train(ds, cfg);
  ASSERT_EQ(r.history.size(), 7u);
  for (const auto& rec : r.history) EXPECT_EQ(rec.piece, 1u);
  EXPECT_DOUBLE_EQ(r.history[1].learning_rate, 0.05);
  EXPECT_DOUBLE_EQ(r.history[2].learning_rate, 0.005);
}

TEST(Trainer, DeterministicAcrossRuns) {
  const PairedDataset ds = inject_noise(generate_bimodal(toy_gen(64, 4)), 0.4, 5);
  const PairedDataset val = generate_split(toy_gen(64, 4), 16, 1);
  const TrainResult a = train(ds, toy_config(), val);
  const TrainResult b = train(ds, toy_config(), val);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  EXPECT_EQ(a.params.image_proj, b.params.image_proj);
  EXPECT_EQ(a.params.text_proj, b.params.text_proj);
  EXPECT_TRUE(a.state == b.state);
}

TEST(Trainer, ResumeMidPieceMatchesUninterruptedRun) {
  const PairedDataset ds = inject_noise(generate_bimodal(toy_gen(64, 6)), 0.4, 7);
  const PairedDataset val = generate_split(toy_gen(64, 6), 16, 1);
  const TrainResult full = train(ds, toy_config(), val);
  for (std::size_t stop : {1u, 2u, 5u}) {
    Trainer first(ds, toy_config(), val);
    for (std::size_t e = 0; e < stop; ++e) first.run_epoch();
    // Round-trip through text to mimic a checkpoint file.
    const auto ckpt = nlohmann::json::parse(first.checkpoint().dump());
    Trainer second = Trainer::resume(ds, ckpt, val);
    second.run();
    EXPECT_EQ(history_csv(second.history()), history_csv(full.history)) << stop;
    EXPECT_EQ(second.params().image_proj, full.params.image_proj);
    EXPECT_TRUE(second.state() == full.state);
  }
}

TEST(Trainer, ResumeRejectsOtherDataset) {
  const PairedDataset ds = inject_noise(generate_bimodal(toy_gen(64, 6)), 0.4, 7);
  const PairedDataset other = inject_noise(generate_bimodal(toy_gen(64, 8)), 0.4, 7);
  Trainer t(ds, toy_config());
  t.run_epoch();
  EXPECT_THROW(Trainer::resume(other, t.checkpoint()), ValidationError);
}

TEST(Trainer, DivergenceCarriesSnapshot) {
  const PairedDataset ds = generate_bimodal(toy_gen(64, 9));
  TrainConfig cfg = toy_config();
  cfg.learning_rate = 1e308;
  Trainer t(ds, cfg);
  try {
    t.run();
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.snapshot().at("version"), 1);
    EXPECT_TRUE(e.snapshot().contains("state"));
  }
}

TEST(Trainer, RejectsBadConfig) {
  const PairedDataset ds = generate_bimodal(toy_gen(64, 9));
  TrainConfig cfg = toy_config();
  cfg.batch_size = 128;
  EXPECT_THROW(Trainer(ds, cfg), ConfigError);
  cfg = toy_config();
  cfg.loss.fixed_q = 2.0;
  EXPECT_THROW(Trainer(ds, cfg), ConfigError);
}

TEST(TrainConfigJson, RoundTrips) {
  TrainConfig c = toy_config();
  c.loss.kind = LossKind::kComplementaryOnly;
  c.loss.fixed_q = 0.3;
  c.use_scc = false;
  const nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.loss.fixed_q, 0.3);
  nlohmann::json future = j;
  future["schema_version"] = 2;
  EXPECT_THROW(future.get<TrainConfig>(), ConfigError);
}

TEST(HistoryCsv, RoundTripsAndRejectsMalformedRows) {
  const PairedDataset ds = inject_noise(generate_bimodal(toy_gen(64, 10)), 0.4, 1);
  const PairedDataset val = generate_split(toy_gen(64, 10), 16, 1);
  TrainConfig cfg = toy_config();
  const TrainResult r = train(ds, cfg, val);
  const std::string csv = history_csv(r.history);
  EXPECT_EQ(parse_history_csv(csv), r.history);
  EXPECT_EQ(history_csv(parse_history_csv(csv)), csv);
  EXPECT_THROW(parse_history_csv("nope\n"), ParseError);
  const std::string header = csv.substr(0, csv.find('\n') + 1);
  try {
    parse_history_csv(header + "1,2,3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), header.size());
  }
}

TEST(ModelFile, RoundTripsBitExactly) {
  const EncoderParams p = EncoderParams::random(7, 5, 3, 11);
  const auto dir = testing::scratch_dir("model_file");
  save_model(p, dir / "m.bin");
  const EncoderParams back = load_model(dir / "m.bin");
  EXPECT_EQ(back.image_proj, p.image_proj);
  EXPECT_EQ(back.text_proj, p.text_proj);
  {
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << "CRCLDS01garbage";
  }
  EXPECT_THROW(load_model(dir / "bad.bin"), ParseError);
}

TEST(HistogramBin, Edges) {
  EXPECT_EQ(histogram_bin(0.0), 0u);
  EXPECT_EQ(histogram_bin(1.0), kHistogramBins - 1);
  EXPECT_EQ(histogram_bin(0.5), kHistogramBins / 2);
}

}  // namespace
}  // namespace crcl
