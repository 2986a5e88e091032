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
#ifndef CRCL_TRAIN_EVAL_H_
#define CRCL_TRAIN_EVAL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crcl/common.h"
#include "crcl/errors.h"
#include "crcl/losses.h"
#include "crcl/matching.h"
#include "crcl/scc.h"
#include "crcl/synth_data.h"

namespace crcl {

inline constexpr std::size_t kHistogramBins = 32;

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 0.05;
  double momentum = 0.9;
  // Within the final piece, epochs after this one run at
  // learning_rate * lr_decay_factor. 0 disables the decay.
  std::size_t lr_decay_epoch = 15;
  double lr_decay_factor = 0.1;
  SccConfig scc;
  LossSpec loss;
  // Without correction every pair keeps label 1 and the schedule collapses
  // to a single piece of the same total length.
  bool use_scc = true;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 16;

  void validate() const;
  // Piece schedule actually executed (see use_scc).
  SccConfig effective_schedule() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);
void to_json(nlohmann::json& j, const LossSpec& spec);
void from_json(const nlohmann::json& j, LossSpec& spec);

struct EvalResult {
  std::array<double, 3> i2t{};  // R@1, R@5, R@10 in percent
  std::array<double, 3> t2i{};
  double rsum = 0.0;
  std::optional<double> correction_auc;
  std::optional<double> mean_label_clean;
  std::optional<double> mean_label_noisy;
};

void to_json(nlohmann::json& j, const EvalResult& r);

// Recalls for a square query-by-item similarity matrix whose true matches sit
// on the diagonal. Ties rank the lower index first.
EvalResult recalls_from_similarity(const Matrix& sim);

// Full-set retrieval on a clean test set.
EvalResult evaluate(const EncoderParams& params, const PairedDataset& test);

struct CorrectionQuality {
  std::optional<double> auc;  // absent when all pairs share one flag
  std::optional<double> mean_label_clean;
  std::optional<double> mean_label_noisy;
};

// AUC of (1 - y) as a detector of noisy pairs, plus mean labels per group.
CorrectionQuality correction_quality(std::span<const double> labels,
                                     const std::vector<bool>& noise_flags);
CorrectionQuality correction_quality(const CorrespondenceState& state,
                                     const PairedDataset& ds);

// One forward/backward pass of the two-tower model over a batch.
struct BatchStep {
  double loss = 0.0;
  EncoderParams grad;
  Vector predictions;  // (p_row(i,i) + p_col(i,i)) / 2
};

BatchStep forward_backward(const EncoderParams& params, const Matrix& images,
                           const Matrix& texts, const LossSpec& spec,
                           std::span<const double> labels);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t piece = 0;
  std::size_t epoch_in_piece = 0;
  double learning_rate = 0.0;
  double mean_batch_loss = 0.0;
  std::optional<EvalResult> validation;
  std::array<std::size_t, kHistogramBins> clean_hist{};
  std::array<std::size_t, kHistogramBins> noisy_hist{};

  bool operator==(const EpochRecord& o) const;
};

using History = std::vector<EpochRecord>;

std::size_t histogram_bin(double label);

std::string history_csv(const History& history);
History parse_history_csv(const std::string& csv);
void export_history(const History& history, const std::filesystem::path& path);

// Raised when a batch loss becomes non-finite; carries a checkpoint taken
// just before the failing batch.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, nlohmann::json snapshot)
      : NumericError(what), snapshot_(std::move(snapshot)) {}
  const nlohmann::json& snapshot() const { return snapshot_; }

 private:
  nlohmann::json snapshot_;
};

// Epoch-at-a-time driver of the piece / epoch / batch loop. Randomness is
// derived from (seed, piece) and (seed, epoch), so a checkpoint only needs
// the parameters, optimizer velocity, correspondence state and history.
class Trainer {
 public:
  Trainer(const PairedDataset& train, TrainConfig cfg,
          std::optional<PairedDataset> validation = std::nullopt);

  bool done() const { return state_.finished(); }
  void run_epoch();
  void run();

  const TrainConfig& config() const { return cfg_; }
  const EncoderParams& params() const { return params_; }
  const CorrespondenceState& state() const { return state_; }
  const History& history() const { return history_; }

  nlohmann::json checkpoint() const;
  static Trainer resume(const PairedDataset& train, const nlohmann::json& ckpt,
                        std::optional<PairedDataset> validation = std::nullopt);

 private:
  void reinitialize(std::size_t piece);

  TrainConfig cfg_;
  Matrix images_;
  Matrix texts_;  // already permuted by the dataset pairing
  std::vector<bool> flags_;
  std::uint64_t dataset_hash_ = 0;
  std::optional<PairedDataset> validation_;
  EncoderParams params_;
  EncoderParams velocity_;
  CorrespondenceState state_;
  History history_;
};

struct TrainResult {
  EncoderParams params;
  CorrespondenceState state;
  History history;
};

TrainResult train(const PairedDataset& ds, const TrainConfig& cfg,
                  std::optional<PairedDataset> validation = std::nullopt);

// Binary model file: magic "CRCLMD01" | u32 version | u32 reserved |
// u64 d_v | u64 d_t | u64 d | f64 image_proj (row-major) | f64 text_proj.
void save_model(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_model(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace crcl

#endif  // CRCL_TRAIN_EVAL_H_
