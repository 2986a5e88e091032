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
#ifndef CRCL_SCC_H_
#define CRCL_SCC_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace crcl {

struct SccConfig {
  double beta = 0.8;
  double epsilon = 0.1;
  std::size_t freeze_epochs = 2;
  std::vector<std::size_t> piece_lengths = {7, 7, 7, 32};

  std::size_t total_epochs() const;
  void validate() const;
  bool operator==(const SccConfig&) const = default;
};

void to_json(nlohmann::json& j, const SccConfig& cfg);
void from_json(const nlohmann::json& j, SccConfig& cfg);

// Seed used to re-initialize parameters at the start of piece `piece`
// (1-based).
std::uint64_t piece_seed(std::uint64_t master, std::size_t piece);

// Zeroes labels below epsilon; everything else passes through.
std::vector<double> threshold_labels(std::span<const double> labels,
                                     double epsilon);

// Soft correspondence labels driven by momentum over per-epoch matching
// predictions, organized into self-refining pieces. Pieces and epochs are
// 1-based. Labels start at 1 and change only in advance_epoch().
class CorrespondenceState {
 public:
  CorrespondenceState(std::size_t n, SccConfig cfg);

  // Stores p_hat = (p_row(i,i) + p_col(i,i)) / 2 for the current epoch.
  void record_prediction(std::size_t i, double p_hat);

  // Closes the current epoch and computes the labels of the next one:
  //   next epoch t <= e_f            : labels unchanged
  //   piece 1, t == e_f + 1          : y = last prediction
  //   otherwise                      : y = beta * y + (1 - beta) * prediction
  // Pairs without a prediction this epoch keep their label. Rolls into the
  // next piece (t = 1) once t exceeds that piece's length.
  void advance_epoch();

  // True between rolling into a new piece and begin_piece().
  bool piece_start_pending() const { return piece_start_pending_; }

  // Starts a piece after the first: calls `reinit` with the 1-based piece
  // index so the trainer can re-seed its parameters and optimizer. Labels
  // carry over unchanged.
  void begin_piece(const std::function<void(std::size_t piece)>& reinit);

  std::vector<double> corrected_labels() const;

  std::size_t size() const { return labels_.size(); }
  std::size_t piece() const { return piece_; }
  std::size_t epoch_in_piece() const { return epoch_; }
  std::size_t global_epoch() const;
  bool finished() const { return finished_; }
  const SccConfig& config() const { return cfg_; }
  const std::vector<double>& labels() const { return labels_; }
  const std::vector<double>& predictions() const { return preds_; }
  std::size_t recorded_this_epoch() const { return recorded_; }

  nlohmann::json to_json() const;
  static CorrespondenceState from_json(const nlohmann::json& j);

  bool operator==(const CorrespondenceState&) const = default;

 private:
  SccConfig cfg_;
  std::vector<double> labels_;
  std::vector<double> preds_;
  std::vector<bool> seen_;
  std::size_t recorded_ = 0;
  std::size_t piece_ = 1;
  std::size_t epoch_ = 1;
  bool piece_start_pending_ = false;
  bool finished_ = false;
};

}  // namespace crcl

#endif  // CRCL_SCC_H_
