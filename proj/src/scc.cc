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
#include "crcl/scc.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crcl/common.h"
#include "crcl/errors.h"

namespace crcl {

std::size_t SccConfig::total_epochs() const {
  return std::accumulate(piece_lengths.begin(), piece_lengths.end(),
                         std::size_t{0});
}

void SccConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0))
    throw ConfigError("SCC: beta must lie in (0, 1)");
  if (!(epsilon >= 0.0 && epsilon < 1.0))
    throw ConfigError("SCC: epsilon must lie in [0, 1)");
  if (piece_lengths.empty())
    throw ConfigError("SCC: at least one piece is required");
  for (std::size_t len : piece_lengths)
    if (len == 0) throw ConfigError("SCC: piece lengths must be >= 1");
}

void to_json(nlohmann::json& j, const SccConfig& cfg) {
  j = nlohmann::json{{"beta", cfg.beta},
                     {"epsilon", cfg.epsilon},
                     {"freeze_epochs", cfg.freeze_epochs},
                     {"piece_lengths", cfg.piece_lengths}};
}

void from_json(const nlohmann::json& j, SccConfig& cfg) {
  SccConfig d;
  cfg.beta = j.value("beta", d.beta);
  cfg.epsilon = j.value("epsilon", d.epsilon);
  cfg.freeze_epochs = j.value("freeze_epochs", d.freeze_epochs);
  cfg.piece_lengths = j.value("piece_lengths", d.piece_lengths);
}

std::uint64_t piece_seed(std::uint64_t master, std::size_t piece) {
  return mix_seed(master, 0x7069656365ULL + piece);
}

std::vector<double> threshold_labels(std::span<const double> labels,
                                     double epsilon) {
  std::vector<double> out(labels.begin(), labels.end());
  for (double& y : out)
    if (y < epsilon) y = 0.0;
  return out;
}

CorrespondenceState::CorrespondenceState(std::size_t n, SccConfig cfg)
    : cfg_(std::move(cfg)),
      labels_(n, 1.0),
      preds_(n, 0.0),
      seen_(n, false) {
  cfg_.validate();
  if (n == 0) throw ConfigError("SCC: state needs at least one pair");
}

void CorrespondenceState::record_prediction(std::size_t i, double p_hat) {
  if (finished_) throw StateError("SCC: schedule already finished");
  if (i >= labels_.size()) throw DomainError("SCC: pair index out of range");
  if (!(p_hat >= 0.0 && p_hat <= 1.0))
    throw DomainError("SCC: prediction must lie in [0, 1]");
  if (seen_[i])
    throw StateError("SCC: pair " + std::to_string(i) +
                     " already recorded this epoch");
  preds_[i] = p_hat;
  seen_[i] = true;
  ++recorded_;
}

void CorrespondenceState::advance_epoch() {
  if (finished_) throw StateError("SCC: schedule already finished");
  if (piece_start_pending_)
    throw StateError("SCC: begin_piece() must precede the next epoch");
  if (recorded_ == 0)
    throw StateError("SCC: advance_epoch() before any prediction was recorded");

  std::size_t next_piece = piece_;
  std::size_t next_epoch = epoch_ + 1;
  if (next_epoch > cfg_.piece_lengths[piece_ - 1]) {
    if (piece_ == cfg_.piece_lengths.size()) {
      finished_ = true;
      seen_.assign(seen_.size(), false);
      recorded_ = 0;
      return;
    }
    ++next_piece;
    next_epoch = 1;
  }

  if (next_epoch > cfg_.freeze_epochs) {
    const bool direct = next_piece == 1 && next_epoch == cfg_.freeze_epochs + 1;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!seen_[i]) continue;
      labels_[i] = direct ? preds_[i]
                          : cfg_.beta * labels_[i] + (1.0 - cfg_.beta) * preds_[i];
    }
  }

  piece_start_pending_ = next_piece != piece_;
  piece_ = next_piece;
  epoch_ = next_epoch;
  seen_.assign(seen_.size(), false);
  recorded_ = 0;
}

void CorrespondenceState::begin_piece(
    const std::function<void(std::size_t piece)>& reinit) {
  if (!piece_start_pending_)
    throw StateError("SCC: begin_piece() without a completed piece");
  if (reinit) reinit(piece_);
  piece_start_pending_ = false;
}

std::vector<double> CorrespondenceState::corrected_labels() const {
  return threshold_labels(labels_, cfg_.epsilon);
}

std::size_t CorrespondenceState::global_epoch() const {
  std::size_t done = 0;
  for (std::size_t j = 0; j + 1 < piece_; ++j) done += cfg_.piece_lengths[j];
  return done + epoch_;
}

nlohmann::json CorrespondenceState::to_json() const {
  nlohmann::json seen = nlohmann::json::array();
  for (bool s : seen_) seen.push_back(s);
  return nlohmann::json{{"version", 1},
                        {"config", cfg_},
                        {"labels", labels_},
                        {"predictions", preds_},
                        {"seen", seen},
                        {"piece", piece_},
                        {"epoch_in_piece", epoch_},
                        {"piece_start_pending", piece_start_pending_},
                        {"finished", finished_}};
}

CorrespondenceState CorrespondenceState::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1)
    throw ValidationError("SCC snapshot: unsupported version");
  CorrespondenceState s(j.at("labels").size(), j.at("config").get<SccConfig>());
  s.labels_ = j.at("labels").get<std::vector<double>>();
  s.preds_ = j.at("predictions").get<std::vector<double>>();
  s.seen_ = j.at("seen").get<std::vector<bool>>();
  s.piece_ = j.at("piece").get<std::size_t>();
  s.epoch_ = j.at("epoch_in_piece").get<std::size_t>();
  s.piece_start_pending_ = j.at("piece_start_pending").get<bool>();
  s.finished_ = j.at("finished").get<bool>();
  s.recorded_ = static_cast<std::size_t>(
      std::count(s.seen_.begin(), s.seen_.end(), true));
  const std::size_t n = s.labels_.size();
  if (s.preds_.size() != n || s.seen_.size() != n)
    throw ValidationError("SCC snapshot: inconsistent vector sizes");
  if (s.piece_ < 1 || s.piece_ > s.cfg_.piece_lengths.size() || s.epoch_ < 1 ||
      s.epoch_ > s.cfg_.piece_lengths[s.piece_ - 1])
    throw ValidationError("SCC snapshot: piece/epoch out of range");
  for (double y : s.labels_)
    if (!(y >= 0.0 && y <= 1.0))
      throw ValidationError("SCC snapshot: label outside [0, 1]");
  return s;
}

}  // namespace crcl
