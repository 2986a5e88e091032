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
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "byte_io.h"

namespace crcl {
namespace {

using internal::ByteReader;
using internal::ByteWriter;

constexpr std::string_view kModelMagic = "CRCLMD01";
constexpr std::uint32_t kModelVersion = 1;
constexpr int kCheckpointVersion = 1;
constexpr int kConfigSchemaVersion = 1;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.row(static_cast<Index>(k)) = m.row(static_cast<Index>(rows[k]));
  return out;
}

void write_bytes(const std::vector<unsigned char>& bytes,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train: batch size must be >= 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train: learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0))
    throw ConfigError("train: lr decay factor must lie in (0, 1]");
  if (embed_dim < 1) throw ConfigError("train: embedding dim must be >= 1");
  if (!(loss.acl.tau > 0.0)) throw ConfigError("train: tau must be > 0");
  if (!(loss.acl.lambda >= 0.0)) throw ConfigError("train: lambda must be >= 0");
  if (loss.fixed_q && !(*loss.fixed_q >= 0.0 && *loss.fixed_q <= 1.0))
    throw ConfigError("train: q must lie in [0, 1]");
  if (!(loss.margin > 0.0)) throw ConfigError("train: margin must be > 0");
  if (!(loss.margin_curve > 1.0))
    throw ConfigError("train: margin curve must be > 1");
  scc.validate();
}

SccConfig TrainConfig::effective_schedule() const {
  if (use_scc) return scc;
  SccConfig single = scc;
  single.piece_lengths = {scc.total_epochs()};
  return single;
}

void to_json(nlohmann::json& j, const LossSpec& spec) {
  j = nlohmann::json{{"kind", to_string(spec.kind)},
                     {"tau", spec.acl.tau},
                     {"lambda", spec.acl.lambda},
                     {"margin", spec.margin},
                     {"margin_curve", spec.margin_curve}};
  j["q"] = spec.fixed_q ? nlohmann::json(*spec.fixed_q) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, LossSpec& spec) {
  LossSpec d;
  spec.kind = loss_kind_from_string(j.value("kind", to_string(d.kind)));
  spec.acl.tau = j.value("tau", d.acl.tau);
  spec.acl.lambda = j.value("lambda", d.acl.lambda);
  spec.margin = j.value("margin", d.margin);
  spec.margin_curve = j.value("margin_curve", d.margin_curve);
  spec.fixed_q.reset();
  if (j.contains("q") && !j.at("q").is_null()) spec.fixed_q = j.at("q").get<double>();
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"schema_version", kConfigSchemaVersion},
                     {"batch_size", cfg.batch_size},
                     {"learning_rate", cfg.learning_rate},
                     {"momentum", cfg.momentum},
                     {"lr_decay_epoch", cfg.lr_decay_epoch},
                     {"lr_decay_factor", cfg.lr_decay_factor},
                     {"scc", cfg.scc},
                     {"loss", cfg.loss},
                     {"use_scc", cfg.use_scc},
                     {"seed", cfg.seed},
                     {"embed_dim", cfg.embed_dim}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion)
    throw ConfigError("train config: unsupported schema_version");
  TrainConfig d;
  cfg.batch_size = j.value("batch_size", d.batch_size);
  cfg.learning_rate = j.value("learning_rate", d.learning_rate);
  cfg.momentum = j.value("momentum", d.momentum);
  cfg.lr_decay_epoch = j.value("lr_decay_epoch", d.lr_decay_epoch);
  cfg.lr_decay_factor = j.value("lr_decay_factor", d.lr_decay_factor);
  cfg.scc = j.contains("scc") ? j.at("scc").get<SccConfig>() : d.scc;
  cfg.loss = j.contains("loss") ? j.at("loss").get<LossSpec>() : d.loss;
  cfg.use_scc = j.value("use_scc", d.use_scc);
  cfg.seed = j.value("seed", d.seed);
  cfg.embed_dim = j.value("embed_dim", d.embed_dim);
}

// ---------------------------------------------------------------------------
// Evaluation

void to_json(nlohmann::json& j, const EvalResult& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"i2t", {{"r1", r.i2t[0]}, {"r5", r.i2t[1]}, {"r10", r.i2t[2]}}},
                     {"t2i", {{"r1", r.t2i[0]}, {"r5", r.t2i[1]}, {"r10", r.t2i[2]}}},
                     {"rsum", r.rsum},
                     {"correction_auc", opt(r.correction_auc)},
                     {"mean_label_clean", opt(r.mean_label_clean)},
                     {"mean_label_noisy", opt(r.mean_label_noisy)}};
}

EvalResult recalls_from_similarity(const Matrix& sim) {
  if (sim.rows() != sim.cols() || sim.rows() < 1)
    throw ConfigError("recalls: similarity matrix must be square and non-empty");
  const Index n = sim.rows();
  constexpr std::array<Index, 3> ks = {1, 5, 10};
  std::array<std::size_t, 3> hit_i2t{}, hit_t2i{};
  for (Index q = 0; q < n; ++q) {
    Index rank_i2t = 0, rank_t2i = 0;
    const double own_row = sim(q, q);
    for (Index j = 0; j < n; ++j) {
      if (j == q) continue;
      if (sim(q, j) > own_row || (sim(q, j) == own_row && j < q)) ++rank_i2t;
      if (sim(j, q) > own_row || (sim(j, q) == own_row && j < q)) ++rank_t2i;
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      hit_i2t[k] += rank_i2t < ks[k];
      hit_t2i[k] += rank_t2i < ks[k];
    }
  }
  EvalResult r;
  for (std::size_t k = 0; k < ks.size(); ++k) {
    r.i2t[k] = 100.0 * static_cast<double>(hit_i2t[k]) / static_cast<double>(n);
    r.t2i[k] = 100.0 * static_cast<double>(hit_t2i[k]) / static_cast<double>(n);
  }
  r.rsum = r.i2t[0] + r.i2t[1] + r.i2t[2] + r.t2i[0] + r.t2i[1] + r.t2i[2];
  return r;
}

EvalResult evaluate(const EncoderParams& params, const PairedDataset& test) {
  test.validate();
  if (test.noisy_count() != 0)
    throw ValidationError("evaluate: test set must have the clean pairing");
  const Embeddings emb = encode(params, test.images, test.texts);
  return recalls_from_similarity(similarity_matrix(emb.images, emb.texts));
}

CorrectionQuality correction_quality(std::span<const double> labels,
                                     const std::vector<bool>& noise_flags) {
  if (labels.size() != noise_flags.size())
    throw ConfigError("correction_quality: size mismatch");
  CorrectionQuality out;
  std::vector<double> clean, noisy;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (noise_flags[i] ? noisy : clean).push_back(labels[i]);
  auto mean = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.mean_label_clean = mean(clean);
  out.mean_label_noisy = mean(noisy);
  if (clean.empty() || noisy.empty()) return out;

  // Mann-Whitney: P(score_noisy > score_clean) + 0.5 P(tie), score = 1 - y,
  // i.e. P(y_noisy < y_clean) + 0.5 P(tie).
  std::sort(clean.begin(), clean.end());
  double wins = 0.0;
  for (double y : noisy) {
    const auto lo = std::lower_bound(clean.begin(), clean.end(), y);
    const auto hi = std::upper_bound(clean.begin(), clean.end(), y);
    wins += static_cast<double>(clean.end() - hi) +
            0.5 * static_cast<double>(hi - lo);
  }
  out.auc = wins / (static_cast<double>(clean.size()) *
                    static_cast<double>(noisy.size()));
  return out;
}

CorrectionQuality correction_quality(const CorrespondenceState& state,
                                     const PairedDataset& ds) {
  return correction_quality(state.labels(), ds.noise_flags);
}

// ---------------------------------------------------------------------------
// Forward / backward

BatchStep forward_backward(const EncoderParams& params, const Matrix& images,
                           const Matrix& texts, const LossSpec& spec,
                           std::span<const double> labels) {
  if (images.rows() != texts.rows())
    throw ConfigError("forward_backward: image and text batch sizes differ");
  require_finite(images, "image batch");
  require_finite(texts, "text batch");
  const Matrix z_img = images * params.image_proj;
  const Matrix z_txt = texts * params.text_proj;
  const Matrix u = normalize_rows(z_img);
  const Matrix v = normalize_rows(z_txt);
  const Matrix sim = (u * v.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
  const SimilarityContext ctx = SimilarityContext::build(sim, spec.acl.tau);
  const LossEvaluation eval = evaluate_batch(spec, ctx, labels);

  BatchStep step;
  step.loss = eval.value;
  step.predictions = 0.5 * (ctx.p_row.diagonal() + ctx.p_col.diagonal());
  // The clamp only trims rounding overshoot, so it is treated as identity.
  const Matrix d_u = eval.grad_sim * v;
  const Matrix d_v = eval.grad_sim.transpose() * u;
  step.grad.image_proj = images.transpose() * normalize_rows_backward(z_img, d_u);
  step.grad.text_proj = texts.transpose() * normalize_rows_backward(z_txt, d_v);
  return step;
}

// ---------------------------------------------------------------------------
// History

bool EpochRecord::operator==(const EpochRecord& o) const {
  auto same_eval = [](const std::optional<EvalResult>& a,
                      const std::optional<EvalResult>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->i2t == b->i2t && a->t2i == b->t2i && a->rsum == b->rsum;
  };
  return epoch == o.epoch && piece == o.piece &&
         epoch_in_piece == o.epoch_in_piece &&
         learning_rate == o.learning_rate &&
         mean_batch_loss == o.mean_batch_loss &&
         same_eval(validation, o.validation) && clean_hist == o.clean_hist &&
         noisy_hist == o.noisy_hist;
}

std::size_t histogram_bin(double label) {
  const double clamped = std::clamp(label, 0.0, 1.0);
  return std::min(static_cast<std::size_t>(clamped * kHistogramBins),
                  kHistogramBins - 1);
}

std::string history_csv(const History& history) {
  std::ostringstream os;
  os << "epoch,piece,epoch_in_piece,lr,mean_batch_loss,"
        "val_i2t_r1,val_i2t_r5,val_i2t_r10,val_t2i_r1,val_t2i_r5,val_t2i_r10,"
        "val_rsum";
  for (const char* group : {"clean", "noisy"})
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      char name[24];
      std::snprintf(name, sizeof(name), ",%s_h%02zu", group, b);
      os << name;
    }
  os << "\n";
  for (const EpochRecord& r : history) {
    os << r.epoch << "," << r.piece << "," << r.epoch_in_piece << ","
       << format_double(r.learning_rate) << ","
       << format_double(r.mean_batch_loss);
    if (r.validation) {
      for (double v : r.validation->i2t) os << "," << format_double(v);
      for (double v : r.validation->t2i) os << "," << format_double(v);
      os << "," << format_double(r.validation->rsum);
    } else {
      os << ",,,,,,,";
    }
    for (std::size_t c : r.clean_hist) os << "," << c;
    for (std::size_t c : r.noisy_hist) os << "," << c;
    os << "\n";
  }
  return os.str();
}

History parse_history_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,piece,", 0) != 0)
    throw ParseError("history CSV: missing header", 0);
  std::size_t offset = line.size() + 1;
  constexpr std::size_t kColumns = 12 + 2 * kHistogramBins;
  History out;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != kColumns)
      throw ParseError("history CSV: expected " + std::to_string(kColumns) +
                           " columns",
                       offset);
    try {
      EpochRecord r;
      r.epoch = std::stoull(cells[0]);
      r.piece = std::stoull(cells[1]);
      r.epoch_in_piece = std::stoull(cells[2]);
      r.learning_rate = std::stod(cells[3]);
      r.mean_batch_loss = std::stod(cells[4]);
      if (!cells[5].empty()) {
        EvalResult e;
        for (std::size_t k = 0; k < 3; ++k) {
          e.i2t[k] = std::stod(cells[5 + k]);
          e.t2i[k] = std::stod(cells[8 + k]);
        }
        e.rsum = std::stod(cells[11]);
        r.validation = e;
      }
      for (std::size_t b = 0; b < kHistogramBins; ++b) {
        r.clean_hist[b] = std::stoull(cells[12 + b]);
        r.noisy_hist[b] = std::stoull(cells[12 + kHistogramBins + b]);
      }
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("history CSV: malformed number", offset);
    }
    offset += line.size() + 1;
  }
  return out;
}

void export_history(const History& history, const std::filesystem::path& path) {
  const std::string text = history_csv(history);
  write_bytes(std::vector<unsigned char>(text.begin(), text.end()), path);
}

// ---------------------------------------------------------------------------
// Model files

void save_model(const EncoderParams& params, const std::filesystem::path& path) {
  params.validate();
  ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelVersion);
  w.u32(0);
  w.u64(static_cast<std::uint64_t>(params.image_proj.rows()));
  w.u64(static_cast<std::uint64_t>(params.text_proj.rows()));
  w.u64(static_cast<std::uint64_t>(params.embed_dim()));
  for (const Matrix* m : {&params.image_proj, &params.text_proj})
    for (Index r = 0; r < m->rows(); ++r)
      for (Index c = 0; c < m->cols(); ++c) w.f64((*m)(r, c));
  write_bytes(w.take(), path);
}

EncoderParams load_model(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  ByteReader r(bytes);
  for (char expected : kModelMagic) {
    const std::size_t at = r.offset();
    if (static_cast<char>(r.u8()) != expected)
      throw ParseError("bad model magic", at);
  }
  const std::size_t version_at = r.offset();
  if (r.u32() != kModelVersion)
    throw ParseError("unsupported model version", version_at);
  r.u32();
  const auto dv = static_cast<Index>(r.u64());
  const auto dt = static_cast<Index>(r.u64());
  const auto d = static_cast<Index>(r.u64());
  const long double need = (static_cast<long double>(dv) + dt) * d * 8.0L;
  if (dv < 0 || dt < 0 || d < 0 || need != static_cast<long double>(r.remaining()))
    throw ParseError("model payload size disagrees with header", r.offset());
  EncoderParams p;
  p.image_proj.resize(dv, d);
  p.text_proj.resize(dt, d);
  for (Matrix* m : {&p.image_proj, &p.text_proj})
    for (Index i = 0; i < m->rows(); ++i)
      for (Index c = 0; c < m->cols(); ++c) (*m)(i, c) = r.f64();
  p.validate();
  return p;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw ValidationError("matrix JSON: data size disagrees with shape");
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

// ---------------------------------------------------------------------------
// Training

Trainer::Trainer(const PairedDataset& train, TrainConfig cfg,
                 std::optional<PairedDataset> validation)
    : cfg_(std::move(cfg)),
      validation_(std::move(validation)),
      state_(train.size(), cfg_.effective_schedule()) {
  cfg_.validate();
  train.validate();
  if (train.size() < cfg_.batch_size)
    throw ConfigError("train: dataset smaller than one batch");
  images_ = train.images;
  texts_ = train.paired_texts();
  flags_ = train.noise_flags;
  dataset_hash_ = dataset_hash(train);
  if (validation_) {
    validation_->validate();
    if (validation_->images.cols() != images_.cols() ||
        validation_->texts.cols() != texts_.cols())
      throw ConfigError("train: validation dims differ from training dims");
  }
  reinitialize(1);
}

void Trainer::reinitialize(std::size_t piece) {
  params_ = EncoderParams::random(images_.cols(), texts_.cols(),
                                  static_cast<Index>(cfg_.embed_dim),
                                  piece_seed(cfg_.seed, piece));
  velocity_.image_proj = Matrix::Zero(params_.image_proj.rows(), params_.image_proj.cols());
  velocity_.text_proj = Matrix::Zero(params_.text_proj.rows(), params_.text_proj.cols());
}

void Trainer::run_epoch() {
  if (done()) throw StateError("train: schedule already finished");
  if (state_.piece_start_pending())
    state_.begin_piece([this](std::size_t piece) { reinitialize(piece); });

  const SccConfig& schedule = state_.config();
  const std::size_t global_epoch = state_.global_epoch();
  const bool final_piece = state_.piece() == schedule.piece_lengths.size();
  double lr = cfg_.learning_rate;
  if (final_piece && cfg_.lr_decay_epoch > 0 &&
      state_.epoch_in_piece() > cfg_.lr_decay_epoch)
    lr *= cfg_.lr_decay_factor;

  const std::size_t n = static_cast<std::size_t>(images_.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(mix_seed(cfg_.seed, kShuffleStream), global_epoch));
  std::shuffle(order.begin(), order.end(), rng);

  const std::vector<double> corrected = state_.corrected_labels();
  const std::size_t k = cfg_.batch_size;
  const std::size_t batches = n / k;
  std::vector<double> labels(k);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::span<const std::size_t> idx(order.data() + b * k, k);
    for (std::size_t m = 0; m < k; ++m)
      labels[m] = cfg_.use_scc ? corrected[idx[m]] : 1.0;
    const std::string where = "epoch " + std::to_string(global_epoch) +
                              ", batch " + std::to_string(b);
    BatchStep step;
    try {
      step = forward_backward(params_, gather_rows(images_, idx),
                              gather_rows(texts_, idx), cfg_.loss, labels);
    } catch (const NumericError& e) {
      throw TrainingDiverged("train: " + std::string(e.what()) + " at " + where,
                             checkpoint());
    }
    if (!std::isfinite(step.loss) || !step.grad.image_proj.allFinite() ||
        !step.grad.text_proj.allFinite())
      throw TrainingDiverged("train: non-finite loss at " + where, checkpoint());
    for (std::size_t m = 0; m < k; ++m)
      state_.record_prediction(
          idx[m], std::clamp(step.predictions(static_cast<Index>(m)), 0.0, 1.0));
    velocity_.image_proj = cfg_.momentum * velocity_.image_proj + step.grad.image_proj;
    velocity_.text_proj = cfg_.momentum * velocity_.text_proj + step.grad.text_proj;
    params_.image_proj -= lr * velocity_.image_proj;
    params_.text_proj -= lr * velocity_.text_proj;
    loss_sum += step.loss;
  }

  EpochRecord rec;
  rec.epoch = global_epoch;
  rec.piece = state_.piece();
  rec.epoch_in_piece = state_.epoch_in_piece();
  rec.learning_rate = lr;
  rec.mean_batch_loss = loss_sum / static_cast<double>(batches);
  if (validation_) rec.validation = evaluate(params_, *validation_);

  state_.advance_epoch();
  const auto& y = state_.labels();
  for (std::size_t i = 0; i < y.size(); ++i)
    ++(flags_[i] ? rec.noisy_hist : rec.clean_hist)[histogram_bin(y[i])];
  history_.push_back(rec);
}

void Trainer::run() {
  while (!done()) run_epoch();
}

nlohmann::json Trainer::checkpoint() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const EpochRecord& r : history_) {
    nlohmann::json e{{"epoch", r.epoch},
                     {"piece", r.piece},
                     {"epoch_in_piece", r.epoch_in_piece},
                     {"learning_rate", r.learning_rate},
                     {"mean_batch_loss", r.mean_batch_loss},
                     {"clean_hist", r.clean_hist},
                     {"noisy_hist", r.noisy_hist}};
    if (r.validation) e["validation"] = *r.validation;
    hist.push_back(std::move(e));
  }
  return nlohmann::json{
      {"version", kCheckpointVersion},
      {"config", cfg_},
      {"dataset_hash", hex64(dataset_hash_)},
      {"params",
       {{"image_proj", matrix_to_json(params_.image_proj)},
        {"text_proj", matrix_to_json(params_.text_proj)}}},
      {"velocity",
       {{"image_proj", matrix_to_json(velocity_.image_proj)},
        {"text_proj", matrix_to_json(velocity_.text_proj)}}},
      {"state", state_.to_json()},
      {"history", hist}};
}

Trainer Trainer::resume(const PairedDataset& train, const nlohmann::json& ckpt,
                        std::optional<PairedDataset> validation) {
  if (ckpt.value("version", 0) != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version");
  Trainer t(train, ckpt.at("config").get<TrainConfig>(), std::move(validation));
  if (ckpt.at("dataset_hash").get<std::string>() != hex64(t.dataset_hash_))
    throw ValidationError("checkpoint: dataset hash does not match");
  const auto& p = ckpt.at("params");
  const auto& v = ckpt.at("velocity");
  t.params_.image_proj = matrix_from_json(p.at("image_proj"));
  t.params_.text_proj = matrix_from_json(p.at("text_proj"));
  t.velocity_.image_proj = matrix_from_json(v.at("image_proj"));
  t.velocity_.text_proj = matrix_from_json(v.at("text_proj"));
  t.params_.validate();
  t.state_ = CorrespondenceState::from_json(ckpt.at("state"));
  if (t.state_.size() != train.size())
    throw ValidationError("checkpoint: state size differs from dataset");
  for (const auto& e : ckpt.at("history")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<std::size_t>();
    r.piece = e.at("piece").get<std::size_t>();
    r.epoch_in_piece = e.at("epoch_in_piece").get<std::size_t>();
    r.learning_rate = e.at("learning_rate").get<double>();
    r.mean_batch_loss = e.at("mean_batch_loss").get<double>();
    r.clean_hist = e.at("clean_hist").get<std::array<std::size_t, kHistogramBins>>();
    r.noisy_hist = e.at("noisy_hist").get<std::array<std::size_t, kHistogramBins>>();
    if (e.contains("validation")) {
      const auto& ev = e.at("validation");
      EvalResult res;
      for (std::size_t k = 0; k < 3; ++k) {
        static constexpr const char* keys[] = {"r1", "r5", "r10"};
        res.i2t[k] = ev.at("i2t").at(keys[k]).get<double>();
        res.t2i[k] = ev.at("t2i").at(keys[k]).get<double>();
      }
      res.rsum = ev.at("rsum").get<double>();
      r.validation = res;
    }
    t.history_.push_back(r);
  }
  return t;
}

TrainResult train(const PairedDataset& ds, const TrainConfig& cfg,
                  std::optional<PairedDataset> validation) {
  Trainer t(ds, cfg, std::move(validation));
  t.run();
  return {t.params(), t.state(), t.history()};
}

}  // namespace crcl
