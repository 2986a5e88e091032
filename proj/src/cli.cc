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
#include "crcl/cli.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "crcl/errors.h"
#include "crcl/synth_data.h"
#include "crcl/theory.h"
#include "crcl/train_eval.h"

#ifndef CRCL_VERSION
#define CRCL_VERSION "dev"
#endif

namespace crcl::cli {
namespace fs = std::filesystem;
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;  // "noise"
constexpr std::uint64_t kValStream = 1;
constexpr std::uint64_t kTestStream = 2;
// Largest simplex grid verify-theory will enumerate.
constexpr double kMaxGridPoints = 5e6;

class UsageError : public Error {
 public:
  using Error::Error;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T value{};
    if (!(is >> value) || !is.eof())
      throw UsageError(std::string("cannot parse ") + what + " entry '" + item + "'");
    out.push_back(value);
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

void write_manifest(const fs::path& path, RunManifest manifest,
                    Clock::time_point started) {
  manifest.wall_time_seconds =
      std::chrono::duration<double>(Clock::now() - started).count();
  write_text(path, manifest.to_json().dump(2) + "\n");
}

RunManifest new_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.code_version = code_version();
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared training flags

struct TrainFlags {
  std::string config_path;
  std::string loss;
  double q = 0.0;
  std::string pieces;
  bool no_scc = false;
  double lr = 0.0;
  std::size_t lr_decay_epoch = 0;
  std::size_t batch_size = 0;
  double tau = 0.0, lambda = 0.0, beta = 0.0, epsilon = 0.0;
  std::size_t freeze = 0;
  std::size_t embed_dim = 0;
  std::uint64_t seed = 0;

  CLI::Option* o_loss = nullptr;
  CLI::Option* o_q = nullptr;
  CLI::Option* o_pieces = nullptr;
  CLI::Option* o_lr = nullptr;
  CLI::Option* o_decay = nullptr;
  CLI::Option* o_batch = nullptr;
  CLI::Option* o_tau = nullptr;
  CLI::Option* o_lambda = nullptr;
  CLI::Option* o_beta = nullptr;
  CLI::Option* o_eps = nullptr;
  CLI::Option* o_freeze = nullptr;
  CLI::Option* o_dim = nullptr;
  CLI::Option* o_seed = nullptr;

  void attach(CLI::App* app, bool with_loss) {
    app->add_option("--config", config_path, "JSON training config (flags win)");
    if (with_loss) {
      o_loss = app->add_option("--loss", loss,
                               "acl | active_only | complementary_only | "
                               "triplet_hn | soft_margin");
      o_q = app->add_option("--q", q, "fixed q for complementary_only");
      app->add_flag("--no-scc", no_scc, "disable correspondence correction");
    }
    o_pieces = app->add_option("--pieces", pieces, "piece lengths, e.g. 4,4,4,12");
    o_lr = app->add_option("--lr", lr, "learning rate");
    o_decay = app->add_option("--lr-decay-epoch", lr_decay_epoch,
                              "final-piece epoch after which lr decays (0: never)");
    o_batch = app->add_option("--batch-size", batch_size, "mini-batch size K");
    o_tau = app->add_option("--tau", tau, "temperature");
    o_lambda = app->add_option("--lambda", lambda, "complementary scale");
    o_beta = app->add_option("--beta", beta, "label momentum");
    o_eps = app->add_option("--epsilon", epsilon, "label threshold");
    o_freeze = app->add_option("--freeze", freeze, "freeze epochs per piece");
    o_dim = app->add_option("--embed-dim", embed_dim, "shared embedding dim");
    o_seed = app->add_option("--seed", seed, "master seed");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = read_json(config_path).get<TrainConfig>();
    if (o_loss && o_loss->count()) cfg.loss.kind = loss_kind_from_string(loss);
    if (o_q && o_q->count()) cfg.loss.fixed_q = q;
    if (no_scc) cfg.use_scc = false;
    if (o_pieces->count()) cfg.scc.piece_lengths = parse_list<std::size_t>(pieces, "--pieces");
    if (o_lr->count()) cfg.learning_rate = lr;
    if (o_decay->count()) cfg.lr_decay_epoch = lr_decay_epoch;
    if (o_batch->count()) cfg.batch_size = batch_size;
    if (o_tau->count()) cfg.loss.acl.tau = tau;
    if (o_lambda->count()) cfg.loss.acl.lambda = lambda;
    if (o_beta->count()) cfg.scc.beta = beta;
    if (o_eps->count()) cfg.scc.epsilon = epsilon;
    if (o_freeze->count()) cfg.scc.freeze_epochs = freeze;
    if (o_dim->count()) cfg.embed_dim = embed_dim;
    if (o_seed->count()) cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

struct GenFlags {
  std::string config_path;
  GenConfig gen;
  double eta = 0.0;
  std::size_t n_test = 1000;

  CLI::Option* o_n = nullptr;
  CLI::Option* o_latent = nullptr;
  CLI::Option* o_dv = nullptr;
  CLI::Option* o_dt = nullptr;
  CLI::Option* o_std = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_eta = nullptr;
  CLI::Option* o_test = nullptr;

  void attach(CLI::App* app, bool with_eta) {
    app->add_option("--gen-config", config_path, "JSON generator config (flags win)");
    o_n = app->add_option("--n", gen.n, "training pairs");
    o_latent = app->add_option("--latent-dim", gen.latent_dim, "shared latent dim");
    o_dv = app->add_option("--dv", gen.d_v, "image feature dim");
    o_dt = app->add_option("--dt", gen.d_t, "text feature dim");
    o_std = app->add_option("--noise-std", gen.noise_std, "feature noise scale");
    o_seed = app->add_option("--data-seed", gen.seed, "generator seed");
    if (with_eta) o_eta = app->add_option("--eta", eta, "noisy-correspondence rate");
    o_test = app->add_option("--n-test", n_test, "clean test pairs");
  }

  void resolve() {
    if (config_path.empty()) return;
    const nlohmann::json j = read_json(config_path);
    GenConfig file = j.get<GenConfig>();
    if (!o_n->count()) gen.n = file.n;
    if (!o_latent->count()) gen.latent_dim = file.latent_dim;
    if (!o_dv->count()) gen.d_v = file.d_v;
    if (!o_dt->count()) gen.d_t = file.d_t;
    if (!o_std->count()) gen.noise_std = file.noise_std;
    if (!o_seed->count()) gen.seed = file.seed;
    if (o_eta && !o_eta->count()) eta = j.value("eta", eta);
    if (!o_test->count()) n_test = j.value("n_test", n_test);
  }
};

struct Splits {
  PairedDataset train;
  PairedDataset val;
  PairedDataset test;
  std::vector<std::string> warnings;
};

Splits make_splits(const GenConfig& gen, double eta, std::size_t n_test) {
  gen.validate();
  const double max_eta =
      static_cast<double>(gen.n - 1) / static_cast<double>(gen.n);
  if (!(eta >= 0.0) || eta > max_eta)
    throw UsageError("--eta must lie in [0, (N-1)/N] = [0, " +
                     format_double(max_eta) + "]");
  if (n_test < 2) throw UsageError("--n-test must be >= 2");
  Splits s;
  s.train = inject_noise(generate_bimodal(gen), eta,
                         mix_seed(gen.seed, kNoiseStream), &s.warnings);
  s.val = generate_split(gen, std::max<std::size_t>(2, gen.n / 10), kValStream);
  s.test = generate_split(gen, n_test, kTestStream);
  return s;
}

nlohmann::json eval_json(const EvalResult& eval, const CorrectionQuality& q) {
  EvalResult full = eval;
  full.correction_auc = q.auc;
  full.mean_label_clean = q.mean_label_clean;
  full.mean_label_noisy = q.mean_label_noisy;
  return full;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(GenFlags& flags, const std::string& out_path, std::ostream& out,
                 std::ostream& err) {
  const auto started = Clock::now();
  flags.resolve();
  if (out_path.empty()) throw UsageError("--out is required");
  Splits s = make_splits(flags.gen, flags.eta, flags.n_test);
  for (const auto& w : s.warnings) err << "warning: " << w << "\n";

  const fs::path train_path = out_path;
  if (train_path.has_parent_path()) fs::create_directories(train_path.parent_path());
  const fs::path val_path = sibling(train_path, ".val.bin");
  const fs::path test_path = sibling(train_path, ".test.bin");
  save_dataset(s.train, train_path);
  save_dataset(s.val, val_path);
  save_dataset(s.test, test_path);

  RunManifest m = new_manifest("gen-data");
  m.config = {{"generator", flags.gen},
              {"eta", flags.eta},
              {"realized_eta", s.train.noise_rate},
              {"n_val", s.val.size()},
              {"n_test", flags.n_test},
              {"warnings", s.warnings}};
  m.dataset_hash = hex64(dataset_hash(s.train));
  m.seed = flags.gen.seed;
  m.outputs = {train_path.string(), val_path.string(), test_path.string()};
  write_manifest(sibling(train_path, ".manifest.json"), m, started);
  out << m.dataset_hash << "\n";
  return kOk;
}

struct TrainPaths {
  std::string data, val, test, out_dir = "runs", resume;
  std::size_t stop_after = 0;
};

std::optional<PairedDataset> maybe_load(const std::string& explicit_path,
                                        const fs::path& fallback) {
  if (!explicit_path.empty()) return load_dataset(explicit_path);
  if (fs::exists(fallback)) return load_dataset(fallback);
  return std::nullopt;
}

int cmd_train(const TrainFlags& flags, const TrainPaths& paths,
              std::ostream& out, std::ostream& err) {
  const auto started = Clock::now();
  if (paths.data.empty()) throw UsageError("--data is required");
  const PairedDataset train_ds = load_dataset(paths.data);
  auto val = maybe_load(paths.val, sibling(paths.data, ".val.bin"));
  const auto test = maybe_load(paths.test, sibling(paths.data, ".test.bin"));

  std::optional<Trainer> trainer;
  if (!paths.resume.empty()) {
    trainer.emplace(Trainer::resume(train_ds, read_json(paths.resume), std::move(val)));
  } else {
    trainer.emplace(train_ds, flags.resolve(), std::move(val));
  }
  const TrainConfig& cfg = trainer->config();

  RunManifest m = new_manifest("train");
  m.config = cfg;
  m.dataset_hash = hex64(dataset_hash(train_ds));
  m.seed = cfg.seed;
  const fs::path run_dir = fs::path(paths.out_dir) / m.hash();
  fs::create_directories(run_dir);

  try {
    while (!trainer->done()) {
      if (paths.stop_after > 0 && trainer->history().size() >= paths.stop_after)
        break;
      trainer->run_epoch();
    }
  } catch (const TrainingDiverged& e) {
    write_text(run_dir / "diverged_checkpoint.json", e.snapshot().dump() + "\n");
    err << "diagnostic snapshot: " << (run_dir / "diverged_checkpoint.json").string()
        << "\n";
    throw;
  }

  if (!trainer->done()) {
    write_text(run_dir / "checkpoint.json", trainer->checkpoint().dump() + "\n");
    m.outputs = {(run_dir / "checkpoint.json").string()};
    write_manifest(run_dir / "manifest.json", m, started);
    out << run_dir.string() << "\n";
    return kOk;
  }

  save_model(trainer->params(), run_dir / "model.bin");
  write_text(run_dir / "state.json", trainer->state().to_json().dump(2) + "\n");
  export_history(trainer->history(), run_dir / "history.csv");
  m.outputs = {(run_dir / "model.bin").string(), (run_dir / "state.json").string(),
               (run_dir / "history.csv").string()};
  if (test) {
    const EvalResult eval = evaluate(trainer->params(), *test);
    const auto quality = correction_quality(trainer->state(), train_ds);
    write_text(run_dir / "eval.json", eval_json(eval, quality).dump(2) + "\n");
    m.outputs.push_back((run_dir / "eval.json").string());
  }
  write_manifest(run_dir / "manifest.json", m, started);
  out << run_dir.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_path, std::ostream& out) {
  if (model_path.empty() || data_path.empty())
    throw UsageError("--model and --data are required");
  const EvalResult r = evaluate(load_model(model_path), load_dataset(data_path));
  const std::string text = nlohmann::json(r).dump(2) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  out << text;
  return kOk;
}

struct TheoryFlags {
  std::size_t n = 4;
  double eta = 0.5;
  double q = 1.0;
  std::size_t grid = 30;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  bool curve = false;
  std::size_t curve_points = 101;
  std::string out_dir = ".";
};

double grid_size(std::size_t parts, std::size_t total) {
  // C(total + parts - 1, parts - 1)
  double c = 1.0;
  for (std::size_t k = 1; k < parts; ++k)
    c = c * static_cast<double>(total + k) / static_cast<double>(k);
  return c;
}

int cmd_verify_theory(const TheoryFlags& f, std::ostream& out) {
  const auto started = Clock::now();
  if (f.n < 2) throw UsageError("--n must be >= 2");
  const double max_eta = static_cast<double>(f.n - 1) / static_cast<double>(f.n);
  if (!(f.eta >= 0.0) || f.eta > max_eta)
    throw UsageError("--eta must lie in [0, (N-1)/N] = [0, " +
                     format_double(max_eta) + "]");
  if (!(f.q >= 0.0 && f.q <= 1.0)) throw UsageError("--q must lie in [0, 1]");
  if (f.grid < 1) throw UsageError("--grid must be >= 1");

  bool ok = true;
  nlohmann::json report;
  report["n"] = f.n;
  report["eta"] = f.eta;
  report["q"] = f.q;
  const auto [a_min, a_max] = amin_amax(f.n);
  report["a_min"] = a_min;
  report["a_max"] = a_max;

  const ExtremesReport ext = simplex_extremes_check(f.n, std::max<std::size_t>(1, f.samples), f.seed);
  report["extremes"] = {{"samples", ext.samples},
                        {"lowest_seen", ext.lowest_seen},
                        {"highest_seen", ext.highest_seen},
                        {"violations", ext.violations},
                        {"uniform_attains_min", ext.uniform_attains_min},
                        {"vertex_attains_max", ext.vertex_attains_max}};
  ok &= ext.passed();

  if (grid_size(f.n, f.grid) <= kMaxGridPoints) {
    const RiskReport rr = brute_force_minimizers(f.n, f.eta, f.q, f.grid, f.samples, f.seed);
    report["risk_report"] = rr;
    ok &= rr.passed();
  } else {
    report["risk_report"] = nullptr;
    report["risk_report_skipped"] = "simplex grid too large for exhaustive search";
  }

  const fs::path dir = f.out_dir;
  fs::create_directories(dir);
  std::vector<std::string> outputs = {(dir / "risk_report.json").string()};
  if (f.curve) {
    if (!(f.eta < max_eta))
      throw UsageError("--curve needs eta strictly below (N-1)/N");
    const auto curve = c_curve(f.n, f.eta, unit_grid(f.curve_points));
    std::string csv = "q,C,C_prime\n";
    bool c_up = true, cp_down = true;
    for (std::size_t k = 0; k < curve.size(); ++k) {
      csv += format_double(curve[k].q) + "," + format_double(curve[k].c) + "," +
             format_double(curve[k].c_prime) + "\n";
      if (k > 0) {
        c_up &= curve[k].c > curve[k - 1].c || (curve[k].c == 0.0 && curve[k - 1].c == 0.0);
        cp_down &= curve[k].c_prime < curve[k - 1].c_prime ||
                   (curve[k].c_prime == 0.0 && curve[k - 1].c_prime == 0.0);
      }
    }
    write_text(dir / "c_curve.csv", csv);
    outputs.push_back((dir / "c_curve.csv").string());
    report["curve"] = {{"points", curve.size()},
                       {"c_increasing", c_up},
                       {"c_prime_decreasing", cp_down}};
    ok &= c_up && cp_down;
  }
  report["passed"] = ok;
  write_text(dir / "risk_report.json", report.dump(2) + "\n");

  RunManifest m = new_manifest("verify-theory");
  m.config = {{"n", f.n}, {"eta", f.eta}, {"q", f.q}, {"grid", f.grid},
              {"samples", f.samples}, {"curve", f.curve},
              {"curve_points", f.curve_points}};
  m.seed = f.seed;
  m.outputs = outputs;
  write_manifest(dir / "verify_manifest.json", m, started);
  out << (ok ? "PASS" : "FAIL") << " verify-theory n=" << f.n << " eta=" << f.eta
      << " q=" << f.q << "\n";
  return ok ? kOk : kValidation;
}

struct Arm {
  std::string name;
  LossKind kind;
  std::optional<double> q;
  bool use_scc;
};

// "<loss>[:q=<v>][:noscc]". Label-free objectives run without correction.
Arm parse_arm(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw UsageError("empty loss arm");
  Arm arm{text, loss_kind_from_string(parts[0]), std::nullopt, true};
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (parts[k] == "noscc") {
      arm.use_scc = false;
    } else if (parts[k].rfind("q=", 0) == 0) {
      arm.q = parse_list<double>(parts[k].substr(2), "q").at(0);
    } else {
      throw UsageError("unknown loss arm modifier '" + parts[k] + "'");
    }
  }
  if (arm.kind == LossKind::kTripletHardNegative ||
      (arm.kind == LossKind::kComplementaryOnly && arm.q))
    arm.use_scc = false;
  return arm;
}

int cmd_sweep(GenFlags& gen, const TrainFlags& train_flags,
              const std::string& losses, const std::string& etas,
              std::size_t threads, const std::string& out_path,
              std::ostream& out) {
  const auto started = Clock::now();
  gen.resolve();
  std::vector<Arm> arms;
  for (const auto& a : split(losses, ',')) arms.push_back(parse_arm(a));
  if (arms.empty()) throw UsageError("--losses must name at least one loss");
  const auto eta_grid = parse_list<double>(etas, "--etas");
  if (eta_grid.empty()) throw UsageError("--etas must name at least one rate");
  if (out_path.empty()) throw UsageError("--out is required");
  const TrainConfig base = train_flags.resolve();

  struct Cell {
    std::size_t eta_index = 0, arm_index = 0;
    std::string status = "ok";
    EvalResult eval;
    CorrectionQuality quality;
  };
  std::vector<Cell> cells;
  for (std::size_t e = 0; e < eta_grid.size(); ++e)
    for (std::size_t a = 0; a < arms.size(); ++a) {
      Cell cell;
      cell.eta_index = e;
      cell.arm_index = a;
      cells.push_back(cell);
    }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      Cell& cell = cells[c];
      try {
        const Splits s = make_splits(gen.gen, eta_grid[cell.eta_index], gen.n_test);
        TrainConfig cfg = base;
        const Arm& arm = arms[cell.arm_index];
        cfg.loss.kind = arm.kind;
        cfg.loss.fixed_q = arm.q;
        cfg.use_scc = arm.use_scc;
        const TrainResult r = train(s.train, cfg);
        cell.eval = evaluate(r.params, s.test);
        cell.quality = correction_quality(r.state, s.train);
      } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        cell.status = "error: " + msg;
      }
    }
  };
  const std::size_t pool =
      std::max<std::size_t>(1, std::min(threads == 0 ? std::thread::hardware_concurrency() : threads,
                                         cells.size()));
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
  for (auto& w : workers) w.join();

  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  std::string csv =
      "loss,eta,status,i2t_r1,i2t_r5,i2t_r10,t2i_r1,t2i_r5,t2i_r10,rsum,"
      "correction_auc,mean_label_clean,mean_label_noisy\n";
  for (const Cell& c : cells) {
    csv += arms[c.arm_index].name + "," + format_double(eta_grid[c.eta_index]) +
           "," + c.status;
    if (c.status == "ok") {
      for (double v : c.eval.i2t) csv += "," + format_double(v);
      for (double v : c.eval.t2i) csv += "," + format_double(v);
      csv += "," + format_double(c.eval.rsum) + "," + opt(c.quality.auc) + "," +
             opt(c.quality.mean_label_clean) + "," + opt(c.quality.mean_label_noisy);
    } else {
      csv += ",,,,,,,,,,";
    }
    csv += "\n";
  }
  const fs::path csv_path = out_path;
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  write_text(csv_path, csv);

  RunManifest m = new_manifest("sweep");
  m.config = {{"generator", gen.gen}, {"n_test", gen.n_test}, {"train", base},
              {"losses", losses}, {"etas", eta_grid}};
  m.seed = base.seed;
  m.outputs = {csv_path.string()};
  write_manifest(sibling(csv_path, ".manifest.json"), m, started);
  out << csv_path.string() << "\n";
  return kOk;
}

int cmd_export_plots(const std::string& run_dir, const std::string& out_dir,
                     std::ostream& out) {
  if (run_dir.empty()) throw UsageError("--run-dir is required");
  const fs::path src = run_dir;
  std::ifstream in(src / "history.csv", std::ios::binary);
  if (!in) throw Error("cannot open " + (src / "history.csv").string());
  std::stringstream buf;
  buf << in.rdbuf();
  const History h = parse_history_csv(buf.str());
  if (h.empty()) throw ValidationError("history is empty");

  const fs::path dst = out_dir.empty() ? src : fs::path(out_dir);
  fs::create_directories(dst);
  std::string hist = "bin,lower,upper,clean,noisy\n";
  const EpochRecord& last = h.back();
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    hist += std::to_string(b) + "," +
            format_double(static_cast<double>(b) / kHistogramBins) + "," +
            format_double(static_cast<double>(b + 1) / kHistogramBins) + "," +
            std::to_string(last.clean_hist[b]) + "," +
            std::to_string(last.noisy_hist[b]) + "\n";
  }
  write_text(dst / "label_hist_final.csv", hist);

  std::string curve = "epoch,piece,mean_batch_loss,val_rsum,mean_label_clean,mean_label_noisy\n";
  for (const EpochRecord& r : h) {
    // Bin centres approximate the mean label per group.
    auto mean = [](const std::array<std::size_t, kHistogramBins>& c) {
      double total = 0.0, weight = 0.0;
      for (std::size_t b = 0; b < kHistogramBins; ++b) {
        total += (static_cast<double>(b) + 0.5) / kHistogramBins * static_cast<double>(c[b]);
        weight += static_cast<double>(c[b]);
      }
      return weight > 0 ? format_double(total / weight) : std::string();
    };
    curve += std::to_string(r.epoch) + "," + std::to_string(r.piece) + "," +
             format_double(r.mean_batch_loss) + "," +
             (r.validation ? format_double(r.validation->rsum) : std::string()) +
             "," + mean(r.clean_hist) + "," + mean(r.noisy_hist) + "\n";
  }
  write_text(dst / "training_curves.csv", curve);
  out << (dst / "label_hist_final.csv").string() << "\n"
      << (dst / "training_curves.csv").string() << "\n";
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},         {"config", config},
          {"dataset_hash", dataset_hash}, {"seed", seed},
          {"code_version", code_version}, {"outputs", outputs},
          {"wall_time_seconds", wall_time_seconds}, {"hash", hash()}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.dataset_hash = j.value("dataset_hash", "");
  m.seed = j.value("seed", std::uint64_t{0});
  m.code_version = j.value("code_version", "");
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.wall_time_seconds = j.value("wall_time_seconds", 0.0);
  return m;
}

std::string RunManifest::hash() const {
  // Outputs depend on the hash itself, so they are excluded too.
  const nlohmann::json key = {{"command", command},
                              {"config", config},
                              {"dataset_hash", dataset_hash},
                              {"seed", seed},
                              {"code_version", code_version}};
  return hex64(fnv1a64(key.dump()));
}

std::string code_version() { return CRCL_VERSION; }

fs::path sibling(const fs::path& data, const std::string& suffix) {
  fs::path p = data;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Robust cross-modal matching under noisy correspondence"};
  app.name("crcl");
  app.require_subcommand(1);

  GenFlags gen_flags;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic noisy dataset");
  gen_flags.attach(gen_cmd, true);
  gen_cmd->add_option("--seed", gen_flags.gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "training split path (.bin)");

  TrainFlags train_flags;
  TrainPaths train_paths;
  auto* train_cmd = app.add_subcommand("train", "train an encoder with SCC");
  train_flags.attach(train_cmd, true);
  train_cmd->add_option("--data", train_paths.data, "training dataset");
  train_cmd->add_option("--val", train_paths.val, "validation dataset");
  train_cmd->add_option("--test", train_paths.test, "test dataset");
  train_cmd->add_option("--out-dir", train_paths.out_dir, "root of run directories");
  train_cmd->add_option("--stop-after", train_paths.stop_after,
                        "write a checkpoint after this many epochs and stop");
  train_cmd->add_option("--resume", train_paths.resume, "checkpoint to resume from");

  std::string eval_model, eval_data, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "retrieval recalls of a saved model");
  eval_cmd->add_option("--model", eval_model, "model.bin");
  eval_cmd->add_option("--data", eval_data, "clean dataset");
  eval_cmd->add_option("--out", eval_out, "write JSON here as well");

  TheoryFlags theory;
  auto* theory_cmd = app.add_subcommand("verify-theory", "numerical checks of the risk bounds");
  theory_cmd->add_option("--n", theory.n, "universe size N");
  theory_cmd->add_option("--eta", theory.eta, "noise rate");
  theory_cmd->add_option("--q", theory.q, "regulatory exponent");
  theory_cmd->add_option("--grid", theory.grid, "simplex grid resolution");
  theory_cmd->add_option("--samples", theory.samples, "random simplex samples");
  theory_cmd->add_option("--seed", theory.seed, "sampling seed");
  theory_cmd->add_flag("--curve", theory.curve, "emit the C / C' curve CSV");
  theory_cmd->add_option("--curve-points", theory.curve_points, "points on the q grid");
  theory_cmd->add_option("--out-dir", theory.out_dir, "output directory");

  GenFlags sweep_gen;
  TrainFlags sweep_train;
  std::string sweep_losses =
      "acl,acl:noscc,active_only:noscc,complementary_only:q=0,"
      "complementary_only:q=1,triplet_hn,soft_margin";
  std::string sweep_etas = "0.2,0.4,0.6,0.8";
  std::size_t sweep_threads = 0;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "train every loss arm across noise rates");
  sweep_gen.attach(sweep_cmd, false);
  sweep_train.attach(sweep_cmd, false);
  sweep_cmd->add_option("--losses", sweep_losses, "comma-separated loss arms");
  sweep_cmd->add_option("--etas", sweep_etas, "comma-separated noise rates");
  sweep_cmd->add_option("--threads", sweep_threads, "worker threads (0: all cores)");
  sweep_cmd->add_option("--out", sweep_out, "results CSV");

  std::string plots_run, plots_out;
  auto* plots_cmd = app.add_subcommand("export-plots", "plot-ready CSVs from a run");
  plots_cmd->add_option("--run-dir", plots_run, "run directory");
  plots_cmd->add_option("--out-dir", plots_out, "defaults to the run directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  auto usage_of = [&]() -> std::string {
    for (CLI::App* sub : app.get_subcommands()) return sub->help();
    return app.help();
  };

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen_flags, gen_out, out, err);
    if (train_cmd->parsed()) return cmd_train(train_flags, train_paths, out, err);
    if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data, eval_out, out);
    if (theory_cmd->parsed()) return cmd_verify_theory(theory, out);
    if (sweep_cmd->parsed())
      return cmd_sweep(sweep_gen, sweep_train, sweep_losses, sweep_etas,
                       sweep_threads, sweep_out, out);
    if (plots_cmd->parsed()) return cmd_export_plots(plots_run, plots_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << usage_of();
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n" << usage_of();
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n" << usage_of();
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ValidationError& e) {
    err << "validation failure: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    err << "validation failure: " << e.what() << "\n";
    return kValidation;
  } catch (const StateError& e) {
    err << "validation failure: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace crcl::cli
