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
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

#include "crcl/cli.h"
#include "crcl/errors.h"
#include "crcl/losses.h"
#include "crcl/matching.h"
#include "crcl/synth_data.h"
#include "crcl/theory.h"
#include "crcl/train_eval.h"

namespace py = pybind11;
using namespace crcl;

namespace {

SimilarityContext context(const Matrix& sim, double tau) {
  return SimilarityContext::build(sim, tau);
}

py::tuple as_tuple(const LossEvaluation& e) {
  return py::make_tuple(e.value, e.grad_sim);
}

}  // namespace

PYBIND11_MODULE(_crcl, m) {
  m.doc() = "Robust cross-modal matching under noisy correspondence";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("n", &GenConfig::n)
      .def_readwrite("latent_dim", &GenConfig::latent_dim)
      .def_readwrite("d_v", &GenConfig::d_v)
      .def_readwrite("d_t", &GenConfig::d_t)
      .def_readwrite("noise_std", &GenConfig::noise_std)
      .def_readwrite("seed", &GenConfig::seed)
      .def_readwrite("identity_maps", &GenConfig::identity_maps);

  py::class_<PairedDataset>(m, "PairedDataset")
      .def_readonly("images", &PairedDataset::images)
      .def_readonly("texts", &PairedDataset::texts)
      .def_readonly("pairing", &PairedDataset::pairing)
      .def_readonly("noise_flags", &PairedDataset::noise_flags)
      .def_readonly("noise_rate", &PairedDataset::noise_rate)
      .def_readonly("seed", &PairedDataset::seed)
      .def("__len__", &PairedDataset::size)
      .def("noisy_count", &PairedDataset::noisy_count)
      .def("__eq__", &PairedDataset::operator==);

  m.def("generate_bimodal", &generate_bimodal, py::arg("config"));
  m.def("generate_split", &generate_split, py::arg("config"), py::arg("n"), py::arg("stream"));
  m.def(
      "inject_noise",
      [](const PairedDataset& ds, double eta, std::uint64_t seed) {
        std::vector<std::string> warnings;
        PairedDataset out = inject_noise(ds, eta, seed, &warnings);
        return py::make_tuple(std::move(out), warnings);
      },
      py::arg("dataset"), py::arg("eta"), py::arg("seed"),
      "Returns (dataset, warnings).");
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("dataset_hash", [](const PairedDataset& ds) { return hex64(dataset_hash(ds)); });

  m.def(
      "matching_probs",
      [](const Matrix& sim, double tau) { return matching_probs(sim, tau); },
      py::arg("sim"), py::arg("tau") = kDefaultTemperature,
      "Row- and column-softmax of sim / tau.");
  m.def(
      "complementary_loss",
      [](const Matrix& sim, Index i, double q, double tau) {
        return as_tuple(complementary_loss(context(sim, tau), i, q));
      },
      py::arg("sim"), py::arg("i"), py::arg("q"), py::arg("tau") = kDefaultTemperature);
  m.def(
      "active_loss",
      [](const Matrix& sim, Index i, double label, double tau) {
        return as_tuple(active_loss(context(sim, tau), i, label));
      },
      py::arg("sim"), py::arg("i"), py::arg("label"), py::arg("tau") = kDefaultTemperature);
  m.def(
      "acl_loss",
      [](const Matrix& sim, Index i, double label, double tau, double lambda) {
        return as_tuple(acl_loss(context(sim, tau), i, label, AclConfig{tau, lambda}));
      },
      py::arg("sim"), py::arg("i"), py::arg("label"), py::arg("tau") = kDefaultTemperature,
      py::arg("lam") = 5.0);
  m.def(
      "batch_loss",
      [](const Matrix& sim, const std::vector<double>& labels, double tau, double lambda) {
        return as_tuple(batch_loss(context(sim, tau), labels, AclConfig{tau, lambda}));
      },
      py::arg("sim"), py::arg("labels"), py::arg("tau") = kDefaultTemperature,
      py::arg("lam") = 5.0);
  m.def(
      "triplet_hard_negative",
      [](const Matrix& sim, Index i, double margin) {
        return as_tuple(triplet_hard_negative(sim, i, margin));
      },
      py::arg("sim"), py::arg("i"), py::arg("margin") = kDefaultTripletMargin);
  m.def(
      "soft_margin_triplet",
      [](const Matrix& sim, Index i, double label, double margin, double curve) {
        return as_tuple(soft_margin_triplet(sim, i, label, margin, curve));
      },
      py::arg("sim"), py::arg("i"), py::arg("label"),
      py::arg("margin") = kDefaultTripletMargin, py::arg("curve") = kDefaultMarginCurve);
  m.def("soft_margin", &soft_margin, py::arg("label"), py::arg("margin") = kDefaultTripletMargin,
        py::arg("curve") = kDefaultMarginCurve);

  m.def("amin_amax", &amin_amax, py::arg("n"));
  m.def(
      "per_query_risks",
      [](const Vector& p, Index i, double eta, double q) {
        const QueryRisks r = per_query_risks(p, i, eta, q);
        return py::make_tuple(r.clean, r.noisy);
      },
      py::arg("p"), py::arg("i"), py::arg("eta"), py::arg("q"), "Returns (clean, noisy).");
  m.def("gap_lower_bound", &gap_lower_bound, py::arg("n"), py::arg("eta"), py::arg("q"));
  m.def("gap_upper_bound_noisy", &gap_upper_bound_noisy, py::arg("n"), py::arg("eta"),
        py::arg("q"));
  m.def(
      "c_curve",
      [](std::size_t n, double eta, std::size_t points) {
        std::vector<std::tuple<double, double, double>> out;
        for (const CurvePoint& c : c_curve(n, eta, unit_grid(points)))
          out.emplace_back(c.q, c.c, c.c_prime);
        return out;
      },
      py::arg("n"), py::arg("eta"), py::arg("points") = 101,
      "List of (q, C, C').");
  m.def(
      "brute_force_minimizers_json",
      [](std::size_t n, double eta, double q, std::size_t grid, std::size_t samples,
         std::uint64_t seed) {
        return nlohmann::json(brute_force_minimizers(n, eta, q, grid, samples, seed)).dump();
      },
      py::arg("n"), py::arg("eta"), py::arg("q"), py::arg("grid") = 30,
      py::arg("samples") = 0, py::arg("seed") = 0);

  py::class_<EncoderParams>(m, "EncoderParams")
      .def_readwrite("image_proj", &EncoderParams::image_proj)
      .def_readwrite("text_proj", &EncoderParams::text_proj)
      .def_static("random", &EncoderParams::random, py::arg("d_v"), py::arg("d_t"),
                  py::arg("d"), py::arg("seed"));
  m.def("save_model", &save_model, py::arg("params"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def(
      "evaluate_json",
      [](const EncoderParams& p, const PairedDataset& test) {
        return nlohmann::json(evaluate(p, test)).dump();
      },
      py::arg("params"), py::arg("test"));
  m.def(
      "train_json",
      [](const PairedDataset& ds, const std::string& config_json) {
        const TrainConfig cfg = nlohmann::json::parse(config_json).get<TrainConfig>();
        std::optional<TrainResult> result;
        {
          py::gil_scoped_release release;
          result.emplace(train(ds, cfg));
        }
        const TrainResult& r = *result;
        const CorrectionQuality q = correction_quality(r.state, ds);
        nlohmann::json quality = {{"auc", nullptr},
                                  {"mean_label_clean", nullptr},
                                  {"mean_label_noisy", nullptr}};
        if (q.auc) quality["auc"] = *q.auc;
        if (q.mean_label_clean) quality["mean_label_clean"] = *q.mean_label_clean;
        if (q.mean_label_noisy) quality["mean_label_noisy"] = *q.mean_label_noisy;
        return py::make_tuple(r.params, r.state.labels(), history_csv(r.history),
                              quality.dump());
      },
      py::arg("dataset"), py::arg("config_json") = "{}",
      "Returns (params, labels, history_csv, quality_json).");

  m.def(
      "cli_run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Returns (exit_code, stdout, stderr).");

  m.attr("__version__") = cli::code_version();
}
