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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "crcl/synth_data.h"
#include "crcl/train_eval.h"
#include "test_support.h"

namespace crcl::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small noisy dataset with val/test siblings.
  std::string make_data(const std::string& eta = "0.6") {
    const std::string ds = path("data/ds.bin");
    const Outcome o = invoke({"gen-data", "--n", "200", "--eta", eta, "--seed", "1",
                              "--dv", "12", "--dt", "12", "--latent-dim", "6",
                              "--n-test", "100", "--out", ds});
    EXPECT_EQ(o.code, 0) << o.err;
    return ds;
  }

  std::vector<std::string> small_train(const std::string& ds) const {
    return {"train", "--data", ds, "--pieces", "4,4,4,12", "--batch-size", "32",
            "--embed-dim", "6", "--out-dir", path("runs")};
  }

  fs::path dir_;
};

TEST_F(CliTest, GenDataWritesSplitsAndManifest) {
  const std::string ds = make_data();
  EXPECT_TRUE(fs::exists(ds));
  EXPECT_TRUE(fs::exists(sibling(ds, ".val.bin")));
  EXPECT_TRUE(fs::exists(sibling(ds, ".test.bin")));
  std::ifstream in(sibling(ds, ".manifest.json"));
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m.at("command"), "gen-data");
  EXPECT_EQ(m.at("config").at("eta"), 0.6);
  EXPECT_EQ(m.at("code_version"), code_version());
  EXPECT_EQ(load_dataset(ds).noisy_count(), 120u);
  EXPECT_EQ(load_dataset(sibling(ds, ".test.bin")).noisy_count(), 0u);
}

TEST_F(CliTest, GenDataIsDeterministic) {
  const std::string ds = make_data();
  const std::string first = slurp(ds);
  const Outcome again = invoke({"gen-data", "--n", "200", "--eta", "0.6", "--seed", "1",
                                "--dv", "12", "--dt", "12", "--latent-dim", "6",
                                "--n-test", "100", "--out", path("copy.bin")});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(slurp(path("copy.bin")), first);
  EXPECT_EQ(first_line(again.out), hex64(dataset_hash(load_dataset(ds))));
}

TEST_F(CliTest, GenDataRejectsBadEta) {
  const Outcome o = invoke({"gen-data", "--eta", "1.5", "--out", path("x.bin")});
  EXPECT_EQ(o.code, kUsage);
  EXPECT_NE(o.err.find("eta"), std::string::npos);
  EXPECT_NE(o.err.find("Usage"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("x.bin")));
}

TEST_F(CliTest, TrainProducesRunDirectory) {
  const std::string ds = make_data();
  auto args = small_train(ds);
  args.insert(args.end(), {"--loss", "acl"});
  const Outcome o = invoke(args);
  ASSERT_EQ(o.code, 0) << o.err;
  const fs::path run = first_line(o.out);
  for (const char* f : {"model.bin", "state.json", "history.csv", "eval.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  EXPECT_EQ(count_lines(slurp(run / "history.csv")), 25u);  // header + 24 epochs
  std::ifstream in(run / "eval.json");
  const auto eval = nlohmann::json::parse(in);
  EXPECT_TRUE(eval.at("correction_auc").is_number());

  // Re-running with identical flags reuses the directory and bytes.
  const std::string history = slurp(run / "history.csv");
  const Outcome again = invoke(args);
  EXPECT_EQ(first_line(again.out), run.string());
  EXPECT_EQ(slurp(run / "history.csv"), history);

  const Outcome ev = invoke({"eval", "--model", (run / "model.bin").string(), "--data",
                             sibling(ds, ".test.bin").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(nlohmann::json::parse(ev.out).at("rsum"), eval.at("rsum"));
}

TEST_F(CliTest, TripletBaselineCompletes) {
  const std::string ds = make_data();
  auto args = small_train(ds);
  args.insert(args.end(), {"--loss", "triplet_hn", "--no-scc"});
  const Outcome o = invoke(args);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(fs::path(first_line(o.out)) / "eval.json"));
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  const std::string ds = make_data("0.4");
  auto full_args = small_train(ds);
  const Outcome full = invoke(full_args);
  ASSERT_EQ(full.code, 0) << full.err;
  const std::string expected = slurp(fs::path(first_line(full.out)) / "history.csv");

  auto partial = small_train(ds);
  partial[partial.size() - 1] = path("runs_b");
  partial.insert(partial.end(), {"--stop-after", "6"});
  const Outcome stopped = invoke(partial);
  ASSERT_EQ(stopped.code, 0) << stopped.err;
  const fs::path ckpt = fs::path(first_line(stopped.out)) / "checkpoint.json";
  ASSERT_TRUE(fs::exists(ckpt));

  const Outcome resumed = invoke({"train", "--data", ds, "--resume", ckpt.string(),
                                  "--out-dir", path("runs_c")});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_EQ(slurp(fs::path(first_line(resumed.out)) / "history.csv"), expected);
}

TEST_F(CliTest, TrainReportsMissingData) {
  EXPECT_EQ(invoke({"train", "--data", path("none.bin")}).code, kFailure);
  EXPECT_EQ(invoke({"train"}).code, kUsage);
  const std::string ds = make_data();
  EXPECT_EQ(invoke({"train", "--data", ds, "--loss", "mse"}).code, kUsage);
  EXPECT_EQ(invoke({"train", "--data", ds, "--pieces", "4,x"}).code, kUsage);
}

TEST_F(CliTest, CorruptDatasetIsAValidationFailure) {
  const std::string ds = make_data();
  {
    std::ofstream out(ds, std::ios::binary | std::ios::app);
    out << "junk";
  }
  const Outcome o = invoke({"train", "--data", ds, "--out-dir", path("runs")});
  EXPECT_EQ(o.code, kValidation);
  EXPECT_NE(o.err.find("trailing"), std::string::npos);
}

TEST_F(CliTest, VerifyTheoryWritesReports) {
  const Outcome o = invoke({"verify-theory", "--n", "3", "--eta", "0.5", "--samples",
                            "2000", "--out-dir", path("theory")});
  ASSERT_EQ(o.code, 0) << o.err << o.out;
  std::ifstream in(path("theory/risk_report.json"));
  const auto report = nlohmann::json::parse(in);
  EXPECT_EQ(report.at("passed"), true);
  EXPECT_EQ(report.at("risk_report").at("minimizers_equal"), true);

  const Outcome curve = invoke({"verify-theory", "--n", "100", "--eta", "0.2", "--curve",
                                "--samples", "100", "--out-dir", path("curve")});
  ASSERT_EQ(curve.code, 0) << curve.err;
  const std::string csv = slurp(path("curve/c_curve.csv"));
  EXPECT_EQ(count_lines(csv), 102u);
  EXPECT_EQ(first_line(csv), "q,C,C_prime");
}

TEST_F(CliTest, VerifyTheoryRejectsOutOfRangeEta) {
  EXPECT_EQ(invoke({"verify-theory", "--n", "4", "--eta", "0.9"}).code, kUsage);
  EXPECT_EQ(invoke({"verify-theory", "--q", "1.5"}).code, kUsage);
}

TEST_F(CliTest, SweepWritesOneRowPerCell) {
  const Outcome o = invoke({"sweep", "--n", "200", "--dv", "12", "--dt", "12",
                            "--latent-dim", "6", "--n-test", "100", "--pieces", "2,2,4",
                            "--batch-size", "32", "--embed-dim", "6", "--losses",
                            "acl,triplet_hn,complementary_only:q=0", "--etas", "0.2,0.6",
                            "--threads", "2", "--out", path("sweep.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string csv = slurp(path("sweep.csv"));
  EXPECT_EQ(count_lines(csv), 7u);
  EXPECT_EQ(csv.find("error"), std::string::npos);
  EXPECT_EQ(invoke({"sweep", "--losses", "", "--out", path("x.csv")}).code, kUsage);
  EXPECT_EQ(invoke({"sweep", "--losses", "acl:foo", "--out", path("x.csv")}).code, kUsage);
}

TEST_F(CliTest, ExportPlotsFromRun) {
  const std::string ds = make_data();
  const Outcome t = invoke(small_train(ds));
  ASSERT_EQ(t.code, 0) << t.err;
  const fs::path run = first_line(t.out);
  const Outcome o = invoke({"export-plots", "--run-dir", run.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(count_lines(slurp(run / "label_hist_final.csv")), 1 + kHistogramBins);
  EXPECT_EQ(count_lines(slurp(run / "training_curves.csv")), 25u);
  EXPECT_EQ(invoke({"export-plots", "--run-dir", path("missing")}).code, kFailure);
}

TEST_F(CliTest, UnknownCommandIsUsageError) {
  EXPECT_EQ(invoke({"frobnicate"}).code, kUsage);
  EXPECT_EQ(invoke({}).code, kUsage);
  EXPECT_EQ(invoke({"--help"}).code, kOk);
}

TEST(CliBinary, ExitCodeReachesShell) {
  const std::string cmd = std::string(CRCL_CLI_PATH) + " gen-data --eta 1.5 --out /dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kUsage);
}

TEST(RunManifest, HashIgnoresWallTime) {
  RunManifest a;
  a.command = "train";
  a.config = {{"x", 1}};
  RunManifest b = a;
  b.wall_time_seconds = 12.5;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 3;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(RunManifest::from_json(a.to_json()).hash(), a.hash());
}

}  // namespace
}  // namespace crcl::cli
