// Copyright 2026 The HNF Authors.
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hnf/cli.hpp"
#include "hnf/serialization.hpp"

namespace hnf {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hnf_cli_" + std::string(::testing::UnitTest::GetInstance()
                                         ->current_test_info()
                                         ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int train_blobs(const std::string& out, int depth = 3) {
    return run({"train", "--data", "blobs", "--n1", "16", "--depth", std::to_string(depth),
                "--weights", "random", "--seed", "1", "--out", out});
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

std::vector<std::string> read_lines(const std::string& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) lines.push_back(l);
  }
  return lines;
}

TEST_F(CliTest, TrainWritesArtifacts) {
  ASSERT_EQ(train_blobs(path("run")), 0) << err_.str();
  EXPECT_EQ(read_lines(path("run/report.jsonl")).size(), 4u);
  EXPECT_EQ(read_lines(path("run/report.csv")).size(), 5u);
  for (const char* f : {"run.json", "network.json", "data_meta.json", "weights/stage_1.hnfw",
                        "weights/stage_3.hnfw", "maps/layer_0.hnfm", "maps/layer_3.hnfm"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  const auto manifest = load_run_manifest(path("run/run.json"));
  EXPECT_EQ(manifest.config.n1, 16);
  EXPECT_EQ(manifest.config.depth, 3);
  EXPECT_EQ(manifest.layer_seeds.size(), 3u);
  EXPECT_TRUE(manifest.monotonicity_certified);
  EXPECT_EQ(manifest.data.source, "blobs");
}

TEST_F(CliTest, TrainExitCodes) {
  EXPECT_EQ(run({"train", "--data", "csv:" + path("missing.csv"), "--out", path("r")}), 3);
  EXPECT_EQ(run({"train", "--depth", "0", "--out", path("r")}), 2);
  EXPECT_EQ(run({"train", "--weights", "hadamard", "--out", path("r")}), 2);
  EXPECT_EQ(run({"train", "--n1", "4", "--out", path("r")}), 2);
  EXPECT_EQ(run({"train", "--bogus"}), 2);
  EXPECT_EQ(run({}), 2);
}

TEST_F(CliTest, MemoryBudgetExitCode) {
  ::setenv("HNF_MEM_BUDGET", "20000", 1);
  const int code = train_blobs(path("r"));
  ::unsetenv("HNF_MEM_BUDGET");
  EXPECT_EQ(code, 5) << err_.str();
  ::setenv("HNF_MEM_BUDGET", "lots", 1);
  const int bad = train_blobs(path("r"));
  ::unsetenv("HNF_MEM_BUDGET");
  EXPECT_EQ(bad, 2);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  {
    std::ofstream cfg(path("train.ini"));
    cfg << "data=blobs\nn1=12\ndepth=2\nweights=dct\nseed=3\n";
  }
  ASSERT_EQ(run({"train", "--config", path("train.ini"), "--depth", "1", "--out", path("run")}),
            0)
      << err_.str();
  const auto m = load_run_manifest(path("run/run.json"));
  EXPECT_EQ(m.config.n1, 12);
  EXPECT_EQ(m.config.depth, 1);
  EXPECT_EQ(m.config.weight_kind, WeightKind::DctOrthonormal);
  EXPECT_DOUBLE_EQ(m.config.effective_admm().penalty, 1e2);
}

TEST_F(CliTest, EvalReproducesReport) {
  ASSERT_EQ(train_blobs(path("run")), 0);
  const auto records = read_report_jsonl(path("run/report.jsonl"));
  const auto run = cli::load_run(path("run"));
  for (const auto& r : records) {
    const auto tr = evaluate(run.net.network, run.net.maps, run.data, r.layer, Split::Train);
    const auto te = evaluate(run.net.network, run.net.maps, run.data, r.layer, Split::Test);
    EXPECT_NEAR(tr.cost, r.train_cost, 1e-9 * r.train_cost);
    EXPECT_DOUBLE_EQ(tr.accuracy, r.train_acc);
    EXPECT_DOUBLE_EQ(te.accuracy, r.test_acc);
  }
  EXPECT_EQ(this->run({"eval", "--run", path("run")}), 0);
  EXPECT_EQ(this->run({"eval", "--run", path("run"), "--layer", "2"}), 0);
  EXPECT_EQ(this->run({"eval", "--run", path("run"), "--layer", "99"}), 2);
  EXPECT_EQ(this->run({"eval", "--run", path("nowhere")}), 3);
}

TEST_F(CliTest, VerifyFreshAndSaved) {
  EXPECT_EQ(run({"verify", "--n1", "16", "--depth", "3", "--trials", "200"}), 0) << out_.str();
  EXPECT_NE(out_.str().find("distance_sandwich"), std::string::npos);
  EXPECT_EQ(run({"verify", "--trials", "0"}), 2);
  ASSERT_EQ(train_blobs(path("run")), 0);
  EXPECT_EQ(run({"verify", "--run", path("run"), "--trials", "100"}), 0) << out_.str();
}

TEST_F(CliTest, VerifyCorruptedWeightFails) {
  ASSERT_EQ(train_blobs(path("run")), 0);
  const std::string w = path("run/weights/stage_2.hnfw");
  WeightMatrix orig = load_weight(w);
  Eigen::MatrixXd m = orig.matrix();
  m.col(1) = m.col(0);
  save_weight(WeightMatrix(m, orig.kind(), orig.seed()), w);
  EXPECT_EQ(run({"verify", "--run", path("run"), "--trials", "50"}), 4) << out_.str();
  EXPECT_NE(out_.str().find("inversion_round_trip"), std::string::npos);
}

TEST_F(CliTest, CurvesMatchReport) {
  ASSERT_EQ(train_blobs(path("run")), 0);
  ASSERT_EQ(run({"curves", "--report", path("run/report.jsonl"), "--out", path("c.csv")}), 0);
  const auto lines = read_lines(path("c.csv"));
  ASSERT_EQ(lines.size(), 5u);
  const auto records = read_report_jsonl(path("run/report.jsonl"));
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::ostringstream row;
    row << records[i].layer << ',' << records[i].nodes_cumulative << ','
        << format_number(records[i].train_acc) << ',' << format_number(records[i].test_acc)
        << ',' << format_number(records[i].train_cost);
    EXPECT_EQ(lines[i + 1], row.str());
  }
  EXPECT_EQ(run({"curves", "--report", ""}), 3);
  EXPECT_EQ(run({"curves", "--report", path("none.jsonl")}), 3);
  std::ofstream(path("empty.jsonl")).close();
  EXPECT_EQ(run({"curves", "--report", path("empty.jsonl")}), 3);
}

TEST_F(CliTest, ElmRunRoundTrips) {
  ASSERT_EQ(run({"train", "--data", "blobs", "--n1", "20", "--depth", "2", "--elm",
                 "--elm-activation", "sigmoid", "--out", path("run")}),
            0)
      << err_.str();
  EXPECT_EQ(run({"eval", "--run", path("run"), "--layer", "0"}), 0) << err_.str();
  const auto loaded = load_network(path("run"));
  EXPECT_TRUE(loaded.network.has_front());
  EXPECT_EQ(loaded.network.front()->activation, Activation::Sigmoid);
  EXPECT_EQ(loaded.maps.front().layer_index, 1);
}

TEST_F(CliTest, BinaryEntryPoint) {
  const std::string cmd = std::string(HNF_CLI_PATH) + " train --data blobs --n1 16 --depth 2 --out " +
                          path("bin") + " > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string(HNF_CLI_PATH) + " train --depth 0 --out " + path("x") +
                          " > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(Serialization, WeightRoundTripAndCorruption) {
  const fs::path dir = fs::temp_directory_path() / "hnf_ser_weights";
  fs::create_directories(dir);
  const auto w = make_random_orthonormal(7, 3, 42);
  save_weight(w, dir / "w.hnfw");
  const auto back = load_weight(dir / "w.hnfw");
  EXPECT_EQ(back.matrix(), w.matrix());
  EXPECT_EQ(back.kind(), w.kind());
  EXPECT_EQ(back.seed(), w.seed());
  const auto dct = make_dct_orthonormal(4, 4);
  save_weight(dct, dir / "d.hnfw");
  EXPECT_FALSE(load_weight(dir / "d.hnfw").seed().has_value());

  fs::resize_file(dir / "w.hnfw", fs::file_size(dir / "w.hnfw") - 3);
  EXPECT_THROW(load_weight(dir / "w.hnfw"), FormatError);
  std::ofstream(dir / "bad.hnfw") << "NOPE";
  EXPECT_THROW(load_weight(dir / "bad.hnfw"), FormatError);
  EXPECT_THROW(load_weight(dir / "absent.hnfw"), DataError);
  fs::remove_all(dir);
}

TEST(Serialization, NetworkAndMapsRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "hnf_ser_network";
  fs::remove_all(dir);
  const auto d = make_synthetic_blobs(6, 3, 120, 3.0, 1);
  TrainConfig cfg;
  cfg.n1 = 8;
  cfg.depth = 2;
  const auto res = train(d, cfg);
  save_network(dir, res.network, res.maps, cfg.effective_admm());
  const auto back = load_network(dir);
  ASSERT_EQ(back.maps.size(), res.maps.size());
  for (std::size_t i = 0; i < res.maps.size(); ++i) {
    EXPECT_EQ(back.maps[i].matrix, res.maps[i].matrix);
    EXPECT_EQ(back.maps[i].epsilon, res.maps[i].epsilon);
    EXPECT_EQ(back.maps[i].train_cost, res.maps[i].train_cost);
  }
  EXPECT_EQ(back.network.layers()[1].weight().matrix(), res.network.layers()[1].weight().matrix());
  fs::remove_all(dir);
}

TEST(Serialization, TrainConfigJsonRoundTrip) {
  TrainConfig cfg;
  cfg.n1 = 33;
  cfg.depth = 4;
  cfg.weight_kind = WeightKind::RawGaussian;
  cfg.seed = 0xfeedbeefcafeULL;
  cfg.elm_front = true;
  cfg.elm_activation = Activation::Sigmoid;
  cfg.eps_schedule = EpsSchedule::Doubling;
  cfg.widths = {70, 150};
  cfg.warm_start = false;
  const auto back = train_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

}  // namespace
}  // namespace hnf
