#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nnv/dataset.hpp"
#include "nnv/network_io.hpp"
#include "nnv/report.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = NNV_CLI_PATH;
const std::string kGrid = std::string(NNV_DATA_DIR) + "/ieee9_modified.json";

struct CliRun {
  int code;
  std::string output;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nnv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const auto log = dir_ / "cli.log";
    const std::string cmd = "cd '" + dir_.string() + "' && '" + kCli + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Small dataset plus a briefly trained network.
  void make_artifacts() {
    ASSERT_EQ(run("generate --grid " + kGrid + " --out d.csv --samples 400 --seed 3").code, 0);
    ASSERT_EQ(run("train --dataset d.csv --out n.json --epochs 20 --seed 3").code, 0);
  }

  fs::path dir_;
};

TEST_F(Cli, GenerateSmallRunWritesHeaderAndRows) {
  const auto r = run("generate --grid " + kGrid + " --out d.csv --samples 10");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto d = nnv::load_dataset(path("d.csv"));
  EXPECT_EQ(d.size(), 10);
  EXPECT_EQ(d.dim(), 4);
  EXPECT_EQ(slurp(path("d.csv")).rfind("x_1,x_2,x_3,x_4,label,split\n", 0), 0u);
  EXPECT_NE(r.output.find("safe"), std::string::npos);
}

TEST_F(Cli, GenerateIsByteIdenticalForSameSeed) {
  ASSERT_EQ(run("generate --grid " + kGrid + " --out a.csv --samples 50 --seed 9").code, 0);
  ASSERT_EQ(run("generate --grid " + kGrid + " --out b.csv --samples 50 --seed 9").code, 0);
  ASSERT_EQ(run("generate --grid " + kGrid + " --out c.csv --samples 50 --seed 10").code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, GenerateSplitsEightyFiveFifteen) {
  ASSERT_EQ(run("generate --grid " + kGrid + " --out d.csv --samples 200").code, 0);
  const auto d = nnv::load_dataset(path("d.csv"));
  EXPECT_EQ(d.indices(nnv::Split::Train).size(), 170u);
  EXPECT_EQ(d.indices(nnv::Split::Test).size(), 30u);
}

TEST_F(Cli, MissingGridIsUsageError) {
  const auto r = run("generate --grid does_not_exist.json --out d.csv --samples 10");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("does_not_exist.json"), std::string::npos);
}

TEST_F(Cli, UnknownFlagIsUsageError) { EXPECT_EQ(run("generate --no-such-flag").code, 2); }

TEST_F(Cli, ZeroEpochsWarnsAndPassesThrough) {
  ASSERT_EQ(run("generate --grid " + kGrid + " --out d.csv --samples 100").code, 0);
  const auto r = run("train --dataset d.csv --out n.json --epochs 0 --seed 4");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("warning"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("n.json.confusion.csv")));
}

TEST_F(Cli, MalformedDatasetReportsRow) {
  std::ofstream(path("bad.csv")) << "x_1,x_2,x_3,x_4,label,split\n0.1,0.2,0.3,0.4,safe,train\n0.1,0.2,zz,0.4,safe,train\n";
  const auto r = run("train --dataset bad.csv --out n.json --epochs 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
}

TEST_F(Cli, PruneReachesTargetSparsity) {
  make_artifacts();
  const auto r = run("prune --dataset d.csv --network n.json --out s.json --sparsity 0.8 --epochs 20");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_GE(nnv::load_network(path("s.json")).weight_sparsity(), 0.8);
}

TEST_F(Cli, ZeroBallIsCertified) {
  make_artifacts();
  const auto r = run("verify ball --grid " + kGrid + " --network n.json --out rep --x 0.3,0.6,0.2,0.9 --eps 0");
  EXPECT_EQ(r.code, 0) << r.output;
  const auto rep = nnv::read_json_file(path("rep/report.json"));
  EXPECT_EQ(rep.at("verdict"), "certified");
  EXPECT_FALSE(rep.at("config_hash").get<std::string>().empty());
}

TEST_F(Cli, RegionWitnessReplays) {
  make_artifacts();
  const auto r = run("verify region --grid " + kGrid +
                     " --network n.json --out rep --x 0.2,0.6,0.4,0.4 --power-balance --time-limit 10");
  ASSERT_TRUE(r.code == 0 || r.code == 3) << r.output;
  const auto rep = nnv::read_json_file(path("rep/report.json"));
  EXPECT_EQ(rep.at("ground_truth").at("method"), "scdcopf");
  if (!rep.at("witness").is_null()) {
    const auto net = nnv::load_network(path("n.json"));
    const auto w = nnv::vector_from_json(rep.at("witness"));
    EXPECT_NE(nnv::to_string(nnv::classify(net, w)), rep.at("reference").get<std::string>());
  }
}

TEST_F(Cli, NetworkDatasetShapeMismatchIsUsageError) {
  make_artifacts();
  const auto r = run("verify ball --network n.json --out rep --x 0.1,0.2,0.3 --eps 0.01");
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, AdvAccuracyWritesSummaryCsv) {
  make_artifacts();
  const auto r =
      run("verify adv-accuracy --grid " + kGrid + " --network n.json --dataset d.csv --out rep --eps-grid 0.001,0.01");
  ASSERT_TRUE(r.code == 0 || r.code == 1) << r.output;
  const auto csv = slurp(path("rep/summary.csv"));
  EXPECT_EQ(csv.rfind("eps,robust_fraction,misclassified_fraction,adversarial_fraction\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto rep = nnv::read_json_file(path("rep/report.json"));
  EXPECT_EQ(rep.at("split"), "test");
  EXPECT_EQ(rep.at("records").size(), 2u * 60u);
}

TEST_F(Cli, DescendingEpsGridIsRejected) {
  make_artifacts();
  const auto r = run("verify adv-accuracy --network n.json --dataset d.csv --out rep --eps-grid 0.01,0.001");
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, RetrainRefusesTestSplitReport) {
  make_artifacts();
  const auto f = run("verify find-adv --grid " + kGrid + " --network n.json --dataset d.csv --out adv --eps 0.01 --split test");
  ASSERT_TRUE(f.code == 0 || f.code == 1) << f.output;
  const auto r = run("retrain --grid " + kGrid + " --network n.json --dataset d.csv --out r.json --adversarials adv/report.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("leakage guard"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(Cli, FindAdvSweepMinesEveryEps) {
  make_artifacts();
  const auto r = run("verify find-adv --grid " + kGrid + " --network n.json --dataset d.csv --out adv --sweep" +
                     " --eps-grid 0.01,0.05 --time-limit 2");
  ASSERT_TRUE(r.code == 0 || r.code == 1 || r.code == 3) << r.output;
  const auto rep = nnv::read_json_file(path("adv/report.json"));
  EXPECT_EQ(rep.at("eps").size(), 2u);
  EXPECT_EQ(rep.at("records").size(), 2u * 340u);
  EXPECT_EQ(rep.at("split"), "train");
  for (const auto& a : rep.at("adversarials")) EXPECT_TRUE(a.at("eps") == 0.01 || a.at("eps") == 0.05);
}

TEST_F(Cli, RetrainWithEmptyReportPassesThrough) {
  make_artifacts();
  const auto net_json = nnv::read_json_file(path("n.json"));
  nnv::write_json_file({{"kind", "find-adv"}, {"split", "train"}, {"grid_hash", net_json["meta"]["grid_hash"]},
                        {"adversarials", nlohmann::json::array()}},
                       path("empty.json"));
  const auto r = run("retrain --grid " + kGrid +
                     " --network n.json --dataset d.csv --out r.json --eps-grid 0.01 --adversarials empty.json");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("warning"), std::string::npos);
  EXPECT_EQ(nnv::network_to_json(nnv::load_network(path("r.json"))),
            nnv::network_to_json(nnv::load_network(path("n.json"))));
}

TEST_F(Cli, ArtifactsFromAnotherGridAreRejected) {
  make_artifacts();
  auto g = nnv::read_json_file(kGrid);
  g["branches"][0]["limit_mw"] = 300.0;
  nnv::write_json_file(g, path("other.json"));
  const auto r = run("verify ball --grid other.json --network n.json --out rep --x 0.1,0.2,0.3,0.4 --eps 0.01");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("different grid"), std::string::npos) << r.output;
}

TEST_F(Cli, ConfigFileSuppliesValuesAndFlagsOverride) {
  nnv::write_json_file({{"seed", 5}, {"paths", {{"grid", kGrid}}}, {"generate", {{"samples", 30}}}}, path("cfg.json"));
  ASSERT_EQ(run("generate --config cfg.json --out a.csv").code, 0);
  EXPECT_EQ(nnv::load_dataset(path("a.csv")).size(), 30);
  ASSERT_EQ(run("generate --config cfg.json --out b.csv --samples 20").code, 0);
  EXPECT_EQ(nnv::load_dataset(path("b.csv")).size(), 20);
}

TEST_F(Cli, ConfigUnknownKeyIsUsageError) {
  nnv::write_json_file({{"sede", 5}}, path("cfg.json"));
  const auto r = run("generate --config cfg.json --grid " + kGrid + " --out a.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("sede"), std::string::npos);
}

}  // namespace
