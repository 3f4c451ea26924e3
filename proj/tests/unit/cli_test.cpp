#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cdrc_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cdrc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cdrc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("cdrc_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    data = (dir / "d.csv").string();
    schema = (dir / "d.schema.json").string();
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
  std::string data, schema;
};

TEST_F(Cli, SimulateWritesDataSchemaAndManifest) {
  const auto r = cdrc_cli({"simulate", "--system", "sim1", "--n", "1000", "--seed", "7", "--out", data});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(data);
  std::string line;
  std::size_t lines = 0;
  std::getline(in, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 11);
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1000u);
  const auto manifest = nlohmann::json::parse(slurp(dir / "d.manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["outputs"].size(), 2u);
}

TEST_F(Cli, ArgumentErrors) {
  EXPECT_EQ(cdrc_cli({"simulate", "--system", "sim1", "--n", "0", "--out", data}).code, 3);
  const auto r = cdrc_cli({"simulate", "--system", "simX", "--n", "5", "--out", data});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("sim1"), std::string::npos);
  EXPECT_EQ(cdrc_cli({}).code, 3);
  EXPECT_EQ(cdrc_cli({"experiment", "--system", "sim1", "--n", "100", "--R", "1", "--out", dir.string()}).code, 3);
}

TEST_F(Cli, EstimateFilesAndExitCodes) {
  ASSERT_EQ(cdrc_cli({"simulate", "--system", "sim1", "--n", "400", "--out", data}).code, 0);
  const std::string out = (dir / "est").string();
  auto r = cdrc_cli({"estimate", "--data", data, "--schema", schema, "--grid", "3:9:3", "--estimand", "weighted", "--c",
                     "0.001,0.01,1", "--out", out});
  EXPECT_EQ(r.code, 2);  // c = 1 leaves undefined cells
  EXPECT_TRUE(fs::exists(fs::path(out) / "curve_weighted_c0.001.csv"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "curve_weighted_c0.01.csv"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "curve_weighted_c1.csv"));

  r = cdrc_cli({"estimate", "--data", data, "--schema", schema, "--grid", "3:9:3", "--out", out});
  EXPECT_EQ(r.code, 0) << r.err;
  const std::string curve = slurp(fs::path(out) / "curve_cdrc_sequential.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "trajectory_label,time,estimand,c,value,undefined_flag");
  EXPECT_NE(curve.find(",cdrc_sequential,,"), std::string::npos);

  r = cdrc_cli({"bootstrap", "--data", data, "--schema", schema, "--grid", "6", "--B", "50", "--out", out});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(fs::path(out) / "bands_cdrc_sequential.csv"));
  EXPECT_EQ(cdrc_cli({"bootstrap", "--data", data, "--schema", schema, "--grid", "6", "--B", "10", "--out", out}).code, 3);
}

TEST_F(Cli, DiagnoseSurfaces) {
  ASSERT_EQ(cdrc_cli({"simulate", "--system", "sim3", "--n", "300", "--out", data}).code, 0);
  const auto r = cdrc_cli({"diagnose", "--data", data, "--schema", schema, "--grid", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(dir / "weight_proportion.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5u * 5u);  // five c values x five time points, one trajectory
}

TEST_F(Cli, DiagnoseTooFewRowsNamesTimePoint) {
  ASSERT_EQ(cdrc_cli({"simulate", "--system", "sim1", "--n", "10", "--out", data}).code, 0);
  const auto r = cdrc_cli({"diagnose", "--data", data, "--schema", schema, "--grid", "5", "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("A."), std::string::npos);
}

TEST_F(Cli, ConfigFileAndEnvironmentLayering) {
  ASSERT_EQ(cdrc_cli({"simulate", "--system", "sim1", "--n", "300", "--out", data}).code, 0);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"estimate": {"grid": "4", "learners": "ols,mean_only"}})";
  const auto r = cdrc_cli({"estimate", "--data", data, "--schema", schema, "--config", cfg.string(), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["config"]["learners"], "ols,mean_only");
}

TEST_F(Cli, ExperimentIsIdempotent) {
  std::vector<std::string> args = {"experiment", "--system", "sim2", "--n", "300", "--R", "2", "--truth-draws", "2000",
                                   "--estimators", "cdrc_sequential", "--seed", "3", "--out"};
  auto a = args, b = args;
  a.push_back((dir / "a").string());
  b.push_back((dir / "b").string());
  ASSERT_EQ(cdrc_cli(a).code, 0);
  ASSERT_EQ(cdrc_cli(b).code, 0);
  for (const char* f : {"experiment_sim2_n300.csv", "truth_sim2.csv"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f));
}

}  // namespace
