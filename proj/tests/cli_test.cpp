#include "stepadapt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

namespace stepadapt {
namespace {

namespace fs = std::filesystem;

const char* kSmallConfig = R"({
  "noise": {"family": "gaussian", "params": {"sigma": 0.1}},
  "rule": {"u": 1.05, "d": 0.9, "gbar": 0.5},
  "run": {"horizon": 4000, "seed": 3, "n_seeds": 6, "record_stride": 50},
  "sweep": {"u_grid": [1.05], "d_grid": [0.9], "d_list": [0.7, 0.8]},
  "kcurve": {"n_points": 5, "mc_samples": 2000}
})";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stepadapt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int invoke(Subcommand cmd, const std::string& sub, std::string_view text, CliOptions opts = {}) {
    opts.out_dir = dir_ / sub;
    std::ostringstream out;
    err_.str("");
    return dispatch(cmd, text, opts, out, err_);
  }

  std::string read(const std::string& sub, const std::string& file) const {
    std::ifstream in(dir_ / sub / file, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream err_;
};

std::string note(const std::string& csv, const std::string& key) {
  std::istringstream in(csv);
  const std::string prefix = "# " + key + ": ";
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return {};
}

std::vector<std::string> last_row(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  std::vector<std::string> cells;
  std::istringstream row(last);
  for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
  return cells;
}

TEST(Subcommands, NamesRoundTrip) {
  for (auto s : {Subcommand::Run, Subcommand::Ensemble, Subcommand::Phase, Subcommand::KCurve, Subcommand::Precision,
                 Subcommand::Check})
    EXPECT_EQ(parse_subcommand(subcommand_name(s)), s);
  EXPECT_FALSE(parse_subcommand("train").has_value());
}

TEST(Formatting, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST_F(CliTest, CheckOnValidConfig) {
  ASSERT_EQ(invoke(Subcommand::Check, "check", kSmallConfig), kExitOk) << err_.str();
  const auto doc = json::parse(read("check", "check.json"));
  EXPECT_FALSE(doc["blocking_failure"].get<bool>());
  for (const auto& c : doc["checks"]) EXPECT_EQ(c["verdict"], "pass") << c["assumption"];
  EXPECT_EQ(doc["metadata"]["tool"], "stepadapt 0.1.0");
}

TEST_F(CliTest, CheckReportsBlockingFailure) {
  EXPECT_EQ(invoke(Subcommand::Check, "check", R"({"rule": {"gbar": 3}})"), kExitValidation);
  const auto doc = json::parse(read("check", "check.json"));
  EXPECT_TRUE(doc["blocking_failure"].get<bool>());
}

TEST_F(CliTest, GateAndForce) {
  EXPECT_EQ(invoke(Subcommand::Run, "run", R"({"rule": {"gbar": 3}, "run": {"horizon": 50}})"), kExitValidation);
  EXPECT_NE(err_.str().find("A5"), std::string::npos);
  CliOptions forced;
  forced.force = true;
  EXPECT_EQ(invoke(Subcommand::Run, "run", R"({"rule": {"gbar": 3}, "run": {"horizon": 50}})", forced), kExitOk);
  EXPECT_EQ(note(read("run", "trajectory.csv"), "force"), "true");
}

TEST_F(CliTest, MalformedConfigExitsOne) {
  EXPECT_EQ(invoke(Subcommand::Run, "run", "{\"bogus\": 1}"), kExitValidation);
  EXPECT_NE(err_.str().find("parse error"), std::string::npos);
}

TEST_F(CliTest, EnsembleRerunIsByteIdentical) {
  ASSERT_EQ(invoke(Subcommand::Ensemble, "a", kSmallConfig), kExitOk);
  ASSERT_EQ(invoke(Subcommand::Ensemble, "b", kSmallConfig), kExitOk);
  CliOptions threaded;
  threaded.threads = 4;
  ASSERT_EQ(invoke(Subcommand::Ensemble, "c", kSmallConfig, threaded), kExitOk);
  const auto a = read("a", "ensemble.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, read("b", "ensemble.csv"));
  EXPECT_EQ(a, read("c", "ensemble.csv"));
}

TEST_F(CliTest, SingleCellPhaseMatchesEnsemble) {
  ASSERT_EQ(invoke(Subcommand::Ensemble, "ens", kSmallConfig), kExitOk);
  ASSERT_EQ(invoke(Subcommand::Phase, "phase", kSmallConfig), kExitOk);
  const auto ens = read("ens", "ensemble.csv");
  const auto phase = read("phase", "phase.csv");
  const auto row = last_row(phase);
  ASSERT_EQ(row.size(), 8u);
  EXPECT_EQ(row[0], "1.05");
  EXPECT_EQ(row[4], "converge");
  EXPECT_EQ(row[5], note(ens, "conv_fraction"));
  EXPECT_EQ(row[6], note(ens, "median_limit_err"));
  EXPECT_EQ(row[7], note(ens, "median_slope"));
}

TEST_F(CliTest, ArtifactsAndJsonFormat) {
  ASSERT_EQ(invoke(Subcommand::Run, "run", kSmallConfig), kExitOk);
  const auto traj = read("run", "trajectory.csv");
  EXPECT_NE(traj.find("t,x,y,gamma,ln_gamma\n0,2,,0.5,"), std::string::npos);
  EXPECT_EQ(note(traj, "status"), "converged");

  ASSERT_EQ(invoke(Subcommand::KCurve, "k", kSmallConfig), kExitOk);
  const auto krow = last_row(read("k", "kcurve.csv"));
  ASSERT_EQ(krow.size(), 6u);
  EXPECT_EQ(krow[0], "0.5");

  ASSERT_EQ(invoke(Subcommand::Precision, "p", kSmallConfig), kExitOk);
  const auto prec = read("p", "precision.csv");
  EXPECT_EQ(note(prec, "u"), "1.05");
  EXPECT_EQ(last_row(prec)[0], "0.8");

  std::string as_json = kSmallConfig;
  as_json.replace(as_json.rfind('}'), 1, R"(, "output": {"format": "json"}})");
  ASSERT_EQ(invoke(Subcommand::Ensemble, "j", as_json), kExitOk) << err_.str();
  const auto doc = json::parse(read("j", "ensemble.json"));
  EXPECT_EQ(doc["rows"].size(), 6u);
  EXPECT_EQ(doc["summary"]["n_seeds"], "6");
  EXPECT_TRUE(doc["metadata"]["config"].is_object());
}

TEST_F(CliTest, SeedsOverride) {
  CliOptions opts;
  opts.seeds = 2;
  ASSERT_EQ(invoke(Subcommand::Ensemble, "s", kSmallConfig, opts), kExitOk);
  EXPECT_EQ(note(read("s", "ensemble.csv"), "n_seeds"), "2");
}

}  // namespace
}  // namespace stepadapt
