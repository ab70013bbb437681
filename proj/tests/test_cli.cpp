#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "drbid/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / ("drbid_cli_test_" + std::to_string(::getpid()));

int run(const std::string& args) {
  const std::string cmd = std::string(DRBID_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const std::string& name, const std::string& body) {
  fs::create_directories(kRoot);
  const auto p = kRoot / name;
  std::ofstream(p) << body;
  return p.string();
}

const char* kTiny = R"({
  "agent": {"hidden": [8], "batch_size": 4, "buffer_capacity": 256},
  "baseline": {"hidden": [8], "epochs": 2},
  "pipeline": {"offline_days": 1, "pretrain_days": 2, "online_days": 1,
               "episodes": 2, "pretrain_episodes": 1}
})";

std::string slurp(const fs::path& p) { return drbid::io::read_text(p); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    config_ = write_config("tiny.json", kTiny);
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }
  static std::string out(const std::string& name) { return (kRoot / name).string(); }
  static inline std::string config_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("simulate --config /nonexistent.json --out " + out("x")), 1);
  EXPECT_EQ(run("simulate --config " + config_ + " --scenario 7 --out " + out("x")), 1);
}

TEST_F(Cli, BadConfigExitsWithConfigError) {
  const auto bad = write_config("bad.json", R"({"agent": {"gama": 0.9}})");
  EXPECT_EQ(run("simulate --config " + bad + " --out " + out("bad")), 1);
  EXPECT_FALSE(fs::exists(out("bad") + "/manifest.json"));
}

TEST_F(Cli, DryRunWritesNothing) {
  EXPECT_EQ(run("train --dry-run --config " + config_ + " --out " + out("dry")), 0);
  EXPECT_FALSE(fs::exists(out("dry") + "/profit_curve.csv"));
}

TEST_F(Cli, SimulateIsByteIdenticalForOneSeed) {
  ASSERT_EQ(run("simulate --config " + config_ + " --seed 4 --out " + out("sim_a")), 0);
  ASSERT_EQ(run("simulate --config " + config_ + " --seed 4 --out " + out("sim_b")), 0);
  ASSERT_EQ(run("simulate --config " + config_ + " --seed 5 --out " + out("sim_c")), 0);
  for (const char* f : {"offline_dataset.csv", "offline_baselines.csv", "customers.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(out("sim_a") + "/" + f), slurp(out("sim_b") + "/" + f)) << f;
  }
  EXPECT_NE(slurp(out("sim_a") + "/offline_dataset.csv"), slurp(out("sim_c") + "/offline_dataset.csv"));
}

TEST_F(Cli, TrainEvaluateReportFlow) {
  ASSERT_EQ(run("train --config " + config_ + " --seed 2 --out " + out("tr_a")), 0);
  ASSERT_EQ(run("train --config " + config_ + " --seed 2 --out " + out("tr_b")), 0);
  for (const char* f : {"profit_curve.csv", "outcomes.csv", "metrics.json", "checkpoint/price_agent.ckpt",
                        "checkpoint/quantity_agent.ckpt"}) {
    EXPECT_EQ(slurp(out("tr_a") + "/" + f), slurp(out("tr_b") + "/" + f)) << f;
  }
  EXPECT_EQ(run("evaluate --config " + config_ + " --seed 2 --pretrained " + out("tr_a") + " --out " + out("ev")), 0);
  EXPECT_TRUE(fs::exists(out("ev") + "/metrics.json"));
  EXPECT_EQ(run("report " + out("tr_a")), 0);
}

TEST_F(Cli, OnlineNeedsPretrainedAgents) {
  EXPECT_EQ(run("train --mode online --config " + config_ + " --out " + out("on_x")), 1);
  ASSERT_EQ(run("train --pretrain --config " + config_ + " --seed 3 --out " + out("pre")), 0);
  ASSERT_EQ(run("train --mode online --pretrained " + out("pre") + " --config " + config_ + " --seed 3 --out " +
                out("on")),
            0);
  EXPECT_TRUE(fs::exists(out("on") + "/baseline_metrics.json"));
  EXPECT_TRUE(fs::exists(out("on") + "/checkpoint/baseline.ckpt"));
}

TEST_F(Cli, CheckpointFromAnotherArchitectureIsRejected) {
  ASSERT_EQ(run("train --config " + config_ + " --out " + out("arch")), 0);
  const auto wide = write_config("wide.json", R"({"agent": {"hidden": [9]}, "pipeline": {"offline_days": 1}})");
  EXPECT_EQ(run("evaluate --config " + wide + " --pretrained " + out("arch") + " --out " + out("arch_ev")), 2);
}

TEST_F(Cli, UnreachableGridThresholdHasItsOwnExitCode) {
  // A clearing price of zero makes every bid unprofitable.
  const auto cfg = write_config("grid.json", R"({
    "agent": {"hidden": [8], "batch_size": 4, "buffer_capacity": 64},
    "scenario": {"mcp": {"coefficients": [0, 0, 0, 0, 0, 0]}},
    "pipeline": {"offline_days": 1, "episodes": 1},
    "grid": {"agent.gamma": [0.0, 0.5]}
  })");
  EXPECT_EQ(run("grid-search --config " + cfg + " --out " + out("grid")), 3);
  EXPECT_TRUE(fs::exists(out("grid") + "/grid.csv"));
  const auto empty = write_config("nogrid.json", R"({"pipeline": {"offline_days": 1}})");
  EXPECT_EQ(run("grid-search --config " + empty + " --out " + out("nogrid")), 1);
}
