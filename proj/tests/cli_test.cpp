#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "elign/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = elign::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("elign_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "tiny.toml") << R"(task = "coop_nav"
n_agents = 2
episodes_per_epoch = 2
max_epochs = 2
update_ratio = 0.1
hidden = [8]
dynamics_hidden = [8]
batch_size = 16
buffer_capacity = 1000
eval_episodes = 2
final_eval_episodes = 2
)";
  }
  void TearDown() override { fs::remove_all(root_); }

  Result train(const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--config", (root_ / "tiny.toml").string(), "--output",
                                  out.string(), "--quiet"};
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args);
  }

  fs::path root_;
};

}  // namespace

TEST_F(Cli, TrainWritesRunDirectory) {
  const fs::path run = root_ / "run";
  const Result r = train(run);
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("epochs"), 2);
  EXPECT_EQ(j.at("final_eval").at("episodes"), 2);
  for (const char* f : {"config.json", "metrics.csv", "summary.json", "checkpoint/config.json",
                        "checkpoint/agent_0/actor.net", "checkpoint/agent_1/dynamics.net"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  const std::string metrics = slurp(run / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);
  EXPECT_EQ(metrics.rfind("epoch,policy_updates,", 0), 0u);
}

TEST_F(Cli, RefusesExistingOutputWithoutForce) {
  const fs::path run = root_ / "run";
  fs::create_directories(run);
  std::ofstream(run / "keep.txt") << "x";
  const Result r = train(run);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err.substr(0, r.err.find('\n'))).at("kind"), "user");
  EXPECT_TRUE(fs::exists(run / "keep.txt"));
  EXPECT_EQ(train(run, {"--force"}).code, 0);
  EXPECT_FALSE(fs::exists(run / "keep.txt"));
}

TEST_F(Cli, OverridesAndMetricsAreReproducible) {
  ASSERT_EQ(train(root_ / "a", {"--override", "seed=4"}).code, 0);
  ASSERT_EQ(train(root_ / "b", {"--override", "seed=4"}).code, 0);
  EXPECT_EQ(slurp(root_ / "a" / "metrics.csv"), slurp(root_ / "b" / "metrics.csv"));
  EXPECT_EQ(json::parse(slurp(root_ / "a" / "config.json")).at("seed"), 4);
}

TEST_F(Cli, UsageErrors) {
  Result r = invoke({"train", "--no-such-flag"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("\"kind\":\"user\""), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"--help"}).code, 0);

  std::ofstream(root_ / "bad.toml") << "bogus_key = 1\n";
  r = invoke({"train", "--config", (root_ / "bad.toml").string(), "--output", (root_ / "x").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bogus_key"), std::string::npos);

  r = invoke({"eval", "--checkpoint", (root_ / "missing").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, ScaleSweepRejectsOddHeteroCountsBeforeTraining) {
  std::ofstream(root_ / "hetero.toml") << "task = \"hetero_nav\"\nmax_epochs = 1\n";
  const Result r = invoke({"scale-sweep", "--config", (root_ / "hetero.toml").string(), "--counts", "4,3",
                           "--output", (root_ / "sweep").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("even"), std::string::npos);
  EXPECT_FALSE(fs::exists(root_ / "sweep" / "n4"));
}

TEST_F(Cli, EvalZeroShotAndTraces) {
  ASSERT_EQ(train(root_ / "a", {"--override", "seed=1"}).code, 0);
  ASSERT_EQ(train(root_ / "b", {"--override", "seed=2"}).code, 0);

  Result r = invoke({"eval", "--checkpoint", (root_ / "a").string(), "--episodes", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  json j = json::parse(r.out);
  EXPECT_EQ(j.at("episodes"), 3);
  EXPECT_TRUE(j.contains("mean_reward"));
  EXPECT_TRUE(j.contains("std_error"));

  r = invoke({"zero-shot", "--checkpoint", (root_ / "a").string(), "--checkpoint", (root_ / "b").string(),
              "--episodes", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = json::parse(r.out);
  EXPECT_EQ(j.at("teams").size(), 2u);
  EXPECT_TRUE(j.at("aggregate").contains("mean_reward"));

  r = invoke({"zero-shot", "--checkpoint", (root_ / "a").string()});
  EXPECT_EQ(r.code, 1);

  const fs::path traces = root_ / "traces.jsonl";
  r = invoke({"export-traces", "--checkpoint", (root_ / "a" / "checkpoint").string(), "--output",
              traces.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(traces);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const json step = json::parse(line);
    EXPECT_EQ(step.at("agents").size(), 2u);
    EXPECT_EQ(step.at("velocities").size(), 2u);
    EXPECT_EQ(step.at("actions").size(), 2u);
    ++lines;
  }
  EXPECT_EQ(lines, 25);
}

TEST_F(Cli, ScaleSweepEmitsOneRowPerCount) {
  const Result r = invoke({"scale-sweep", "--config", (root_ / "tiny.toml").string(), "--counts", "2,3",
                           "--output", (root_ / "sweep").string(), "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root_ / "sweep" / "n2" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(root_ / "sweep" / "n3" / "checkpoint" / "agent_2" / "actor.net"));
  const std::string table = slurp(root_ / "sweep" / "scale_sweep.csv");
  EXPECT_EQ(table, r.out);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_EQ(table.rfind("n_agents,", 0), 0u);
}

TEST_F(Cli, NoiseAblationTable) {
  const Result r = invoke({"noise-ablation", "--config", (root_ / "tiny.toml").string(), "--sigma", "0.5,2",
                           "--output", (root_ / "noise").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(root_ / "noise" / "noise_ablation.csv"), r.out);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  EXPECT_EQ(invoke({"noise-ablation", "--config", (root_ / "tiny.toml").string(), "--sigma", "-1", "--output",
                    (root_ / "bad").string()})
                .code,
            1);
}
