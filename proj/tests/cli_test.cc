// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the tokprune binary end to end on a tiny model.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tokprune/io.hpp"

#ifndef TOKPRUNE_CLI_PATH
#error "TOKPRUNE_CLI_PATH must point at the tokprune binary"
#endif

namespace tokprune {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(TOKPRUNE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json without_timestamp(nlohmann::json doc) {
  if (doc.contains("manifest")) doc["manifest"].erase("timestamp");
  return doc;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_json(dir_ / "mini.json", {{"depth", 4},
                                    {"embed_dim", 32},
                                    {"num_heads", 2},
                                    {"mlp_ratio", 2.0},
                                    {"num_tokens", 33},
                                    {"num_special_tokens", 1},
                                    {"num_classes", 5}});
  }

  int cli(const std::string& args) { return run_cli(args, dir_ / "log.txt"); }
  std::string log() { return slurp(dir_ / "log.txt"); }
  std::string p(const std::string& name) { return (dir_ / name).string(); }

  void make_model() {
    ASSERT_EQ(cli("gen-model --config " + p("mini.json") + " --seed 4 --out " + p("m.vitw")), 0)
        << log();
  }

  void make_profile() {
    make_model();
    ASSERT_EQ(cli("gen-dataset --config " + p("mini.json") + " --samples 12 --seed 2 --out " +
                  p("d.bin") + " --label-model " + p("m.vitw")),
              0)
        << log();
    ASSERT_EQ(cli("profile --model " + p("m.vitw") + " --dataset " + p("d.bin") +
                  " --stride 8 --reps 3 --warmup 1 --seed 5 --device-label ci --out " +
                  p("prof.json")),
              0)
        << log();
  }

  test::TempDir dir_;
};

TEST_F(CliTest, FullPipeline) {
  make_profile();
  const nlohmann::json prof = read_json(dir_ / "prof.json");
  EXPECT_EQ(prof["grid"].size(), 5u);  // 2, 10, 18, 26, 33
  EXPECT_EQ(prof["grid"].back()["n"], 33);
  EXPECT_EQ(prof["grid"].back()["accuracy"], 1.0);
  EXPECT_TRUE(fs::exists(dir_ / "prof.csv"));
  EXPECT_EQ(slurp(dir_ / "prof.csv").rfind("# manifest_hash=", 0), 0u);

  ASSERT_EQ(cli("plan --profile " + p("prof.json") + " --alpha 0.5 --out " + p("s.json")), 0)
      << log();
  const nlohmann::json sched = read_json(dir_ / "s.json");
  EXPECT_EQ(sched["R"].get<int>(), 33 - sched["n_keep"].get<int>());
  EXPECT_EQ(sched["prune_layer"], 1);
  EXPECT_TRUE(fs::exists(dir_ / "s.utility.csv"));

  ASSERT_EQ(cli("run --model " + p("m.vitw") + " --schedule " + p("s.json") +
                " --batch 2 --reps 2 --warmup 0 --compare-baseline --out " + p("logits.json")),
            0)
      << log();
  EXPECT_NE(log().find("baseline median"), std::string::npos);
  const nlohmann::json logits = read_json(dir_ / "logits.json");
  EXPECT_EQ(logits["shape"], nlohmann::json({2, 5}));
  EXPECT_TRUE(logits["timing"].contains("percent_change"));

  ASSERT_EQ(cli("detect --profile " + p("prof.json") + " --out " + p("steps.json")), 0) << log();
  EXPECT_TRUE(read_json(dir_ / "steps.json")["steps"].is_array());
}

TEST_F(CliTest, AlphaOneWithoutPruningMatchesBaseline) {
  make_profile();
  ASSERT_EQ(cli("plan --profile " + p("prof.json") + " --alpha 1 --out " + p("s.json")), 0);
  const nlohmann::json sched = read_json(dir_ / "s.json");
  // Self-labelled data: the full set scores 1.0, so alpha = 1 keeps every token.
  EXPECT_EQ(sched["R"], 0);
  ASSERT_EQ(cli("run --model " + p("m.vitw") + " --schedule " + p("s.json") +
                " --batch 3 --reps 1 --warmup 0 --compare-baseline --out " + p("l.json")),
            0)
      << log();
  EXPECT_LE(read_json(dir_ / "l.json")["max_abs_logit_diff"].get<double>(), 1e-6);
}

TEST_F(CliTest, NonTimingOutputsAreReproducible) {
  make_model();
  const std::string first = slurp(dir_ / "m.vitw");
  ASSERT_EQ(cli("gen-model --config " + p("mini.json") + " --seed 4 --out " + p("m2.vitw")), 0);
  EXPECT_EQ(slurp(dir_ / "m2.vitw"), first);

  // Plans depend only on the profile, so the same profile gives the same plan.
  ASSERT_EQ(cli("gen-dataset --config " + p("mini.json") + " --samples 4 --out " + p("d.json")),
            0);
  ASSERT_EQ(cli("profile --model " + p("m.vitw") + " --dataset " + p("d.json") +
                " --stride 16 --reps 1 --warmup 0 --out " + p("p.json")),
            0)
      << log();
  ASSERT_EQ(cli("plan --profile " + p("p.json") + " --out " + p("a.json")), 0);
  ASSERT_EQ(cli("plan --profile " + p("p.json") + " --out " + p("b.json")), 0);
  nlohmann::json a = without_timestamp(read_json(dir_ / "a.json"));
  nlohmann::json b = without_timestamp(read_json(dir_ / "b.json"));
  a["manifest"].erase("outputs");
  b["manifest"].erase("outputs");
  a["manifest"].erase("hash");
  b["manifest"].erase("hash");
  EXPECT_EQ(a, b);
  const nlohmann::json prof = read_json(dir_ / "p.json");
  for (const auto& row : prof["grid"]) {
    EXPECT_TRUE(row["accuracy"].is_number());
  }
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("plan --profile x.json"), 1);  // missing --out
  EXPECT_EQ(cli("plan --profile x.json --alpha 2 --out y.json"), 1);
  EXPECT_EQ(cli("--version"), 0);
}

TEST_F(CliTest, ValidationErrorsExitTwoWithoutPartialOutput) {
  EXPECT_EQ(cli("plan --profile " + p("missing.json") + " --out " + p("s.json")), 2);
  EXPECT_NE(log().find("missing.json"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "s.json"));

  make_model();
  std::string bytes = slurp(dir_ / "m.vitw");
  bytes.resize(bytes.size() / 2);
  std::ofstream(dir_ / "cut.vitw", std::ios::binary) << bytes;
  EXPECT_EQ(cli("profile --model " + p("cut.vitw") + " --model-config " + p("m.json") +
                " --reps 1 --warmup 0 --out " + p("prof.json")),
            2);
  EXPECT_FALSE(fs::exists(dir_ / "prof.json"));
  EXPECT_FALSE(fs::exists(dir_ / "prof.csv"));

  nlohmann::json bad = read_json(dir_ / "mini.json");
  bad["embed_dim"] = 30;
  bad["num_heads"] = 4;
  write_json(dir_ / "bad.json", bad);
  EXPECT_EQ(cli("gen-model --config " + p("bad.json") + " --out " + p("bad.vitw")), 2);
  EXPECT_FALSE(fs::exists(dir_ / "bad.vitw"));

  // Profile without accuracy cannot be planned.
  ASSERT_EQ(cli("profile --model " + p("m.vitw") + " --stride 16 --reps 1 --warmup 0 --out " +
                p("lat.json")),
            0)
      << log();
  EXPECT_EQ(cli("plan --profile " + p("lat.json") + " --out " + p("s.json")), 2);
  EXPECT_FALSE(fs::exists(dir_ / "s.json"));
}

}  // namespace
}  // namespace tokprune
