// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/scheduler.hpp"

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tokprune/errors.hpp"
#include "tokprune/io.hpp"

namespace tokprune {
namespace {

WorkloadProfile curves(std::vector<std::size_t> n, std::vector<double> lat,
                       std::vector<double> acc, std::size_t num_tokens) {
  return profile_from_curves(n, lat, acc, num_tokens);
}

TEST(UtilityTest, AccuracyNormalizedByMax) {
  const auto u = utility_accuracy(std::vector<double>{0.2, 0.4, 0.8});
  ASSERT_EQ(u.size(), 3u);
  EXPECT_DOUBLE_EQ(u[0], 0.25);
  EXPECT_DOUBLE_EQ(u[1], 0.5);
  EXPECT_DOUBLE_EQ(u[2], 1.0);
}

TEST(UtilityTest, LatencyNormalizedByMax) {
  const auto u = utility_latency(std::vector<double>{50.0, 100.0});
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  EXPECT_DOUBLE_EQ(u[1], 0.0);
}

TEST(UtilityTest, DegenerateCurvesAreRejected) {
  try {
    utility_accuracy(std::vector<double>{0.0, 0.0});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate profile"), std::string::npos);
  }
  EXPECT_THROW(utility_latency(std::vector<double>{0.0}), ValidationError);
  const WorkloadProfile zero = curves({2, 3}, {1.0, 2.0}, {0.0, 0.0}, 3);
  EXPECT_THROW(select_schedule(zero, 0.5), ValidationError);
}

TEST(SelectScheduleTest, TieGoesToLargerKeptCount) {
  // U = 0.5 * [0.6, 0.9, 1.0] + 0.5 * [0.75, 0.5, 0.0] = [0.675, 0.7, 0.5].
  const WorkloadProfile p = curves({64, 128, 256}, {25, 50, 100}, {0.6, 0.9, 1.0}, 256);
  const PruningSchedule s = select_schedule(p, 0.5);
  EXPECT_EQ(s.n_keep, 128u);
  EXPECT_EQ(s.r, 128u);

  // Flat utility: every point ties, so the largest n wins.
  const WorkloadProfile flat = curves({10, 20, 30}, {5, 5, 5}, {0.5, 0.5, 0.5}, 30);
  EXPECT_EQ(select_schedule(flat, 0.5).n_keep, 30u);
  EXPECT_EQ(select_schedule(flat, 0.5).r, 0u);
}

TEST(SelectScheduleTest, AlphaEndpoints) {
  const WorkloadProfile p = curves({2, 50, 100, 197}, {10, 30, 60, 100},
                                   {0.1, 0.6, 0.9, 0.9}, 197);
  // Pure accuracy: max U_A ties at 100 and 197; ties go to the larger n.
  EXPECT_EQ(select_schedule(p, 1.0).n_keep, 197u);
  // Pure latency: smallest latency.
  EXPECT_EQ(select_schedule(p, 0.0).n_keep, 2u);
  EXPECT_THROW(select_schedule(p, 1.5), ValidationError);
  EXPECT_THROW(select_schedule(p, -0.1), ValidationError);
}

TEST(SelectScheduleTest, TraceHoldsCombinedUtility) {
  const WorkloadProfile p = curves({5, 6, 7, 8}, {3, 4, 7, 8}, {0.2, 0.5, 0.6, 0.7}, 8);
  const double alpha = 0.3;
  const PruningSchedule s = select_schedule(p, alpha);
  ASSERT_EQ(s.utility_trace.size(), 4u);
  for (const UtilityPoint& u : s.utility_trace) {
    EXPECT_NEAR(u.u, alpha * u.u_a + (1.0 - alpha) * u.u_l, 1e-12);
  }
  EXPECT_EQ(s.profile_hash, p.hash());
}

TEST(SelectScheduleTest, MatchesExhaustiveOracleOnRandomProfiles) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t points = 2 + rng() % 40;
    std::vector<std::size_t> n;
    std::vector<double> lat, acc;
    std::size_t cur = 2;
    for (std::size_t i = 0; i < points; ++i) {
      n.push_back(cur);
      cur += 1 + rng() % 8;
      lat.push_back(10.0 + 1000.0 * unit(rng));
      // Coarse accuracies make ties common.
      acc.push_back(std::round(unit(rng) * 8.0) / 8.0 * 0.99 + 0.01);
    }
    const WorkloadProfile p = profile_from_curves(n, lat, acc, n.back());
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0, unit(rng)}) {
      EXPECT_EQ(select_schedule(p, alpha).n_keep, oracle::best_n_keep(n, lat, acc, alpha))
          << "trial " << trial << " alpha " << alpha;
    }
  }
}

TEST(SelectScheduleTest, InvariantToCurveScaling) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> n;
    std::vector<double> lat, acc, lat_scaled, acc_scaled;
    for (std::size_t i = 0; i < 20; ++i) {
      n.push_back(2 + 10 * i);
      lat.push_back(unit(rng) * 100.0);
      acc.push_back(unit(rng));
      // Powers of two keep the normalized utilities bit-identical.
      lat_scaled.push_back(lat.back() * 8.0);
      acc_scaled.push_back(acc.back() * 0.5);
    }
    const auto a = select_schedule(profile_from_curves(n, lat, acc, 192), 0.6);
    const auto b = select_schedule(profile_from_curves(n, lat_scaled, acc_scaled, 192), 0.6);
    EXPECT_EQ(a.n_keep, b.n_keep);
  }
}

TEST(SelectScheduleTest, NoInterpolationBetweenGridPoints) {
  const WorkloadProfile p = curves({2, 100, 197}, {10, 50, 100}, {0.1, 0.7, 0.8}, 197);
  const PruningSchedule s = select_schedule(p, 0.5);
  const auto g = p.grid();
  EXPECT_NE(std::find(g.begin(), g.end(), s.n_keep), g.end());
}

TEST(PruneLayerTest, QuarterDepthRule) {
  EXPECT_EQ(default_prune_layer(12), 3u);
  EXPECT_EQ(default_prune_layer(40), 10u);
  EXPECT_EQ(default_prune_layer(24), 6u);
  EXPECT_EQ(default_prune_layer(2), 1u);
  EXPECT_EQ(default_prune_layer(1), 0u);
  EXPECT_EQ(default_prune_layer(4), 1u);
  EXPECT_EQ(default_prune_layer(6), 2u);  // 1.5 rounds up
  for (std::size_t d = 2; d < 200; ++d) {
    EXPECT_GE(default_prune_layer(d), 1u);
    EXPECT_LT(default_prune_layer(d), d);
  }
}

TEST(PruneLayerTest, ScheduleUsesDepthAndOverride) {
  const WorkloadProfile p = profile_from_curves(std::vector<std::size_t>{2, 3},
                                                std::vector<double>{1, 2},
                                                std::vector<double>{0.5, 0.6}, 3, 1, 40);
  EXPECT_EQ(select_schedule(p).prune_layer, 10u);
  EXPECT_EQ(select_schedule(p, 0.5, 12, 1).prune_layer, 3u);
  EXPECT_EQ(select_schedule(p, 0.5, 12, 1, 7).prune_layer, 7u);
  EXPECT_THROW(select_schedule(p, 0.5, 12, 1, 12), ValidationError);
}

TEST(ScheduleJsonTest, RoundTripAndValidation) {
  const WorkloadProfile p = curves({2, 50, 197}, {10, 40, 90}, {0.2, 0.7, 0.8}, 197);
  const PruningSchedule s = select_schedule(p, 0.5);
  test::TempDir dir;
  write_json(dir / "s.json", s.to_json());
  const PruningSchedule back = load_schedule(dir / "s.json");
  EXPECT_EQ(back.to_json(), s.to_json());

  nlohmann::json bad = s.to_json();
  bad["R"] = 5;
  EXPECT_THROW(PruningSchedule::from_json(bad, "s.json"), ValidationError);
  bad = s.to_json();
  bad.erase("n_keep");
  EXPECT_THROW(PruningSchedule::from_json(bad, "s.json"), ValidationError);
  bad = s.to_json();
  bad["schema_version"] = 2;
  EXPECT_THROW(PruningSchedule::from_json(bad, "s.json"), ValidationError);
}

TEST(ScheduleReportTest, CsvMarksOptimumAndCarriesUtility) {
  const WorkloadProfile p = curves({64, 128, 256}, {25, 50, 100}, {0.6, 0.9, 1.0}, 256);
  const PruningSchedule s = select_schedule(p, 0.5);
  const ScheduleReport r = schedule_report(s, p);
  std::istringstream in(r.csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,latency_us,accuracy,u_a,u_l,u,optimum");
  int optima = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u);
    const double ua = std::stod(cells[3]), ul = std::stod(cells[4]), u = std::stod(cells[5]);
    EXPECT_NEAR(u, 0.5 * ua + 0.5 * ul, 1e-9);
    if (cells[6] == "1") {
      ++optima;
      EXPECT_EQ(cells[0], "128");
    }
  }
  EXPECT_EQ(optima, 1);
  EXPECT_EQ(r.document["R"], 128);
}

}  // namespace
}  // namespace tokprune
