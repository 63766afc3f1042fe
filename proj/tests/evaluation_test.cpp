// Copyright 2026 The fedtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedtraj/evaluation.hpp"

#include <gtest/gtest.h>

#include "fedtraj/io.hpp"

namespace fedtraj {
namespace {

LocationGrid grid10() {
  LocationGrid g;
  g.width = 10;
  g.height = 10;
  g.cell_size = 500.0;
  return g;
}

TEST(RadiusOfGyration, SinglePointIsZero) {
  EXPECT_DOUBLE_EQ(radius_of_gyration(Trajectory(1, {{0, 7}}), grid10()), 0.0);
}

TEST(RadiusOfGyration, TwoPointsGiveHalfTheirDistance) {
  LocationGrid g = grid10();
  Trajectory t(1, {{0, g.id_at(0, 0)}, {1, g.id_at(3, 4)}});
  EXPECT_NEAR(radius_of_gyration(t, g), 2500.0 / 2, 1e-9);
}

TEST(RadiusOfGyration, AllPointsInOneCellGiveZero) {
  Trajectory t(1, {{0, 5}, {1, 5}, {2, 5}, {3, 5}});
  EXPECT_DOUBLE_EQ(radius_of_gyration(t, grid10()), 0.0);
}

TEST(RadiusOfGyration, InvariantToSlotRelabeling) {
  LocationGrid g = grid10();
  Trajectory a(1, {{0, 3}, {1, 17}, {2, 42}, {3, 3}});
  Trajectory b(1, {{5, 3}, {90, 17}, {91, 42}, {200, 3}});
  EXPECT_DOUBLE_EQ(radius_of_gyration(a, g), radius_of_gyration(b, g));
}

TEST(RadiusOfGyration, EmptyThrows) {
  EXPECT_THROW(radius_of_gyration(Trajectory(), grid10()),
               std::invalid_argument);
}

TEST(DailyLocations, DistinctCountWithinOneDay) {
  Trajectory t(1, {{0, 4}, {1, 4}, {2, 9}});
  EXPECT_EQ(daily_locations(t, 48), (std::vector<int>{2}));
}

TEST(DailyLocations, ConstantLocationGivesOnesPerDay) {
  std::vector<SpatioTemporalPoint> pts;
  for (int d = 0; d < 3; ++d)
    for (int s = 0; s < 4; ++s) pts.push_back({d * 48 + s, 6});
  EXPECT_EQ(daily_locations(Trajectory(1, pts), 48),
            (std::vector<int>{1, 1, 1}));
}

TEST(DailyLocations, EmptyDaysAreOmitted) {
  // Points on day 0 and day 2 only.
  Trajectory t(1, {{0, 4}, {1, 5}, {100, 6}});
  EXPECT_EQ(daily_locations(t, 48), (std::vector<int>{2, 1}));
}

TEST(JumpDistances, StayGivesZeroDistance) {
  EXPECT_EQ(jump_distances(Trajectory(1, {{0, 4}, {1, 4}}), grid10()),
            (std::vector<double>{0.0}));
}

TEST(JumpDistances, ReusesGridGeometry) {
  LocationGrid g = grid10();
  Trajectory t(1, {{0, g.id_at(0, 0)}, {1, g.id_at(3, 4)}});
  EXPECT_EQ(jump_distances(t, g), (std::vector<double>{2500.0}));
}

TEST(JumpDistances, LengthIsPointsMinusOne) {
  Trajectory t(1, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
  EXPECT_EQ(jump_distances(t, grid10()).size(), 4u);
  EXPECT_TRUE(jump_distances(Trajectory(1, {{0, 1}}), grid10()).empty());
}

TEST(GRank, AllVisitsToOneLocation) {
  std::vector<Trajectory> set = {Trajectory(1, {{0, 7}, {1, 7}, {2, 7}})};
  EXPECT_EQ(g_rank(set, 3), (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(GRank, HandNormalizedCounts) {
  // Counts A=2, B=1, C=1; top 2 keeps A and the smaller id of the tie.
  std::vector<Trajectory> set = {Trajectory(1, {{0, 4}, {1, 4}, {2, 2}}),
                                 Trajectory(2, {{0, 8}})};
  auto v = g_rank(set, 2);
  EXPECT_NEAR(v[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(v[1], 1.0 / 3.0, 1e-12);
}

TEST(GRank, UniformVisitsGiveUniformVector) {
  std::vector<Trajectory> set = {Trajectory(1, {{0, 1}, {1, 2}, {2, 3}})};
  auto v = g_rank(set, 3);
  for (double x : v) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(IRank, SingleUserMatchesOwnRankVector) {
  std::vector<Trajectory> set = {Trajectory(1, {{0, 4}, {1, 4}, {2, 2}})};
  EXPECT_EQ(i_rank(set, 2), g_rank(set, 2));
}

TEST(IRank, TwoSingleLocationUsers) {
  std::vector<Trajectory> set = {Trajectory(1, {{0, 3}, {1, 3}}),
                                 Trajectory(2, {{0, 9}})};
  auto v = i_rank(set, 2);
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], 0.0);
}

TEST(IRank, SumsToOne) {
  RngStream rng(5);
  std::vector<Trajectory> set;
  for (int u = 0; u < 6; ++u) {
    std::vector<SpatioTemporalPoint> pts;
    for (int i = 0; i < 12; ++i)
      pts.push_back({i, static_cast<LocationId>(rng.uniform_int(100))});
    set.emplace_back(u, pts);
  }
  auto v = i_rank(set, 10);
  double total = 0;
  for (double x : v) total += x;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Jsd, IdenticalDistributionsGiveZero) {
  std::vector<double> p = {0.2, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(jsd(p, p), 0.0);
}

TEST(Jsd, DisjointSupportsGiveLnTwo) {
  EXPECT_NEAR(jsd({1.0, 0.0}, {0.0, 1.0}), std::log(2.0), 1e-12);
}

TEST(Jsd, HandEvaluatedValue) {
  // KL(p||m)/2 + KL(q||m)/2 for p = [1/2, 1/2], q = [1, 0]:
  // 0.5*(0.5 ln(2/3) + 0.5 ln 2) + 0.5*ln(4/3) = 0.21576155433883565.
  EXPECT_NEAR(jsd({0.5, 0.5}, {1.0, 0.0}), 0.2157615543388, 1e-10);
}

TEST(Jsd, SymmetricAndBounded) {
  RngStream rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(6), q(6);
    double sp = 0, sq = 0;
    for (int i = 0; i < 6; ++i) {
      p[i] = rng.uniform(0, 1);
      q[i] = rng.uniform(0, 1);
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < 6; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    double a = jsd(p, q);
    EXPECT_EQ(a, jsd(q, p));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, std::log(2.0) + 1e-12);
  }
}

TEST(Jsd, ZeroOnlyForEqualInputs) {
  std::vector<double> p = {0.5, 0.5};
  std::vector<double> q = {0.5 + 1e-6, 0.5 - 1e-6};
  EXPECT_GT(jsd(p, q), 0.0);
}

TEST(Jsd, LengthMismatchThrows) {
  EXPECT_THROW(jsd({1.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(jsd({0.5, 0.6}, {0.5, 0.5}), std::invalid_argument);
}

std::vector<Trajectory> sample_set(int users, std::uint64_t seed) {
  LocationGrid g;
  g.width = 20;
  g.height = 20;
  TransitionConfig env;
  env.grid = g;
  auto data = synth_ground_truth(users, 1, 1, env, EprBehavior{}, 48,
                                 RngStream(seed));
  std::vector<Trajectory> out;
  for (auto& d : data) out.push_back(d.trajectories[0]);
  return out;
}

EvalConfig eval_cfg_20() {
  EvalConfig cfg;
  cfg.grid.width = 20;
  cfg.grid.height = 20;
  cfg.grid.cell_size = 500.0;
  return cfg;
}

TEST(Evaluate, SelfComparisonGivesAllZeroJsd) {
  auto set = sample_set(30, 7);
  MetricReport r = evaluate(set, set, eval_cfg_20());
  ASSERT_EQ(r.metrics.size(), 5u);
  for (const auto& m : r.metrics) EXPECT_DOUBLE_EQ(m.jsd_value, 0.0) << m.name;
}

TEST(Evaluate, JsdValuesWithinBounds) {
  auto a = sample_set(40, 8);
  auto b = sample_set(40, 9);
  MetricReport r = evaluate(a, b, eval_cfg_20());
  for (const auto& m : r.metrics) {
    EXPECT_GE(m.jsd_value, 0.0);
    EXPECT_LE(m.jsd_value, std::log(2.0) + 1e-12);
    double total = 0;
    for (double x : m.real.mass) total += x;
    EXPECT_NEAR(total, 1.0, 1e-9) << m.name;
  }
}

// Same-distribution null oracle: two independent draws from one seeded EPR
// process stay close on every metric.
TEST(Evaluate, SameProcessNullKeepsJsdSmall) {
  auto a = sample_set(500, 10);
  auto b = sample_set(500, 11);
  MetricReport r = evaluate(a, b, eval_cfg_20());
  for (const auto& m : r.metrics)
    EXPECT_LT(m.jsd_value, 0.05) << m.name << " " << m.jsd_value;
}

TEST(Evaluate, EmptySetsThrow) {
  auto set = sample_set(3, 12);
  EXPECT_THROW(evaluate({}, set, eval_cfg_20()), std::invalid_argument);
  EXPECT_THROW(evaluate(set, {}, eval_cfg_20()), std::invalid_argument);
}

}  // namespace
}  // namespace fedtraj
