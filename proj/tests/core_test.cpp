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

#include "fedtraj/core.hpp"

#include <gtest/gtest.h>

#include "fedtraj/random.hpp"

namespace fedtraj {
namespace {

LocationGrid ten_by_ten() {
  LocationGrid g;
  g.width = 10;
  g.height = 10;
  g.cell_size = 500.0;
  return g;
}

TEST(GridDistance, IdentityIsZero) {
  EXPECT_DOUBLE_EQ(grid_distance(7, 7, ten_by_ten()), 0.0);
}

TEST(GridDistance, ThreeFourFiveTriangle) {
  // (0,0) is id 0; (3,4) is id 43 on a 10-wide grid.
  LocationGrid g = ten_by_ten();
  EXPECT_EQ(g.id_at(3, 4), 43);
  EXPECT_DOUBLE_EQ(grid_distance(0, 43, g), 2500.0);
}

TEST(GridDistance, AdjacentCells) {
  LocationGrid g = ten_by_ten();
  EXPECT_DOUBLE_EQ(grid_distance(g.id_at(0, 0), g.id_at(0, 1), g), 500.0);
}

TEST(GridDistance, InvalidIdThrows) {
  EXPECT_THROW(grid_distance(-1, 0, ten_by_ten()), std::invalid_argument);
  EXPECT_THROW(grid_distance(0, 100, ten_by_ten()), std::invalid_argument);
}

TEST(GridDistance, IsAMetricOnRandomTriples) {
  LocationGrid g = ten_by_ten();
  RngStream rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    LocationId a = static_cast<LocationId>(rng.uniform_int(100));
    LocationId b = static_cast<LocationId>(rng.uniform_int(100));
    LocationId c = static_cast<LocationId>(rng.uniform_int(100));
    double ab = grid_distance(a, b, g);
    double ba = grid_distance(b, a, g);
    double ac = grid_distance(a, c, g);
    double cb = grid_distance(c, b, g);
    EXPECT_DOUBLE_EQ(ab, ba);
    EXPECT_EQ(ab == 0.0, a == b);
    EXPECT_LE(ab, ac + cb + 1e-9);
  }
}

TEST(VisitHistogram, Empty) {
  EXPECT_TRUE(visit_histogram({}).empty());
}

TEST(VisitHistogram, CountsByLocation) {
  std::vector<SpatioTemporalPoint> pts = {{0, 4}, {1, 4}, {2, 9}};
  VisitHistogram h = visit_histogram(pts);
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h[4], 2);
  EXPECT_EQ(h[9], 1);
}

TEST(VisitHistogram, SinglePoint) {
  std::vector<SpatioTemporalPoint> pts = {{0, 3}};
  VisitHistogram h = visit_histogram(pts);
  EXPECT_EQ(h.size(), 1u);
  EXPECT_EQ(h[3], 1);
}

TEST(InferHome, SinglePointIsOnlyCandidate) {
  Trajectory t(1, {{0, 5}});
  EXPECT_EQ(infer_home({t}, kDefaultSlotsPerDay), 5);
}

TEST(InferHome, MostFrequentNightLocation) {
  // Slot 45 is 22:30, slot 2 is 01:00 with 48 slots/day; slot 20 is 10:00.
  std::vector<SpatioTemporalPoint> pts;
  for (SlotIndex d = 0; d < 4; ++d) pts.push_back({d * 48 + 2, 3});
  for (SlotIndex d = 0; d < 2; ++d) pts.push_back({d * 48 + 45, 9});
  for (SlotIndex d = 0; d < 6; ++d) pts.push_back({d * 48 + 20, 7});
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.slot < b.slot; });
  Trajectory t(1, pts);
  EXPECT_EQ(infer_home({t}, 48), 3);
}

TEST(InferHome, TieBreaksBySmallestId) {
  std::vector<SpatioTemporalPoint> pts;
  for (SlotIndex d = 0; d < 3; ++d) pts.push_back({d * 48 + 1, 7});
  for (SlotIndex d = 0; d < 3; ++d) pts.push_back({d * 48 + 2, 2});
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.slot < b.slot; });
  Trajectory t(1, pts);
  EXPECT_EQ(infer_home({t}, 48), 2);
}

TEST(InferHome, FallsBackToGlobalMostFrequentWithoutNightPoints) {
  // All points at 10:00.
  Trajectory t(1, {{20, 6}, {68, 6}, {116, 1}});
  EXPECT_EQ(infer_home({t}, 48), 6);
}

TEST(InferHome, EmptyInputThrows) {
  EXPECT_THROW(infer_home({}, 48), std::invalid_argument);
  Trajectory empty;
  EXPECT_THROW(infer_home({empty}, 48), std::invalid_argument);
}

TEST(Trajectory, RejectsNonIncreasingSlots) {
  EXPECT_THROW(Trajectory(1, {{3, 0}, {3, 1}}), std::invalid_argument);
  EXPECT_THROW(Trajectory(1, {{3, 0}, {2, 1}}), std::invalid_argument);
  Trajectory ok(1, {{0, 0}, {5, 1}});
  EXPECT_THROW(ok.append({5, 2}), std::invalid_argument);
  ok.append({6, 2});
  EXPECT_EQ(ok.size(), 3u);
}

TEST(State, CurrentEqualsLastOfHistory) {
  State s = State::initial({0, 4}, 4);
  EXPECT_EQ(s.current(), (SpatioTemporalPoint{0, 4}));
  State s2 = s.advanced({1, 9});
  EXPECT_EQ(s2.current(), (SpatioTemporalPoint{1, 9}));
  EXPECT_EQ(s.history().size(), 1u);  // original untouched
}

TEST(State, VisitCountsMatchHistogramUnderRandomAppends) {
  RngStream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    State s = State::initial({0, static_cast<LocationId>(rng.uniform_int(20))},
                             0);
    for (int i = 1; i <= 30; ++i)
      s = s.advanced({i, static_cast<LocationId>(rng.uniform_int(20))});
    EXPECT_EQ(s.visit_counts(), visit_histogram(s.history()));
  }
}

TEST(State, FromHistoryValidates) {
  EXPECT_THROW(State::from_history({}, 0), std::invalid_argument);
  EXPECT_THROW(State::from_history({{1, 0}, {1, 1}}, 0), std::invalid_argument);
  State s = State::from_history({{0, 2}, {4, 3}}, 2);
  EXPECT_EQ(s.visit_counts().at(2), 1);
  EXPECT_EQ(s.visit_counts().at(3), 1);
}

TEST(ClientDataset, RejectsMixedUsers) {
  Trajectory a(1, {{0, 0}});
  Trajectory b(2, {{0, 1}});
  EXPECT_THROW(make_client_dataset(1, {a, b}, 48), std::invalid_argument);
}

TEST(ClientDataset, DerivesHomeDeterministically) {
  Trajectory a(1, {{0, 7}, {1, 7}, {20, 3}});
  ClientDataset d = make_client_dataset(1, {a}, 48);
  EXPECT_EQ(d.home, 7);  // slots 0 and 1 are night slots
}

}  // namespace
}  // namespace fedtraj
