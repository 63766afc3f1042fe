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

#ifndef FEDTRAJ_CORE_HPP_
#define FEDTRAJ_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedtraj {

using LocationId = std::int32_t;
using UserId = std::int64_t;
using SlotIndex = std::int64_t;

constexpr int kDefaultSlotsPerDay = 48;  // 30-minute slots

// Flat Euclidean grid of uniform square cells. Location ids are row-major:
// id = row * width + col. Real lat/lon is mapped by a local equirectangular
// projection at `origin`; internally everything is in meters.
struct LocationGrid {
  int width = 1;
  int height = 1;
  double cell_size = 500.0;  // meters per cell edge
  double origin_lat = 0.0;
  double origin_lon = 0.0;

  int num_cells() const { return width * height; }
  bool valid(LocationId id) const { return id >= 0 && id < num_cells(); }
  int col(LocationId id) const { return static_cast<int>(id) % width; }
  int row(LocationId id) const { return static_cast<int>(id) / width; }
  LocationId id_at(int c, int r) const {
    return static_cast<LocationId>(r * width + c);
  }
  double diagonal() const {
    return cell_size * std::hypot(static_cast<double>(width),
                                  static_cast<double>(height));
  }

  void validate() const {
    if (width < 1 || height < 1)
      throw std::invalid_argument("LocationGrid: width and height must be >= 1");
    if (!(cell_size > 0))
      throw std::invalid_argument("LocationGrid: cell_size must be > 0");
  }
};

// Euclidean distance between cell centers, in meters.
inline double grid_distance(LocationId a, LocationId b, const LocationGrid& g) {
  if (!g.valid(a) || !g.valid(b))
    throw std::invalid_argument("grid_distance: invalid location id");
  double dx = static_cast<double>(g.col(a) - g.col(b));
  double dy = static_cast<double>(g.row(a) - g.row(b));
  return g.cell_size * std::hypot(dx, dy);
}

struct SpatioTemporalPoint {
  SlotIndex slot = 0;
  LocationId loc = 0;

  friend bool operator==(const SpatioTemporalPoint&,
                         const SpatioTemporalPoint&) = default;
};

// Ordered visit sequence of one user. Slots strictly increase; enforced at
// construction and by append, never re-checked downstream.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(UserId user, std::vector<SpatioTemporalPoint> points)
      : user_(user), points_(std::move(points)) {
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (points_[i].slot <= points_[i - 1].slot)
        throw std::invalid_argument("Trajectory: slots must strictly increase");
    }
  }

  UserId user() const { return user_; }
  const std::vector<SpatioTemporalPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  void append(SpatioTemporalPoint p) {
    if (!points_.empty() && p.slot <= points_.back().slot)
      throw std::invalid_argument("Trajectory: slots must strictly increase");
    points_.push_back(p);
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  UserId user_ = 0;
  std::vector<SpatioTemporalPoint> points_;
};

enum class Action : int {
  kStay = 0,
  kHomeReturn = 1,
  kPreferentialReturn = 2,
  kExplore = 3,
};

constexpr int kNumActions = 4;

inline Action action_from_index(int i) {
  if (i < 0 || i >= kNumActions)
    throw std::invalid_argument("action_from_index: out of range");
  return static_cast<Action>(i);
}

inline int action_index(Action a) { return static_cast<int>(a); }

inline std::string action_name(Action a) {
  switch (a) {
    case Action::kStay: return "stay";
    case Action::kHomeReturn: return "home_return";
    case Action::kPreferentialReturn: return "preferential_return";
    case Action::kExplore: return "explore";
  }
  return "?";
}

using VisitHistogram = std::map<LocationId, int>;

inline VisitHistogram visit_histogram(
    std::span<const SpatioTemporalPoint> history) {
  VisitHistogram h;
  for (const auto& p : history) ++h[p.loc];
  return h;
}

// Everything the policy may condition on: the visit history so far, the
// user's home, and the derived visit counts. Immutable after construction;
// advancing returns a new value.
class State {
 public:
  static State initial(SpatioTemporalPoint start, LocationId home) {
    State s;
    s.history_.push_back(start);
    s.home_ = home;
    s.counts_[start.loc] = 1;
    return s;
  }

  static State from_history(std::vector<SpatioTemporalPoint> history,
                            LocationId home) {
    if (history.empty())
      throw std::invalid_argument("State: history must be non-empty");
    for (std::size_t i = 1; i < history.size(); ++i) {
      if (history[i].slot <= history[i - 1].slot)
        throw std::invalid_argument("State: slots must strictly increase");
    }
    State s;
    s.history_ = std::move(history);
    s.home_ = home;
    s.counts_ = visit_histogram(s.history_);
    return s;
  }

  State advanced(SpatioTemporalPoint next) const {
    if (next.slot <= current().slot)
      throw std::invalid_argument("State: slots must strictly increase");
    State s(*this);
    s.history_.push_back(next);
    ++s.counts_[next.loc];
    return s;
  }

  const std::vector<SpatioTemporalPoint>& history() const { return history_; }
  LocationId home() const { return home_; }
  const VisitHistogram& visit_counts() const { return counts_; }
  SpatioTemporalPoint current() const { return history_.back(); }
  bool visited(LocationId loc) const { return counts_.count(loc) > 0; }

 private:
  State() = default;
  std::vector<SpatioTemporalPoint> history_;
  LocationId home_ = 0;
  VisitHistogram counts_;
};

// Most frequently visited location during the night window (22:00-06:00);
// falls back to the overall most frequent location when the user has no
// night points. Ties break toward the smallest id.
inline LocationId infer_home(const std::vector<Trajectory>& trajectories,
                             int slots_per_day) {
  if (slots_per_day < 1)
    throw std::invalid_argument("infer_home: slots_per_day must be >= 1");
  VisitHistogram night, all;
  bool any = false;
  for (const auto& t : trajectories) {
    for (const auto& p : t.points()) {
      any = true;
      ++all[p.loc];
      SlotIndex tod = p.slot % slots_per_day;
      double hour = static_cast<double>(tod) * 24.0 / slots_per_day;
      if (hour >= 22.0 || hour < 6.0) ++night[p.loc];
    }
  }
  if (!any) throw std::invalid_argument("infer_home: no points");
  const VisitHistogram& src = night.empty() ? all : night;
  LocationId best = src.begin()->first;
  int best_count = src.begin()->second;
  for (const auto& [loc, count] : src) {
    if (count > best_count) {  // map order makes the smallest id win ties
      best = loc;
      best_count = count;
    }
  }
  return best;
}

// One client's private store: its trajectories plus the derived home.
struct ClientDataset {
  UserId user = 0;
  std::vector<Trajectory> trajectories;
  LocationId home = 0;
};

inline ClientDataset make_client_dataset(UserId user,
                                         std::vector<Trajectory> trajectories,
                                         int slots_per_day) {
  for (const auto& t : trajectories) {
    if (t.user() != user)
      throw std::invalid_argument("ClientDataset: mixed user ids");
    if (t.empty())
      throw std::invalid_argument("ClientDataset: empty trajectory");
  }
  ClientDataset d;
  d.user = user;
  d.home = infer_home(trajectories, slots_per_day);
  d.trajectories = std::move(trajectories);
  return d;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_CORE_HPP_
