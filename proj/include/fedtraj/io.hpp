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

#ifndef FEDTRAJ_IO_HPP_
#define FEDTRAJ_IO_HPP_

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/mobility_env.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

inline constexpr const char* kTrajFormatHeader = "fedtraj.traj.v1";

// One visit per line: "user slot loc", canonically ordered by (user, slot).
// A user's trajectories are stored on one continuous slot timeline; loading
// with split_days > 0 cuts the timeline into trajectories of
// split_days * slots_per_day slots each, and with split_days == 0 each user
// becomes a single trajectory.
inline void save_trajectories(const std::vector<ClientDataset>& datasets,
                              std::ostream& os) {
  std::map<UserId, std::map<SlotIndex, LocationId>> rows;
  for (const auto& d : datasets)
    for (const auto& t : d.trajectories)
      for (const auto& p : t.points()) {
        auto [it, inserted] = rows[d.user].emplace(p.slot, p.loc);
        if (!inserted)
          throw std::invalid_argument(
              "save_trajectories: duplicate (user, slot) visit");
      }
  os << kTrajFormatHeader << "\n";
  for (const auto& [user, visits] : rows)
    for (const auto& [slot, loc] : visits)
      os << user << " " << slot << " " << loc << "\n";
}

inline void save_trajectories(const std::vector<ClientDataset>& datasets,
                              const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  save_trajectories(datasets, f);
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<ClientDataset> load_trajectories(std::istream& is,
                                                    const LocationGrid& grid,
                                                    int slots_per_day,
                                                    int split_days = 0) {
  std::string line;
  if (!std::getline(is, line) || line != kTrajFormatHeader)
    throw std::runtime_error("trajectory file: bad or missing format header");

  std::map<UserId, std::map<SlotIndex, LocationId>> rows;
  std::vector<std::string> errors;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      errors.push_back("line " + std::to_string(line_no) + ": empty line");
      continue;
    }
    std::istringstream ls(line);
    UserId user;
    SlotIndex slot;
    LocationId loc;
    std::string extra;
    if (!(ls >> user >> slot >> loc) || (ls >> extra)) {
      errors.push_back("line " + std::to_string(line_no) +
                       ": expected 'user slot loc'");
      continue;
    }
    if (slot < 0) {
      errors.push_back("line " + std::to_string(line_no) + ": negative slot");
      continue;
    }
    if (!grid.valid(loc)) {
      errors.push_back("line " + std::to_string(line_no) +
                       ": unknown location id " + std::to_string(loc));
      continue;
    }
    auto [it, inserted] = rows[user].emplace(slot, loc);
    if (!inserted)
      errors.push_back("line " + std::to_string(line_no) +
                       ": duplicate (user, slot)");
    if (errors.size() >= 10) break;
  }
  if (!errors.empty()) {
    std::string msg = "trajectory file rejected:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }

  std::vector<ClientDataset> out;
  for (const auto& [user, visits] : rows) {
    std::map<int, std::vector<SpatioTemporalPoint>> pieces;
    const SlotIndex span =
        split_days > 0 ? static_cast<SlotIndex>(split_days) * slots_per_day : 0;
    for (const auto& [slot, loc] : visits) {
      const int piece = span > 0 ? static_cast<int>(slot / span) : 0;
      pieces[piece].push_back({slot, loc});
    }
    std::vector<Trajectory> trajectories;
    trajectories.reserve(pieces.size());
    for (auto& [piece, points] : pieces)
      trajectories.emplace_back(user, std::move(points));
    out.push_back(make_client_dataset(user, std::move(trajectories),
                                      slots_per_day));
  }
  return out;
}

inline std::vector<ClientDataset> load_trajectories(const std::string& path,
                                                    const LocationGrid& grid,
                                                    int slots_per_day,
                                                    int split_days = 0) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return load_trajectories(f, grid, slots_per_day, split_days);
}

// Fixed action mix of the hand-specified ground-truth behavior policy.
struct EprBehavior {
  double stay = 0.6;
  double home_return = 0.1;
  double preferential = 0.2;
  double explore = 0.1;

  void validate() const {
    const double total = stay + home_return + preferential + explore;
    if (stay < 0 || home_return < 0 || preferential < 0 || explore < 0 ||
        std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument(
          "EprBehavior: probabilities must be >= 0 and sum to 1");
  }

  Action sample(RngStream& rng) const {
    const double u = rng.uniform();
    if (u < stay) return Action::kStay;
    if (u < stay + home_return) return Action::kHomeReturn;
    if (u < stay + home_return + preferential)
      return Action::kPreferentialReturn;
    return Action::kExplore;
  }
};

// Seeded ground truth: each user gets a uniform random home and
// `trajectories_per_user` trajectories of `days` days driven by the fixed
// EPR behavior through the transition kernel. Trajectory k of a user lives
// on slots [k*days*slots_per_day, (k+1)*days*slots_per_day).
inline std::vector<ClientDataset> synth_ground_truth(
    int num_users, int trajectories_per_user, int days,
    const TransitionConfig& env, const EprBehavior& behavior,
    int slots_per_day, const RngStream& rng, UserId first_user = 0) {
  if (num_users < 1 || trajectories_per_user < 1 || days < 1)
    throw std::invalid_argument("synth_ground_truth: counts must be >= 1");
  behavior.validate();
  env.validate();
  const SlotIndex span = static_cast<SlotIndex>(days) * slots_per_day;

  std::vector<ClientDataset> out;
  out.reserve(num_users);
  for (int u = 0; u < num_users; ++u) {
    RngStream user_rng = rng.split(StreamPurpose::kData, u);
    const LocationId home =
        static_cast<LocationId>(user_rng.uniform_int(env.grid.num_cells()));
    std::vector<Trajectory> trajectories;
    trajectories.reserve(trajectories_per_user);
    for (int k = 0; k < trajectories_per_user; ++k) {
      State state = State::initial({span * k, home}, home);
      for (SlotIndex t = 1; t < span; ++t)
        state = sample_next(state, behavior.sample(user_rng), env, user_rng);
      trajectories.emplace_back(first_user + u, state.history());
    }
    out.push_back(make_client_dataset(first_user + u, std::move(trajectories),
                                      slots_per_day));
  }
  return out;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_IO_HPP_
