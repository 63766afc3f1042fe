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

#ifndef FEDTRAJ_MOBILITY_ENV_HPP_
#define FEDTRAJ_MOBILITY_ENV_HPP_

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

struct TransitionConfig {
  double alpha = 0.55;  // exploration rank exponent, > 0
  LocationGrid grid;

  void validate() const {
    if (!(alpha > 0))
      throw std::invalid_argument("TransitionConfig: alpha must be > 0");
    grid.validate();
  }
};

// Distribution over the next location. Probabilities are non-negative and
// sum to 1; `fell_back_to_stay` marks the degenerate cases where the
// requested action had an empty eligible set.
struct NextLocationDistribution {
  std::vector<std::pair<LocationId, double>> support;
  bool fell_back_to_stay = false;
};

// P(next location | state, action) under the EPR kernel:
//   stay                -> point mass on the current location
//   home return         -> point mass on home
//   preferential return -> previously visited locations except home and the
//                          current one, proportional to visit count
//   explore             -> never-visited locations, proportional to
//                          rank^-alpha where rank is the 1-based rank by
//                          distance from the current location (ties by id)
// Empty eligible sets fall back to the stay distribution, flagged.
inline NextLocationDistribution transition_distribution(
    const State& state, Action action, const TransitionConfig& cfg) {
  cfg.validate();
  const LocationId current = state.current().loc;

  NextLocationDistribution out;
  auto stay_fallback = [&]() {
    out.support = {{current, 1.0}};
    out.fell_back_to_stay = true;
    return out;
  };

  switch (action) {
    case Action::kStay:
      out.support = {{current, 1.0}};
      return out;
    case Action::kHomeReturn:
      out.support = {{state.home(), 1.0}};
      return out;
    case Action::kPreferentialReturn: {
      double total = 0;
      for (const auto& [loc, count] : state.visit_counts()) {
        if (loc == state.home() || loc == current) continue;
        out.support.emplace_back(loc, static_cast<double>(count));
        total += count;
      }
      if (out.support.empty()) return stay_fallback();
      for (auto& [loc, w] : out.support) w /= total;
      return out;
    }
    case Action::kExplore: {
      std::vector<std::pair<double, LocationId>> unvisited;  // (distance, id)
      for (LocationId l = 0; l < cfg.grid.num_cells(); ++l) {
        if (!state.visited(l))
          unvisited.emplace_back(grid_distance(current, l, cfg.grid), l);
      }
      if (unvisited.empty()) return stay_fallback();
      std::sort(unvisited.begin(), unvisited.end());
      double total = 0;
      out.support.reserve(unvisited.size());
      for (std::size_t r = 0; r < unvisited.size(); ++r) {
        double w = std::pow(static_cast<double>(r + 1), -cfg.alpha);
        out.support.emplace_back(unvisited[r].second, w);
        total += w;
      }
      for (auto& [loc, w] : out.support) w /= total;
      return out;
    }
  }
  throw std::invalid_argument("transition_distribution: unknown action");
}

inline LocationId sample_location(const NextLocationDistribution& dist,
                                  RngStream& rng) {
  double u = rng.uniform();
  double cum = 0;
  for (const auto& [loc, p] : dist.support) {
    cum += p;
    if (u < cum) return loc;
  }
  return dist.support.back().first;
}

// Draws the next location and advances the slot by one.
inline State sample_next(const State& state, Action action,
                         const TransitionConfig& cfg, RngStream& rng) {
  NextLocationDistribution dist = transition_distribution(state, action, cfg);
  LocationId next = sample_location(dist, rng);
  return state.advanced({state.current().slot + 1, next});
}

}  // namespace fedtraj

#endif  // FEDTRAJ_MOBILITY_ENV_HPP_
