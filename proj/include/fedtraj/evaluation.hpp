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

#ifndef FEDTRAJ_EVALUATION_HPP_
#define FEDTRAJ_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedtraj/core.hpp"

namespace fedtraj {

// Root-mean-square distance of the trajectory's cell centers from their
// centroid, in meters.
inline double radius_of_gyration(const Trajectory& trajectory,
                                 const LocationGrid& grid) {
  if (trajectory.empty())
    throw std::invalid_argument("radius_of_gyration: empty trajectory");
  double cx = 0, cy = 0;
  for (const auto& p : trajectory.points()) {
    cx += grid.col(p.loc);
    cy += grid.row(p.loc);
  }
  const double n = static_cast<double>(trajectory.size());
  cx /= n;
  cy /= n;
  double ms = 0;
  for (const auto& p : trajectory.points()) {
    const double dx = grid.col(p.loc) - cx;
    const double dy = grid.row(p.loc) - cy;
    ms += dx * dx + dy * dy;
  }
  return grid.cell_size * std::sqrt(ms / n);
}

// Distinct locations per calendar day (slot / slots_per_day); days without
// points are omitted.
inline std::vector<int> daily_locations(const Trajectory& trajectory,
                                        int slots_per_day) {
  if (trajectory.empty())
    throw std::invalid_argument("daily_locations: empty trajectory");
  std::map<SlotIndex, std::set<LocationId>> days;
  for (const auto& p : trajectory.points())
    days[p.slot / slots_per_day].insert(p.loc);
  std::vector<int> out;
  out.reserve(days.size());
  for (const auto& [day, locs] : days) out.push_back(static_cast<int>(locs.size()));
  return out;
}

// Distances between consecutive records; empty for single-point trajectories.
inline std::vector<double> jump_distances(const Trajectory& trajectory,
                                          const LocationGrid& grid) {
  std::vector<double> out;
  const auto& pts = trajectory.points();
  if (pts.size() < 2) return out;
  out.reserve(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    out.push_back(grid_distance(pts[i].loc, pts[i + 1].loc, grid));
  return out;
}

namespace detail {

// Visit counts sorted by (count desc, id asc), truncated/zero-padded to
// top_k and normalized by the retained sum.
inline std::vector<double> rank_vector(const VisitHistogram& counts,
                                       int top_k) {
  std::vector<std::pair<std::int64_t, LocationId>> items;
  items.reserve(counts.size());
  for (const auto& [loc, c] : counts) items.emplace_back(-c, loc);
  std::sort(items.begin(), items.end());
  std::vector<double> out(static_cast<std::size_t>(top_k), 0.0);
  double total = 0;
  for (int i = 0; i < top_k && i < static_cast<int>(items.size()); ++i) {
    out[i] = static_cast<double>(-items[i].first);
    total += out[i];
  }
  if (total <= 0) throw std::invalid_argument("rank_vector: no visits");
  for (double& x : out) x /= total;
  return out;
}

}  // namespace detail

// Pooled visit frequency of all users over the top_k most visited
// locations, normalized.
inline std::vector<double> g_rank(const std::vector<Trajectory>& trajectories,
                                  int top_k) {
  if (trajectories.empty()) throw std::invalid_argument("g_rank: empty set");
  if (top_k < 1) throw std::invalid_argument("g_rank: top_k >= 1");
  VisitHistogram counts;
  for (const auto& t : trajectories)
    for (const auto& p : t.points()) ++counts[p.loc];
  return detail::rank_vector(counts, top_k);
}

// Per-user top_k visit-frequency vectors averaged across users, then
// renormalized.
inline std::vector<double> i_rank(const std::vector<Trajectory>& trajectories,
                                  int top_k) {
  if (trajectories.empty()) throw std::invalid_argument("i_rank: empty set");
  if (top_k < 1) throw std::invalid_argument("i_rank: top_k >= 1");
  std::map<UserId, VisitHistogram> per_user;
  for (const auto& t : trajectories)
    for (const auto& p : t.points()) ++per_user[t.user()][p.loc];
  std::vector<double> avg(static_cast<std::size_t>(top_k), 0.0);
  for (const auto& [user, counts] : per_user) {
    std::vector<double> v = detail::rank_vector(counts, top_k);
    for (int i = 0; i < top_k; ++i) avg[i] += v[i];
  }
  double total = 0;
  for (double& x : avg) {
    x /= static_cast<double>(per_user.size());
    total += x;
  }
  for (double& x : avg) x /= total;
  return avg;
}

// Jensen-Shannon divergence in nats: JSD(p,q) = KL(p||m)/2 + KL(q||m)/2
// with m = (p+q)/2 and 0*log(0/x) taken as 0. Bounded by ln 2.
inline double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("jsd: support length mismatch");
  if (p.empty()) throw std::invalid_argument("jsd: empty distributions");
  double sp = 0, sq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0 || q[i] < 0)
      throw std::invalid_argument("jsd: negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
    throw std::invalid_argument("jsd: inputs must sum to 1");
  double kp = 0, kq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) kp += p[i] * std::log(p[i] / m);
    if (q[i] > 0) kq += q[i] * std::log(q[i] / m);
  }
  return 0.5 * kp + 0.5 * kq;
}

// Histogram over named bins; `mass` sums to 1.
struct MetricDistribution {
  std::string name;
  std::vector<std::string> bin_labels;
  std::vector<double> mass;
};

struct MetricResult {
  std::string name;
  MetricDistribution real;
  MetricDistribution synthetic;
  double jsd_value = 0;
};

struct MetricReport {
  std::vector<MetricResult> metrics;  // radius, dailyloc, distance, grank, irank

  const MetricResult& metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m;
    throw std::invalid_argument("MetricReport: unknown metric " + name);
  }
};

struct EvalConfig {
  LocationGrid grid;
  int slots_per_day = kDefaultSlotsPerDay;
  int log_bins = 30;   // radius/distance bins over [cell_size/2, diagonal]
  int daily_max = 30;  // dailyloc integer bins 1..daily_max plus overflow
  int top_k = 100;     // rank vector length cap
};

namespace detail {

// Zero bin below `lo`, then log-spaced bins over [lo, hi); values >= hi go
// to the last bin.
inline MetricDistribution log_histogram(const std::string& name,
                                        const std::vector<double>& values,
                                        double lo, double hi, int bins) {
  if (values.empty())
    throw std::invalid_argument("histogram: no samples for " + name);
  MetricDistribution d;
  d.name = name;
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  for (int i = 0; i <= bins; ++i)
    edges[i] = std::exp(log_lo + (log_hi - log_lo) * i / bins);
  d.bin_labels.push_back("0");
  char buf[64];
  for (int i = 0; i < bins; ++i) {
    std::snprintf(buf, sizeof(buf), "%.6g", std::sqrt(edges[i] * edges[i + 1]));
    d.bin_labels.emplace_back(buf);
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(bins) + 1, 0);
  for (double v : values) {
    std::size_t bin = 0;
    if (v >= lo) {
      const auto it = std::upper_bound(edges.begin(), edges.end(), v);
      bin = std::min<std::size_t>(bins, it - edges.begin());  // 1-based bins
    }
    ++counts[bin];
  }
  d.mass.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    d.mass[i] = static_cast<double>(counts[i]) / values.size();
  return d;
}

inline MetricDistribution integer_histogram(const std::string& name,
                                            const std::vector<int>& values,
                                            int max_value) {
  if (values.empty())
    throw std::invalid_argument("histogram: no samples for " + name);
  MetricDistribution d;
  d.name = name;
  for (int i = 1; i <= max_value; ++i) d.bin_labels.push_back(std::to_string(i));
  d.bin_labels.push_back(std::to_string(max_value + 1) + "+");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_value) + 1, 0);
  for (int v : values) {
    int bin = std::clamp(v, 1, max_value + 1) - 1;
    ++counts[bin];
  }
  d.mass.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    d.mass[i] = static_cast<double>(counts[i]) / values.size();
  return d;
}

inline MetricDistribution categorical(const std::string& name,
                                      const std::vector<double>& mass) {
  MetricDistribution d;
  d.name = name;
  d.mass = mass;
  for (std::size_t i = 0; i < mass.size(); ++i)
    d.bin_labels.push_back(std::to_string(i + 1));
  return d;
}

}  // namespace detail

// Builds the five metric distributions for both sets over shared bins and
// computes the per-metric JSD. Bin boundaries come from the grid and the
// real set only.
inline MetricReport evaluate(const std::vector<Trajectory>& real,
                             const std::vector<Trajectory>& synthetic,
                             const EvalConfig& cfg) {
  if (real.empty() || synthetic.empty())
    throw std::invalid_argument("evaluate: both sets must be non-empty");
  const double lo = cfg.grid.cell_size / 2.0;
  const double hi = cfg.grid.diagonal();

  auto radius_values = [&](const std::vector<Trajectory>& set) {
    std::vector<double> v;
    v.reserve(set.size());
    for (const auto& t : set) v.push_back(radius_of_gyration(t, cfg.grid));
    return v;
  };
  auto distance_values = [&](const std::vector<Trajectory>& set) {
    std::vector<double> v;
    for (const auto& t : set) {
      auto jumps = jump_distances(t, cfg.grid);
      v.insert(v.end(), jumps.begin(), jumps.end());
    }
    return v;
  };
  auto daily_values = [&](const std::vector<Trajectory>& set) {
    std::vector<int> v;
    for (const auto& t : set) {
      auto days = daily_locations(t, cfg.slots_per_day);
      v.insert(v.end(), days.begin(), days.end());
    }
    return v;
  };

  std::set<LocationId> real_locations;
  for (const auto& t : real)
    for (const auto& p : t.points()) real_locations.insert(p.loc);
  const int top_k =
      std::min<int>(cfg.top_k, static_cast<int>(real_locations.size()));

  MetricReport report;
  auto add = [&report](const std::string& name, MetricDistribution r,
                       MetricDistribution s) {
    MetricResult m;
    m.name = name;
    m.jsd_value = jsd(r.mass, s.mass);
    m.real = std::move(r);
    m.synthetic = std::move(s);
    report.metrics.push_back(std::move(m));
  };

  add("radius",
      detail::log_histogram("radius", radius_values(real), lo, hi, cfg.log_bins),
      detail::log_histogram("radius", radius_values(synthetic), lo, hi,
                            cfg.log_bins));
  add("dailyloc",
      detail::integer_histogram("dailyloc", daily_values(real), cfg.daily_max),
      detail::integer_histogram("dailyloc", daily_values(synthetic),
                                cfg.daily_max));
  add("distance",
      detail::log_histogram("distance", distance_values(real), lo, hi,
                            cfg.log_bins),
      detail::log_histogram("distance", distance_values(synthetic), lo, hi,
                            cfg.log_bins));
  add("grank", detail::categorical("grank", g_rank(real, top_k)),
      detail::categorical("grank", g_rank(synthetic, top_k)));
  add("irank", detail::categorical("irank", i_rank(real, top_k)),
      detail::categorical("irank", i_rank(synthetic, top_k)));
  return report;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_EVALUATION_HPP_
