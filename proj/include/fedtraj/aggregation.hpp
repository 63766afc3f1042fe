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

#ifndef FEDTRAJ_AGGREGATION_HPP_
#define FEDTRAJ_AGGREGATION_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/discriminator.hpp"
#include "fedtraj/policy.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

enum class DpMode { kNoiseFree, kMeanOnly, kCompensated };

inline const char* dp_mode_name(DpMode m) {
  switch (m) {
    case DpMode::kNoiseFree: return "none";
    case DpMode::kMeanOnly: return "mean";
    case DpMode::kCompensated: return "compensated";
  }
  return "?";
}

// Laplace scales for one reward query at privacy budget (epsilon, 0):
//   mean only:    lambda = 1/(eps*|U|)
//   compensated:  lambda = kappa/(eps*|U|), lambda_c = 3*kappa/(eps*(kappa-1)*|U|)
struct DPBudget {
  DpMode mode = DpMode::kNoiseFree;
  double epsilon = std::numeric_limits<double>::infinity();
  double kappa = 0;  // meaningful in compensated mode only
  int num_users = 2;
  double lambda_mean = 0;
  double lambda_var = 0;

  static DPBudget noise_free(int num_users) {
    check_users(num_users);
    DPBudget b;
    b.num_users = num_users;
    return b;
  }

  static DPBudget mean_only(double epsilon, int num_users) {
    check_eps_users(epsilon, num_users);
    DPBudget b;
    b.mode = DpMode::kMeanOnly;
    b.epsilon = epsilon;
    b.num_users = num_users;
    b.lambda_mean = 1.0 / (epsilon * num_users);
    return b;
  }

  static DPBudget compensated(double epsilon, int num_users, double kappa) {
    check_eps_users(epsilon, num_users);
    if (!(kappa > 1))
      throw std::invalid_argument("DPBudget: kappa must be > 1");
    DPBudget b;
    b.mode = DpMode::kCompensated;
    b.epsilon = epsilon;
    b.kappa = kappa;
    b.num_users = num_users;
    b.lambda_mean = kappa / (epsilon * num_users);
    b.lambda_var = 3.0 * kappa / (epsilon * (kappa - 1.0) * num_users);
    return b;
  }

  // Same mode and budget, recomputed for a different participant count
  // (client dropout within a round).
  DPBudget with_num_users(int n) const {
    switch (mode) {
      case DpMode::kNoiseFree: return noise_free(n);
      case DpMode::kMeanOnly: return mean_only(epsilon, n);
      case DpMode::kCompensated: return compensated(epsilon, n, kappa);
    }
    throw std::invalid_argument("DPBudget: bad mode");
  }

 private:
  static void check_users(int n) {
    if (n < 2) throw std::invalid_argument("DPBudget: num_users must be >= 2");
  }
  static void check_eps_users(double eps, int n) {
    check_users(n);
    if (!(eps > 0) || !std::isfinite(eps))
      throw std::invalid_argument("DPBudget: epsilon must be finite and > 0");
  }
};

inline DPBudget budget_for(double epsilon, int num_users,
                           std::optional<double> kappa = std::nullopt) {
  return kappa ? DPBudget::compensated(epsilon, num_users, *kappa)
               : DPBudget::mean_only(epsilon, num_users);
}

// Laplace(0, scale) via inverse CDF; scale 0 yields exactly 0.
inline double laplace_sample(double scale, RngStream& rng) {
  if (scale < 0) throw std::invalid_argument("laplace_sample: negative scale");
  if (scale == 0) return 0.0;
  double u = rng.uniform() - 0.5;
  double d = 1.0 - 2.0 * std::abs(u);
  if (d <= 0) d = std::numeric_limits<double>::min();  // u == 0 corner
  return (u < 0 ? scale : -scale) * std::log(d);
}

namespace detail {
inline void check_scores(std::span<const double> scores, const DPBudget& b) {
  if (static_cast<int>(scores.size()) != b.num_users)
    throw std::invalid_argument("score vector length != budget num_users");
  for (double s : scores)
    if (!(s > 0.0 && s < 1.0))
      throw std::invalid_argument("scores must lie in (0, 1)");
}
}  // namespace detail

// Mean of the client scores plus Laplace(0, lambda) perturbation. Summation
// runs left to right in ascending user order, so the noise-free value is bit
// reproducible.
inline double aggregate_mean(std::span<const double> scores,
                             const DPBudget& budget, RngStream& rng) {
  detail::check_scores(scores, budget);
  double sum = 0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size()) +
         laplace_sample(budget.lambda_mean, rng);
}

inline double population_variance(std::span<const double> scores) {
  bool all_equal = true;
  for (double s : scores) all_equal = all_equal && s == scores[0];
  if (all_equal) return 0.0;  // exact for the degenerate ensemble
  double mean = 0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  double var = 0;
  for (double s : scores) var += (s - mean) * (s - mean);
  return var / static_cast<double>(scores.size());
}

// Reward dynamics term: sqrt of the (noised) population variance of the
// client scores, clamped at zero before the square root.
inline double dynamics_term(std::span<const double> scores,
                            const DPBudget& budget, RngStream& rng) {
  detail::check_scores(scores, budget);
  double noised =
      population_variance(scores) + laplace_sample(budget.lambda_var, rng);
  return std::sqrt(std::max(0.0, noised));
}

// Compensated reward: aggregate mean minus beta times the dynamics term,
// each with its own independent noise draw (mean noise first).
inline double compensated_reward(std::span<const double> scores, double beta,
                                 const DPBudget& budget, RngStream& rng) {
  if (beta < 0) throw std::invalid_argument("compensated_reward: beta >= 0");
  double mean = aggregate_mean(scores, budget, rng);
  double xi = dynamics_term(scores, budget, rng);
  return mean - beta * xi;
}

// One reward query's full decomposition.
struct RewardEntry {
  std::vector<double> scores;  // per client, ascending user order
  double mean_reward = 0;      // Laplace-perturbed mean
  double xi = 0;               // dynamics term
  double compensated = 0;      // final reward fed to the policy update
};

using RewardBatch = std::vector<RewardEntry>;

// Aggregates a batch of score vectors with fresh per-query noise draws from
// substreams addressed by query index, so batch entries are independent of
// evaluation order.
inline RewardBatch aggregate_batch(std::vector<std::vector<double>> score_rows,
                                   double beta, const DPBudget& budget,
                                   const RngStream& noise_rng) {
  RewardBatch out(score_rows.size());
  for (std::size_t i = 0; i < score_rows.size(); ++i) {
    RngStream q = noise_rng.split(StreamPurpose::kNoise, i);
    RewardEntry& e = out[i];
    e.scores = std::move(score_rows[i]);
    e.mean_reward = aggregate_mean(e.scores, budget, q);
    e.xi = dynamics_term(e.scores, budget, q);
    e.compensated = e.mean_reward - beta * e.xi;
  }
  return out;
}

// --- empirical check of the lower-bound guarantee ---

struct Theorem1Result {
  double fraction = 0;  // empirical P(J(pi, R_u) >= J(pi, R_hat))
  double bound = 0;     // 1 - 1/beta^2
  double std_err = 0;
  int trials = 0;
  double beta = 0;
};

using EpisodeSampler =
    std::function<std::vector<std::pair<State, Action>>(RngStream&)>;
using PairScorer = std::function<double(const State&, Action)>;

// For `trials` episodes and uniformly random user choices, measures how
// often the random user's discounted total reward is at least the
// discounted total of the noise-free compensated reward.
inline Theorem1Result check_theorem1_bound(const EpisodeSampler& episodes,
                                           const std::vector<PairScorer>& scorers,
                                           double beta, double gamma,
                                           int trials, const RngStream& rng) {
  if (scorers.size() < 2)
    throw std::invalid_argument("check_theorem1_bound: >= 2 clients required");
  if (trials < 100)
    throw std::invalid_argument("check_theorem1_bound: trials >= 100");
  const std::size_t n_users = scorers.size();
  int successes = 0;
  std::vector<double> step_scores(n_users);
  for (int t = 0; t < trials; ++t) {
    RngStream trial_rng = rng.split(StreamPurpose::kRollout, t);
    auto episode = episodes(trial_rng);
    const std::size_t u = trial_rng.uniform_int(n_users);
    double j_user = 0, j_hat = 0, discount = 1;
    for (const auto& [s, a] : episode) {
      for (std::size_t k = 0; k < n_users; ++k) step_scores[k] = scorers[k](s, a);
      double mean = 0;
      for (double x : step_scores) mean += x;
      mean /= static_cast<double>(n_users);
      double xi = std::sqrt(population_variance(step_scores));
      j_user += discount * step_scores[u];
      j_hat += discount * (mean - beta * xi);
      discount *= gamma;
    }
    if (j_user >= j_hat) ++successes;
  }
  Theorem1Result r;
  r.trials = trials;
  r.beta = beta;
  r.fraction = static_cast<double>(successes) / trials;
  r.bound = 1.0 - 1.0 / (beta * beta);
  r.std_err = std::sqrt(r.fraction * (1.0 - r.fraction) / trials);
  return r;
}

// Convenience wiring: episodes sampled from the policy against the EPR
// kernel (uniform random home, slot 0 start), clients' trained
// discriminators as the scorers.
inline Theorem1Result check_theorem1_bound(
    const PolicyNet& policy, const TransitionConfig& env,
    const std::vector<const PersonalDiscriminator*>& discriminators,
    double beta, double gamma, int episode_steps, int trials,
    const RngStream& rng) {
  EpisodeSampler episodes = [&](RngStream& r) {
    LocationId home =
        static_cast<LocationId>(r.uniform_int(env.grid.num_cells()));
    State start = State::initial({0, home}, home);
    auto [traj, rollout] =
        sample_trajectory(policy, env, start, episode_steps, r);
    std::vector<std::pair<State, Action>> pairs;
    pairs.reserve(rollout.steps.size());
    State s = start;
    for (const auto& step : rollout.steps) {
      pairs.emplace_back(s, action_from_index(step.action));
      s = s.advanced(traj.points()[pairs.size()]);
    }
    return pairs;
  };
  std::vector<PairScorer> scorers;
  scorers.reserve(discriminators.size());
  for (const PersonalDiscriminator* d : discriminators)
    scorers.push_back(
        [d](const State& s, Action a) { return d->score(s, a); });
  return check_theorem1_bound(episodes, scorers, beta, gamma, trials, rng);
}

}  // namespace fedtraj

#endif  // FEDTRAJ_AGGREGATION_HPP_
