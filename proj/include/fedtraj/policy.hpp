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

#ifndef FEDTRAJ_POLICY_HPP_
#define FEDTRAJ_POLICY_HPP_

#include <array>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/features.hpp"
#include "fedtraj/mobility_env.hpp"
#include "fedtraj/nn/checkpoint.hpp"
#include "fedtraj/nn/graph.hpp"
#include "fedtraj/parallel.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

struct PolicyConfig {
  FeaturizerConfig feat;
  nn::AdamConfig adam{.lr = 3e-4};
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  bool normalize_advantages = true;
};

// Gradient chunk count for minibatch updates. Fixed (not tied to the host's
// core count) so per-chunk sums reduce in the same order everywhere.
inline constexpr std::size_t kGradChunks = 4;

struct RolloutStep {
  StateFeatures features;
  int action = 0;
  double log_prob = 0;  // at sampling time
  double value = 0;
  double reward = 0;
  double advantage = 0;
  double ret = 0;
};

struct Rollout {
  std::vector<RolloutStep> steps;
};

struct PpoStats {
  double policy_loss = 0;   // minus the mean clipped surrogate
  double value_loss = 0;
  double entropy = 0;
  double mean_ratio = 0;
  double clip_fraction = 0;
};

// The stochastic policy pi(a|s): shared encoder, one tanh hidden layer, a
// 4-way action head and a scalar value head. Heads start at zero so the
// untrained policy is uniform over actions.
class PolicyNet {
 public:
  PolicyNet(const LocationGrid& grid, PolicyConfig cfg, RngStream init_rng)
      : grid_(grid), cfg_(std::move(cfg)) {
    cfg_.feat.validate();
    grid_.validate();
    add_encoder_params(params_, cfg_.feat, grid_, init_rng);
    const std::size_t z_dim = static_cast<std::size_t>(cfg_.feat.attn_dim) + 1;
    const std::size_t m = static_cast<std::size_t>(cfg_.feat.mlp_dim);
    params_.add("pi.mlp.w", nn_init::xavier(z_dim, m, init_rng));
    params_.add("pi.mlp.b", nn::Tensor::zeros({1, m}));
    params_.add("pi.act.w", nn::Tensor::zeros({m, kNumActions}));
    params_.add("pi.act.b", nn::Tensor::zeros({1, kNumActions}));
    params_.add("pi.val.w", nn::Tensor::zeros({m, 1}));
    params_.add("pi.val.b", nn::Tensor::zeros({1, 1}));
  }

  // Builds logits (1 x 4) and value (1 x 1) for one state on graph g.
  std::pair<nn::VarId, nn::VarId> forward(nn::Graph& g, const ParamBinder& bind,
                                          const StateFeatures& f) const {
    nn::VarId h = encode_state(g, bind, f, cfg_.feat);
    nn::VarId hd = g.input(nn::Tensor({1, 1}, {f.home_dist}));
    nn::VarId z = g.concat_cols({h, hd});
    nn::VarId m = g.tanh(g.add_row(g.matmul(z, bind("pi.mlp.w")), bind("pi.mlp.b")));
    nn::VarId logits = g.add_row(g.matmul(m, bind("pi.act.w")), bind("pi.act.b"));
    nn::VarId value = g.add_row(g.matmul(m, bind("pi.val.w")), bind("pi.val.b"));
    return {logits, value};
  }

  std::array<double, kNumActions> action_distribution(const State& state) const {
    StateFeatures f = featurize(state, cfg_.feat, grid_);
    nn::Graph g;
    auto [logits, value] = forward(g, bind_frozen(g, params_), f);
    nn::VarId probs = g.softmax_vec(logits);
    std::array<double, kNumActions> out{};
    for (int a = 0; a < kNumActions; ++a) out[a] = g.value(probs).v[a];
    return out;
  }

  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const PolicyConfig& config() const { return cfg_; }
  const LocationGrid& grid() const { return grid_; }

 private:
  LocationGrid grid_;
  PolicyConfig cfg_;
  nn::ParameterSet params_;
};

// Log-probabilities and value of one state under frozen parameters,
// computed with the same formula ppo_update uses.
struct PolicyEval {
  std::array<double, kNumActions> log_probs;
  double value;
};

inline PolicyEval evaluate_policy(const PolicyNet& policy,
                                  const StateFeatures& f) {
  nn::Graph g;
  auto [logits, value] = policy.forward(g, bind_frozen(g, policy.params()), f);
  nn::VarId lp = g.log_softmax_vec(logits);
  PolicyEval out{};
  for (int a = 0; a < kNumActions; ++a) out.log_probs[a] = g.value(lp).v[a];
  out.value = g.value(value).v[0];
  return out;
}

// Rolls the policy against the transition kernel for `steps` transitions,
// recording sampling-time log-probs and value estimates. The returned
// trajectory includes the start state's history.
inline std::pair<Trajectory, Rollout> sample_trajectory(
    const PolicyNet& policy, const TransitionConfig& env, const State& start,
    int steps, RngStream& rng, UserId user = 0) {
  if (steps < 1) throw std::invalid_argument("sample_trajectory: steps >= 1");
  Rollout rollout;
  rollout.steps.reserve(steps);
  State state = start;
  for (int t = 0; t < steps; ++t) {
    StateFeatures f = featurize(state, policy.config().feat, policy.grid());
    PolicyEval eval = evaluate_policy(policy, f);
    double u = rng.uniform();
    int action = kNumActions - 1;
    double cum = 0;
    for (int a = 0; a < kNumActions; ++a) {
      cum += std::exp(eval.log_probs[a]);
      if (u < cum) {
        action = a;
        break;
      }
    }
    RolloutStep step;
    step.features = std::move(f);
    step.action = action;
    step.log_prob = eval.log_probs[action];
    step.value = eval.value;
    rollout.steps.push_back(std::move(step));
    state = sample_next(state, action_from_index(action), env, rng);
  }
  return {Trajectory(user, state.history()), std::move(rollout)};
}

// Discounted returns by the exact recursion ret[t] = r[t] + gamma*ret[t+1],
// and generalized advantage estimates; no bootstrapping past the episode.
inline void compute_advantages(Rollout& rollout, double gamma,
                               double gae_lambda) {
  const std::size_t n = rollout.steps.size();
  if (n == 0) return;
  double next_ret = 0, next_value = 0, next_adv = 0;
  for (std::size_t i = n; i-- > 0;) {
    RolloutStep& s = rollout.steps[i];
    s.ret = s.reward + gamma * next_ret;
    double delta = s.reward + gamma * next_value - s.value;
    s.advantage = delta + gamma * gae_lambda * next_adv;
    next_ret = s.ret;
    next_value = s.value;
    next_adv = s.advantage;
  }
}

// Per-sample PPO objective pieces built on graph g:
//   surrogate = min(ratio * A, clip(ratio, 1-c, 1+c) * A)
//   loss      = -surrogate + value_coef * (V - return)^2 - entropy_coef * H
struct PpoSampleLoss {
  nn::VarId loss;
  nn::VarId surrogate;
  nn::VarId ratio;
  nn::VarId entropy;
  nn::VarId value_sq_err;
};

inline PpoSampleLoss ppo_sample_loss(nn::Graph& g, const PolicyNet& policy,
                                     const ParamBinder& bind,
                                     const RolloutStep& step,
                                     double normalized_advantage) {
  const PolicyConfig& cfg = policy.config();
  auto [logits, value] = policy.forward(g, bind, step.features);
  nn::VarId lp = g.log_softmax_vec(logits);
  nn::VarId logp_new = g.pick(lp, static_cast<std::size_t>(step.action));
  nn::VarId ratio = g.exp(g.add_const(logp_new, -step.log_prob));
  nn::VarId surr = g.min2(
      g.scale(ratio, normalized_advantage),
      g.scale(g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip),
              normalized_advantage));
  nn::VarId ent = g.neg(g.sum(g.hadamard(g.exp(lp), lp)));
  nn::VarId vdiff = g.add_const(value, -step.ret);
  nn::VarId vloss = g.sum(g.hadamard(vdiff, vdiff));
  nn::VarId loss = g.add(g.add(g.neg(surr), g.scale(vloss, cfg.value_coef)),
                         g.scale(ent, -cfg.entropy_coef));
  return {loss, surr, ratio, ent, vloss};
}

// Clipped-surrogate PPO update over a batch of rollouts (advantages must be
// computed). Returns per-epoch statistics. Aborts with a numeric error when
// a minibatch loss goes non-finite.
inline std::vector<PpoStats> ppo_update(PolicyNet& policy,
                                        std::vector<Rollout>& rollouts,
                                        nn::AdamState& opt, RngStream& rng) {
  const PolicyConfig& cfg = policy.config();
  std::vector<RolloutStep*> steps;
  for (Rollout& r : rollouts)
    for (RolloutStep& s : r.steps) steps.push_back(&s);
  if (steps.empty()) return {};

  // Batch-level advantage normalization (population moments).
  std::vector<double> adv(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) adv[i] = steps[i]->advantage;
  if (cfg.normalize_advantages) {
    double m = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
    double var = 0;
    for (double a : adv) var += (a - m) * (a - m);
    var /= adv.size();
    double sd = std::sqrt(var);
    for (double& a : adv) a = (a - m) / (sd + 1e-8);
  }

  // Per-chunk gradient buffers; values are shared read-only from the policy.
  std::vector<nn::ParameterSet> buffers(kGradChunks, policy.params());

  std::vector<std::size_t> order(steps.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<PpoStats> epoch_stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);

    PpoStats stats;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.minibatch));
      const double inv_b = 1.0 / static_cast<double>(end - begin);

      struct ChunkStats {
        double surr = 0, vloss = 0, ent = 0, ratio = 0, clipped = 0;
      };
      std::vector<ChunkStats> cs(kGradChunks);
      for (auto& b : buffers) b.zero_grads();

      parallel_chunks(end - begin, kGradChunks,
                      [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t idx = order[begin + k];
          const RolloutStep& s = *steps[idx];
          nn::Graph g;
          ParamBinder bind = bind_with_sink(g, policy.params(), buffers[chunk]);
          PpoSampleLoss parts = ppo_sample_loss(g, policy, bind, s, adv[idx]);
          g.backward(g.scale(parts.loss, inv_b));

          double r = g.value(parts.ratio).v[0];
          cs[chunk].surr += g.value(parts.surrogate).v[0];
          cs[chunk].vloss += g.value(parts.value_sq_err).v[0];
          cs[chunk].ent += g.value(parts.entropy).v[0];
          cs[chunk].ratio += r;
          cs[chunk].clipped += (r < 1.0 - cfg.clip || r > 1.0 + cfg.clip) ? 1 : 0;
        }
      });

      policy.params().zero_grads();
      for (const auto& b : buffers) policy.params().accumulate_grads(b);
      opt.step(policy.params());

      for (const auto& c : cs) {
        stats.policy_loss -= c.surr;
        stats.value_loss += c.vloss;
        stats.entropy += c.ent;
        stats.mean_ratio += c.ratio;
        stats.clip_fraction += c.clipped;
      }
      seen += end - begin;
    }
    const double inv_n = 1.0 / static_cast<double>(seen);
    stats.policy_loss *= inv_n;
    stats.value_loss *= inv_n;
    stats.entropy *= inv_n;
    stats.mean_ratio *= inv_n;
    stats.clip_fraction *= inv_n;
    epoch_stats.push_back(stats);
  }
  return epoch_stats;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_POLICY_HPP_
