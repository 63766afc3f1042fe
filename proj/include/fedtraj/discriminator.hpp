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

#ifndef FEDTRAJ_DISCRIMINATOR_HPP_
#define FEDTRAJ_DISCRIMINATOR_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/features.hpp"
#include "fedtraj/nn/graph.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

struct DiscriminatorConfig {
  FeaturizerConfig feat;
  nn::AdamConfig adam{.lr = 1e-3};
  int iterations = 5;  // local steps per round
  int batch = 64;      // positives and negatives per step
};

// Labels each consecutive transition of a real or synthetic trajectory with
// the EPR action that explains it. Precedence for ambiguous transitions:
// stay, then home return, then preferential return, then explore.
inline std::vector<std::pair<State, Action>> extract_pairs(
    const Trajectory& trajectory, LocationId home) {
  std::vector<std::pair<State, Action>> out;
  const auto& pts = trajectory.points();
  if (pts.size() < 2) return out;
  State state = State::initial(pts.front(), home);
  for (std::size_t t = 0; t + 1 < pts.size(); ++t) {
    const LocationId cur = pts[t].loc;
    const LocationId next = pts[t + 1].loc;
    Action a;
    if (next == cur)
      a = Action::kStay;
    else if (next == home)
      a = Action::kHomeReturn;
    else if (state.visited(next))
      a = Action::kPreferentialReturn;
    else
      a = Action::kExplore;
    out.emplace_back(state, a);
    state = state.advanced(pts[t + 1]);
  }
  return out;
}

// Prefix states s_0..s_{n-2} of a trajectory, the states a scorer pairs with
// per-step actions.
inline std::vector<State> prefix_states(const Trajectory& trajectory,
                                        LocationId home) {
  std::vector<State> out;
  const auto& pts = trajectory.points();
  if (pts.size() < 2) return out;
  State state = State::initial(pts.front(), home);
  for (std::size_t t = 0; t + 1 < pts.size(); ++t) {
    out.push_back(state);
    state = state.advanced(pts[t + 1]);
  }
  return out;
}

// Per-client discriminator D(s, a): the shared encoder plus an action
// embedding, a tanh hidden layer and a single sigmoid unit. The output head
// starts at zero, so the untrained score is exactly 0.5.
class PersonalDiscriminator {
 public:
  PersonalDiscriminator(UserId user, const LocationGrid& grid,
                        DiscriminatorConfig cfg, RngStream init_rng)
      : user_(user), grid_(grid), cfg_(std::move(cfg)) {
    cfg_.feat.validate();
    add_encoder_params(params_, cfg_.feat, grid_, init_rng);
    const std::size_t z_dim =
        static_cast<std::size_t>(cfg_.feat.attn_dim) + 1 + cfg_.feat.act_dim;
    const std::size_t m = static_cast<std::size_t>(cfg_.feat.mlp_dim);
    params_.add("d.emb.act",
                nn_init::embedding(kNumActions, cfg_.feat.act_dim, init_rng));
    params_.add("d.mlp.w", nn_init::xavier(z_dim, m, init_rng));
    params_.add("d.mlp.b", nn::Tensor::zeros({1, m}));
    params_.add("d.out.w", nn::Tensor::zeros({m, 1}));
    params_.add("d.out.b", nn::Tensor::zeros({1, 1}));
  }

  // Pre-sigmoid plausibility of one (state, action) pair.
  nn::VarId forward_logit(nn::Graph& g, const ParamBinder& bind,
                          const StateFeatures& f, int action) const {
    nn::VarId h = encode_state(g, bind, f, cfg_.feat);
    nn::VarId hd = g.input(nn::Tensor({1, 1}, {f.home_dist}));
    nn::VarId act = g.rows(bind("d.emb.act"), {action});
    nn::VarId z = g.concat_cols({h, hd, act});
    nn::VarId m = g.tanh(g.add_row(g.matmul(z, bind("d.mlp.w")), bind("d.mlp.b")));
    return g.add_row(g.matmul(m, bind("d.out.w")), bind("d.out.b"));
  }

  double score_features(const StateFeatures& f, int action) const {
    nn::Graph g;
    nn::VarId logit = forward_logit(g, bind_frozen(g, params_), f, action);
    double s = 1.0 / (1.0 + std::exp(-g.value(logit).v[0]));
    // keep the contract output strictly inside (0, 1)
    return std::clamp(s, 1e-12, 1.0 - 1e-12);
  }

  double score(const State& state, Action action) const {
    return score_features(featurize(state, cfg_.feat, grid_),
                          action_index(action));
  }

  UserId user() const { return user_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const DiscriminatorConfig& config() const { return cfg_; }
  const LocationGrid& grid() const { return grid_; }

 private:
  UserId user_;
  LocationGrid grid_;
  DiscriminatorConfig cfg_;
  nn::ParameterSet params_;
};

// mean(-log p) over positive scores plus mean(-log(1 - n)) over negative
// scores.
inline double binary_loss_from_scores(std::span<const double> positives,
                                      std::span<const double> negatives) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("binary_loss_from_scores: empty sample set");
  double pos = 0, neg = 0;
  for (double p : positives) pos -= std::log(p);
  for (double n : negatives) neg -= std::log(1.0 - n);
  return pos / positives.size() + neg / negatives.size();
}

// The same loss on a discriminator's own scores: mean of -log D over
// positives plus mean of -log(1-D) over negatives, evaluated through
// softplus for stability.
inline double discriminator_loss(
    const PersonalDiscriminator& disc,
    const std::vector<std::pair<State, Action>>& positives,
    const std::vector<std::pair<State, Action>>& negatives) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("discriminator_loss: empty sample set");
  auto term = [&](const std::pair<State, Action>& p, bool positive) {
    nn::Graph g;
    StateFeatures f = featurize(p.first, disc.config().feat, disc.grid());
    nn::VarId z = disc.forward_logit(g, bind_frozen(g, disc.params()), f,
                                     action_index(p.second));
    nn::VarId sp = positive ? g.softplus(g.neg(z)) : g.softplus(z);
    return g.value(sp).v[0];
  };
  double pos = 0, neg = 0;
  for (const auto& p : positives) pos += term(p, true);
  for (const auto& p : negatives) neg += term(p, false);
  return pos / positives.size() + neg / negatives.size();
}

struct LocalTrainStatus {
  bool skipped = false;          // degenerate client, no extractable pairs
  std::vector<double> losses;    // one minibatch loss per iteration
};

// Runs `iterations` optimizer steps on the personal discriminator with
// fresh positive/negative minibatches per step. Reads only the client's own
// dataset and the server-provided synthetic batch.
inline LocalTrainStatus train_local(PersonalDiscriminator& disc,
                                    const ClientDataset& client,
                                    const std::vector<Trajectory>& synthetic,
                                    int iterations, int batch,
                                    nn::AdamState& opt, RngStream& rng) {
  if (client.trajectories.empty() || synthetic.empty())
    throw std::invalid_argument("train_local: empty inputs");
  if (batch < 1) throw std::invalid_argument("train_local: batch >= 1");

  const FeaturizerConfig& fc = disc.config().feat;
  std::vector<std::pair<StateFeatures, int>> pos_pool, neg_pool;
  for (const auto& t : client.trajectories)
    for (const auto& [s, a] : extract_pairs(t, client.home))
      pos_pool.emplace_back(featurize(s, fc, disc.grid()), action_index(a));
  for (const auto& t : synthetic) {
    if (t.empty()) continue;
    const LocationId home = t.points().front().loc;
    for (const auto& [s, a] : extract_pairs(t, home))
      neg_pool.emplace_back(featurize(s, fc, disc.grid()), action_index(a));
  }

  LocalTrainStatus status;
  if (pos_pool.empty() || neg_pool.empty()) {
    status.skipped = true;
    return status;
  }

  const double inv_b = 1.0 / static_cast<double>(batch);
  for (int it = 0; it < iterations; ++it) {
    disc.params().zero_grads();
    double loss_value = 0;
    for (int side = 0; side < 2; ++side) {
      const auto& pool = side == 0 ? pos_pool : neg_pool;
      for (int k = 0; k < batch; ++k) {
        const auto& [f, a] = pool[rng.uniform_int(pool.size())];
        nn::Graph g;
        nn::VarId z =
            disc.forward_logit(g, bind_trainable(g, disc.params()), f, a);
        nn::VarId sp = side == 0 ? g.softplus(g.neg(z)) : g.softplus(z);
        nn::VarId loss = g.scale(sp, inv_b);
        g.backward(loss);
        loss_value += g.value(loss).v[0];
      }
    }
    opt.step(disc.params());
    status.losses.push_back(loss_value);
  }
  return status;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_DISCRIMINATOR_HPP_
