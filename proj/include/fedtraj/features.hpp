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

#ifndef FEDTRAJ_FEATURES_HPP_
#define FEDTRAJ_FEATURES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/nn/graph.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

// Shapes of the shared state encoder: the last `window` points enter as
// (location embedding | time-of-day embedding) rows, run through one
// causal single-head self-attention layer with a residual connection; the
// last position's encoding plus a normalized home-distance scalar feeds a
// one-hidden-layer tanh MLP in each network.
struct FeaturizerConfig {
  int window = 24;
  int loc_dim = 32;
  int tod_dim = 8;
  int act_dim = 8;
  int attn_dim = 48;
  int mlp_dim = 64;
  int slots_per_day = kDefaultSlotsPerDay;

  void validate() const {
    if (window < 1 || loc_dim < 1 || tod_dim < 1 || act_dim < 1 ||
        attn_dim < 1 || mlp_dim < 1 || slots_per_day < 1)
      throw std::invalid_argument("FeaturizerConfig: all sizes must be >= 1");
  }
};

// Fixed-size encoding of one state. Shorter histories are left-padded with
// the dedicated padding token (= vocabulary size).
struct StateFeatures {
  std::vector<int> loc_ids;  // length window
  std::vector<int> tod_ids;  // length window
  double home_dist = 0;      // grid distance current->home over grid diagonal
};

inline StateFeatures featurize(const State& state, const FeaturizerConfig& cfg,
                               const LocationGrid& grid) {
  const int pad_loc = grid.num_cells();
  const int pad_tod = cfg.slots_per_day;
  StateFeatures f;
  f.loc_ids.assign(cfg.window, pad_loc);
  f.tod_ids.assign(cfg.window, pad_tod);
  const auto& h = state.history();
  const std::size_t take =
      std::min<std::size_t>(h.size(), static_cast<std::size_t>(cfg.window));
  for (std::size_t i = 0; i < take; ++i) {
    const auto& p = h[h.size() - take + i];
    const std::size_t slot_in_window = cfg.window - take + i;
    f.loc_ids[slot_in_window] = p.loc;
    f.tod_ids[slot_in_window] = static_cast<int>(p.slot % cfg.slots_per_day);
  }
  f.home_dist =
      grid_distance(state.current().loc, state.home(), grid) / grid.diagonal();
  return f;
}

namespace nn_init {

inline nn::Tensor xavier(std::size_t fan_in, std::size_t fan_out,
                         RngStream& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  nn::Tensor t = nn::Tensor::zeros({fan_in, fan_out});
  for (double& x : t.v) x = rng.uniform(-s, s);
  return t;
}

inline nn::Tensor embedding(std::size_t vocab, std::size_t dim,
                            RngStream& rng) {
  nn::Tensor t = nn::Tensor::zeros({vocab, dim});
  for (double& x : t.v) x = 0.1 * rng.normal();
  return t;
}

}  // namespace nn_init

// Registers the encoder parameters under "enc.*" in ps.
inline void add_encoder_params(nn::ParameterSet& ps, const FeaturizerConfig& cfg,
                               const LocationGrid& grid, RngStream& rng) {
  const std::size_t loc_vocab = static_cast<std::size_t>(grid.num_cells()) + 1;
  const std::size_t tod_vocab = static_cast<std::size_t>(cfg.slots_per_day) + 1;
  const std::size_t in_dim = cfg.loc_dim + cfg.tod_dim;
  const std::size_t d = cfg.attn_dim;
  ps.add("enc.emb.loc", nn_init::embedding(loc_vocab, cfg.loc_dim, rng));
  ps.add("enc.emb.tod", nn_init::embedding(tod_vocab, cfg.tod_dim, rng));
  ps.add("enc.in.w", nn_init::xavier(in_dim, d, rng));
  ps.add("enc.in.b", nn::Tensor::zeros({1, d}));
  ps.add("enc.q.w", nn_init::xavier(d, d, rng));
  ps.add("enc.k.w", nn_init::xavier(d, d, rng));
  ps.add("enc.v.w", nn_init::xavier(d, d, rng));
}

// Causal single-head self-attention with a residual connection:
//   out = x + softmax(mask(QK^T / sqrt(d))) V,  Q|K|V = x W_{q|k|v}.
inline nn::VarId self_attention(nn::Graph& g, nn::VarId x, nn::VarId wq,
                                nn::VarId wk, nn::VarId wv) {
  const std::size_t d = g.value(x).cols();
  nn::VarId q = g.matmul(x, wq);
  nn::VarId k = g.matmul(x, wk);
  nn::VarId v = g.matmul(x, wv);
  nn::VarId scores =
      g.scale(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  nn::VarId weights = g.causal_softmax_rows(scores);
  return g.add(x, g.matmul(weights, v));
}

// Resolves parameter names to graph leaves. Training binds into a gradient
// buffer, inference binds frozen.
using ParamBinder = std::function<nn::VarId(const std::string&)>;

inline ParamBinder bind_trainable(nn::Graph& g, nn::ParameterSet& ps) {
  return [&g, &ps](const std::string& name) { return g.param(ps, name); };
}

inline ParamBinder bind_frozen(nn::Graph& g, const nn::ParameterSet& ps) {
  return [&g, &ps](const std::string& name) { return g.frozen(ps, name); };
}

// Binds values from `values` but accumulates gradients into `grad_sink`'s
// slots; used to run training samples concurrently with per-chunk buffers.
inline ParamBinder bind_with_sink(nn::Graph& g, const nn::ParameterSet& values,
                                  nn::ParameterSet& grad_sink) {
  return [&g, &values, &grad_sink](const std::string& name) {
    return g.leaf(&values.value(name), &grad_sink.grad(name));
  };
}

// Runs the shared encoder over one state's features; returns the 1 x attn_dim
// encoding of the current position.
inline nn::VarId encode_state(nn::Graph& g, const ParamBinder& bind,
                              const StateFeatures& f,
                              const FeaturizerConfig& cfg) {
  nn::VarId loc_emb = g.rows(bind("enc.emb.loc"), f.loc_ids);
  nn::VarId tod_emb = g.rows(bind("enc.emb.tod"), f.tod_ids);
  nn::VarId x = g.concat_cols({loc_emb, tod_emb});
  nn::VarId h0 = g.add_row(g.matmul(x, bind("enc.in.w")), bind("enc.in.b"));
  nn::VarId h1 =
      self_attention(g, h0, bind("enc.q.w"), bind("enc.k.w"), bind("enc.v.w"));
  return g.row(h1, static_cast<std::size_t>(cfg.window) - 1);
}

}  // namespace fedtraj

#endif  // FEDTRAJ_FEATURES_HPP_
