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

#ifndef FEDTRAJ_CONFIG_HPP_
#define FEDTRAJ_CONFIG_HPP_

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedtraj/aggregation.hpp"
#include "fedtraj/evaluation.hpp"
#include "fedtraj/io.hpp"
#include "fedtraj/orchestrator.hpp"

namespace fedtraj {

// Every tunable of the pipeline in one versioned document. Unknown keys are
// rejected; missing keys take the defaults below, and the fully resolved
// form is written alongside every run's outputs.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  LocationGrid grid{.width = 20, .height = 20, .cell_size = 500.0};
  int slots_per_day = kDefaultSlotsPerDay;
  double alpha = 0.55;

  FeaturizerConfig net;  // shared by policy and discriminators

  // ppo
  double ppo_lr = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  bool normalize_advantages = true;

  // discriminator
  double disc_lr = 1e-3;
  int disc_iterations = 5;
  int disc_batch = 64;

  // round schedule
  int num_rounds = 60;
  int batch_trajectories = 8;
  int episode_steps = 47;
  double beta = 1.0;
  int checkpoint_interval = 0;  // rounds between checkpoints; 0 = final only

  // privacy
  std::string dp_mode = "none";  // none | mean | compensated
  double epsilon = 1.0;
  double kappa = 2.0;

  // ground-truth generation
  int num_users = 50;
  int trajectories_per_user = 20;
  int days = 1;
  EprBehavior behavior;

  // evaluation
  int log_bins = 30;
  int daily_max = 30;
  int top_k = 100;

  std::vector<std::string> validate() const {
    std::vector<std::string> v;
    auto need = [&](bool ok, const std::string& what) {
      if (!ok) v.push_back(what);
    };
    need(grid.width >= 1 && grid.height >= 1, "grid.width and grid.height must be >= 1");
    need(grid.cell_size > 0, "grid.cell_size must be > 0");
    need(slots_per_day >= 1, "slots_per_day must be >= 1");
    need(alpha > 0, "alpha must be > 0");
    need(net.window >= 1, "net.window must be >= 1");
    need(net.loc_dim >= 1 && net.tod_dim >= 1 && net.act_dim >= 1,
         "net embedding dims must be >= 1");
    need(net.attn_dim >= 1 && net.mlp_dim >= 1, "net layer dims must be >= 1");
    need(ppo_lr > 0 && disc_lr > 0, "learning rates must be > 0");
    need(gamma > 0 && gamma <= 1, "gamma must be in (0, 1]");
    need(gae_lambda >= 0 && gae_lambda <= 1, "gae_lambda must be in [0, 1]");
    need(clip > 0, "clip must be > 0");
    need(epochs >= 1 && minibatch >= 1, "epochs and minibatch must be >= 1");
    need(disc_iterations >= 0, "disc.iterations must be >= 0");
    need(disc_batch >= 1, "disc.batch must be >= 1");
    need(num_rounds >= 0, "round.num_rounds must be >= 0");
    need(batch_trajectories >= 1, "round.batch_trajectories must be >= 1");
    need(episode_steps >= 1, "round.episode_steps must be >= 1");
    need(beta >= 0, "round.beta must be >= 0");
    need(checkpoint_interval >= 0, "round.checkpoint_interval must be >= 0");
    need(dp_mode == "none" || dp_mode == "mean" || dp_mode == "compensated",
         "dp.mode must be one of none|mean|compensated");
    if (dp_mode != "none") need(epsilon > 0, "dp.epsilon must be > 0");
    if (dp_mode == "compensated") need(kappa > 1, "dp.kappa must be > 1");
    need(num_users >= 1, "data.num_users must be >= 1");
    need(trajectories_per_user >= 1, "data.trajectories_per_user must be >= 1");
    need(days >= 1, "data.days must be >= 1");
    const double mix = behavior.stay + behavior.home_return +
                       behavior.preferential + behavior.explore;
    need(behavior.stay >= 0 && behavior.home_return >= 0 &&
             behavior.preferential >= 0 && behavior.explore >= 0 &&
             std::abs(mix - 1.0) <= 1e-9,
         "data.behavior probabilities must be >= 0 and sum to 1");
    need(log_bins >= 1 && daily_max >= 1 && top_k >= 1,
         "eval bins must be >= 1");
    return v;
  }

  DPBudget make_budget(int users) const {
    if (dp_mode == "mean") return DPBudget::mean_only(epsilon, users);
    if (dp_mode == "compensated")
      return DPBudget::compensated(epsilon, users, kappa);
    return DPBudget::noise_free(users);
  }

  FeaturizerConfig featurizer() const {
    FeaturizerConfig f = net;
    f.slots_per_day = slots_per_day;
    return f;
  }

  TrainerConfig trainer_config() const {
    TrainerConfig t;
    t.grid = grid;
    t.alpha = alpha;
    t.policy.feat = featurizer();
    t.policy.adam.lr = ppo_lr;
    t.policy.gamma = gamma;
    t.policy.gae_lambda = gae_lambda;
    t.policy.clip = clip;
    t.policy.epochs = epochs;
    t.policy.minibatch = minibatch;
    t.policy.value_coef = value_coef;
    t.policy.entropy_coef = entropy_coef;
    t.policy.normalize_advantages = normalize_advantages;
    t.disc.feat = featurizer();
    t.disc.adam.lr = disc_lr;
    t.disc.iterations = disc_iterations;
    t.disc.batch = disc_batch;
    t.num_rounds = num_rounds;
    t.batch_trajectories = batch_trajectories;
    t.episode_steps = episode_steps;
    t.beta = beta;
    t.budget = make_budget(2);  // |U| recomputed per round
    t.master_seed = seed;
    return t;
  }

  TransitionConfig transition_config() const {
    TransitionConfig e;
    e.alpha = alpha;
    e.grid = grid;
    return e;
  }

  EvalConfig eval_config() const {
    EvalConfig e;
    e.grid = grid;
    e.slots_per_day = slots_per_day;
    e.log_bins = log_bins;
    e.daily_max = daily_max;
    e.top_k = top_k;
    return e;
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* section,
                       const std::vector<std::string>& allowed,
                       std::vector<std::string>* errors) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      errors->push_back(std::string("unknown key '") + key + "' in " + section);
  }
}

template <typename T>
void get_to(const nlohmann::json& j, const char* key, T* out) {
  if (j.contains(key)) j.at(key).get_to(*out);
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["grid"] = {{"width", c.grid.width},
               {"height", c.grid.height},
               {"cell_size", c.grid.cell_size},
               {"origin_lat", c.grid.origin_lat},
               {"origin_lon", c.grid.origin_lon}};
  j["slots_per_day"] = c.slots_per_day;
  j["alpha"] = c.alpha;
  j["net"] = {{"window", c.net.window},   {"loc_dim", c.net.loc_dim},
              {"tod_dim", c.net.tod_dim}, {"act_dim", c.net.act_dim},
              {"attn_dim", c.net.attn_dim}, {"mlp_dim", c.net.mlp_dim}};
  j["ppo"] = {{"lr", c.ppo_lr},
              {"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"clip", c.clip},
              {"epochs", c.epochs},
              {"minibatch", c.minibatch},
              {"value_coef", c.value_coef},
              {"entropy_coef", c.entropy_coef},
              {"normalize_advantages", c.normalize_advantages}};
  j["disc"] = {{"lr", c.disc_lr},
               {"iterations", c.disc_iterations},
               {"batch", c.disc_batch}};
  j["round"] = {{"num_rounds", c.num_rounds},
                {"batch_trajectories", c.batch_trajectories},
                {"episode_steps", c.episode_steps},
                {"beta", c.beta},
                {"checkpoint_interval", c.checkpoint_interval}};
  j["dp"] = {{"mode", c.dp_mode}, {"epsilon", c.epsilon}, {"kappa", c.kappa}};
  j["data"] = {{"num_users", c.num_users},
               {"trajectories_per_user", c.trajectories_per_user},
               {"days", c.days},
               {"behavior",
                {{"stay", c.behavior.stay},
                 {"home_return", c.behavior.home_return},
                 {"preferential", c.behavior.preferential},
                 {"explore", c.behavior.explore}}}};
  j["eval"] = {{"log_bins", c.log_bins},
               {"daily_max", c.daily_max},
               {"top_k", c.top_k}};
  return j;
}

// Parses a (possibly partial) config over the defaults. Collects every
// violation rather than stopping at the first.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  RunConfig c;
  detail::check_keys(j, "config",
                     {"version", "seed", "output_dir", "grid", "slots_per_day",
                      "alpha", "net", "ppo", "disc", "round", "dp", "data",
                      "eval"},
                     &errors);
  if (j.contains("version") && j.at("version").get<int>() != 1)
    errors.push_back("unsupported config version");
  detail::get_to(j, "seed", &c.seed);
  detail::get_to(j, "output_dir", &c.output_dir);
  detail::get_to(j, "slots_per_day", &c.slots_per_day);
  detail::get_to(j, "alpha", &c.alpha);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::check_keys(g, "grid",
                       {"width", "height", "cell_size", "origin_lat",
                        "origin_lon"},
                       &errors);
    detail::get_to(g, "width", &c.grid.width);
    detail::get_to(g, "height", &c.grid.height);
    detail::get_to(g, "cell_size", &c.grid.cell_size);
    detail::get_to(g, "origin_lat", &c.grid.origin_lat);
    detail::get_to(g, "origin_lon", &c.grid.origin_lon);
  }
  if (j.contains("net")) {
    const auto& n = j.at("net");
    detail::check_keys(n, "net",
                       {"window", "loc_dim", "tod_dim", "act_dim", "attn_dim",
                        "mlp_dim"},
                       &errors);
    detail::get_to(n, "window", &c.net.window);
    detail::get_to(n, "loc_dim", &c.net.loc_dim);
    detail::get_to(n, "tod_dim", &c.net.tod_dim);
    detail::get_to(n, "act_dim", &c.net.act_dim);
    detail::get_to(n, "attn_dim", &c.net.attn_dim);
    detail::get_to(n, "mlp_dim", &c.net.mlp_dim);
  }
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    detail::check_keys(p, "ppo",
                       {"lr", "gamma", "gae_lambda", "clip", "epochs",
                        "minibatch", "value_coef", "entropy_coef",
                        "normalize_advantages"},
                       &errors);
    detail::get_to(p, "lr", &c.ppo_lr);
    detail::get_to(p, "gamma", &c.gamma);
    detail::get_to(p, "gae_lambda", &c.gae_lambda);
    detail::get_to(p, "clip", &c.clip);
    detail::get_to(p, "epochs", &c.epochs);
    detail::get_to(p, "minibatch", &c.minibatch);
    detail::get_to(p, "value_coef", &c.value_coef);
    detail::get_to(p, "entropy_coef", &c.entropy_coef);
    detail::get_to(p, "normalize_advantages", &c.normalize_advantages);
  }
  if (j.contains("disc")) {
    const auto& d = j.at("disc");
    detail::check_keys(d, "disc", {"lr", "iterations", "batch"}, &errors);
    detail::get_to(d, "lr", &c.disc_lr);
    detail::get_to(d, "iterations", &c.disc_iterations);
    detail::get_to(d, "batch", &c.disc_batch);
  }
  if (j.contains("round")) {
    const auto& r = j.at("round");
    detail::check_keys(r, "round",
                       {"num_rounds", "batch_trajectories", "episode_steps",
                        "beta", "checkpoint_interval"},
                       &errors);
    detail::get_to(r, "num_rounds", &c.num_rounds);
    detail::get_to(r, "batch_trajectories", &c.batch_trajectories);
    detail::get_to(r, "episode_steps", &c.episode_steps);
    detail::get_to(r, "beta", &c.beta);
    detail::get_to(r, "checkpoint_interval", &c.checkpoint_interval);
  }
  if (j.contains("dp")) {
    const auto& d = j.at("dp");
    detail::check_keys(d, "dp", {"mode", "epsilon", "kappa"}, &errors);
    detail::get_to(d, "mode", &c.dp_mode);
    detail::get_to(d, "epsilon", &c.epsilon);
    detail::get_to(d, "kappa", &c.kappa);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::check_keys(
        d, "data", {"num_users", "trajectories_per_user", "days", "behavior"},
        &errors);
    detail::get_to(d, "num_users", &c.num_users);
    detail::get_to(d, "trajectories_per_user", &c.trajectories_per_user);
    detail::get_to(d, "days", &c.days);
    if (d.contains("behavior")) {
      const auto& b = d.at("behavior");
      detail::check_keys(b, "data.behavior",
                         {"stay", "home_return", "preferential", "explore"},
                         &errors);
      detail::get_to(b, "stay", &c.behavior.stay);
      detail::get_to(b, "home_return", &c.behavior.home_return);
      detail::get_to(b, "preferential", &c.behavior.preferential);
      detail::get_to(b, "explore", &c.behavior.explore);
    }
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::check_keys(e, "eval", {"log_bins", "daily_max", "top_k"}, &errors);
    detail::get_to(e, "log_bins", &c.log_bins);
    detail::get_to(e, "daily_max", &c.daily_max);
    detail::get_to(e, "top_k", &c.top_k);
  }

  for (const std::string& v : c.validate()) errors.push_back(v);
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline void save_run_config(const RunConfig& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << run_config_to_json(c).dump(2) << "\n";
}

}  // namespace fedtraj

#endif  // FEDTRAJ_CONFIG_HPP_
