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

#ifndef FEDTRAJ_CLI_HPP_
#define FEDTRAJ_CLI_HPP_

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedtraj/attacks.hpp"
#include "fedtraj/config.hpp"
#include "fedtraj/evaluation.hpp"
#include "fedtraj/io.hpp"
#include "fedtraj/nn/checkpoint.hpp"
#include "fedtraj/orchestrator.hpp"

namespace fedtraj {

namespace cli_detail {

inline RunConfig load_or_default(const std::string& config_path) {
  return config_path.empty() ? RunConfig{} : load_run_config(config_path);
}

// Replaces dst's tensors with the checkpoint's; names and shapes must match.
inline void load_params_into(nn::ParameterSet& dst, const std::string& path) {
  nn::ParameterSet loaded = nn::load_parameters(path);
  if (loaded.names() != dst.names())
    throw std::runtime_error("checkpoint " + path +
                             " does not match the configured network");
  for (auto& [name, value] : dst) {
    const nn::Tensor& src = loaded.value(name);
    if (!value.same_shape(src))
      throw std::runtime_error("checkpoint " + path + ": shape mismatch for " +
                               name);
    value = src;
  }
}

inline nlohmann::json round_report_json(const RoundReport& r) {
  nlohmann::json j;
  j["round"] = r.round;
  j["active_clients"] = r.active_clients;
  j["reward_queries"] = r.reward_queries;
  j["epsilon"] = std::isfinite(r.epsilon) ? nlohmann::json(r.epsilon)
                                          : nlohmann::json("inf");
  j["lambda"] = r.lambda_mean;
  j["lambda_c"] = r.lambda_var;
  j["mean_reward"] = r.mean_reward;
  j["mean_xi"] = r.mean_xi;
  j["mean_disc_loss"] = r.mean_disc_loss;
  if (!r.ppo.empty()) {
    j["policy_loss"] = r.ppo.back().policy_loss;
    j["value_loss"] = r.ppo.back().value_loss;
    j["entropy"] = r.ppo.back().entropy;
  }
  return j;
}

inline std::vector<Trajectory> flatten(const std::vector<ClientDataset>& data) {
  std::vector<Trajectory> out;
  for (const auto& d : data)
    out.insert(out.end(), d.trajectories.begin(), d.trajectories.end());
  return out;
}

inline void write_histogram(const MetricDistribution& d,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t i = 0; i < d.mass.size(); ++i)
    f << d.bin_labels[i] << " " << d.mass[i] << "\n";
}

inline int run_synth_data(const std::string& config_path,
                          const std::string& out,
                          std::optional<int> users, std::optional<int> trajs,
                          std::optional<int> days,
                          std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_or_default(config_path);
  if (users) cfg.num_users = *users;
  if (trajs) cfg.trajectories_per_user = *trajs;
  if (days) cfg.days = *days;
  if (seed) cfg.seed = *seed;
  auto errors = cfg.validate();
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  auto data = synth_ground_truth(
      cfg.num_users, cfg.trajectories_per_user, cfg.days,
      cfg.transition_config(), cfg.behavior, cfg.slots_per_day,
      RngStream(cfg.seed).split(StreamPurpose::kData, 0));
  save_trajectories(data, out);
  save_run_config(cfg, out + ".config.json");
  std::cout << "wrote " << cfg.num_users << " users x "
            << cfg.trajectories_per_user << " trajectories to " << out << "\n";
  return 0;
}

inline int run_train(const std::string& config_path, const std::string& data_path,
                     const std::string& out_dir) {
  RunConfig cfg = load_or_default(config_path);
  cfg.output_dir = out_dir;
  std::filesystem::create_directories(out_dir);
  std::filesystem::create_directories(out_dir + "/discriminators");
  save_run_config(cfg, out_dir + "/config.resolved.json");

  auto clients =
      load_trajectories(data_path, cfg.grid, cfg.slots_per_day, cfg.days);
  FederatedTrainer trainer(cfg.trainer_config(), std::move(clients));

  std::ofstream history(out_dir + "/history.jsonl");
  if (!history) throw std::runtime_error("cannot open history file");
  trainer.train([&](const RoundReport& r) {
    history << round_report_json(r).dump() << "\n";
    history.flush();
    if (cfg.checkpoint_interval > 0 && (r.round + 1) % cfg.checkpoint_interval == 0)
      nn::save_parameters(trainer.policy().params(),
                          out_dir + "/policy.round" + std::to_string(r.round) +
                              ".params");
    std::cout << "round " << r.round << " mean_reward " << r.mean_reward
              << " disc_loss " << r.mean_disc_loss << "\n";
  });

  nn::save_parameters(trainer.policy().params(), out_dir + "/policy.params");
  for (const PersonalDiscriminator* d : trainer.discriminators())
    nn::save_parameters(d->params(), out_dir + "/discriminators/" +
                                         std::to_string(d->user()) + ".params");
  std::cout << "trained " << cfg.num_rounds << " rounds; outputs in "
            << out_dir << "\n";
  return 0;
}

inline int run_generate(const std::string& config_path,
                        const std::string& checkpoint, int num,
                        const std::string& out,
                        std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_or_default(config_path);
  if (seed) cfg.seed = *seed;
  if (num < 1) throw std::runtime_error("--num must be >= 1");
  PolicyNet policy(cfg.grid, cfg.trainer_config().policy,
                   RngStream(cfg.seed).split(StreamPurpose::kInit, 0));
  load_params_into(policy.params(), checkpoint);

  TransitionConfig env = cfg.transition_config();
  const int steps = cfg.days * cfg.slots_per_day - 1;
  RngStream root(cfg.seed);
  std::vector<ClientDataset> out_data(num);
  parallel_for(static_cast<std::size_t>(num), [&](std::size_t i) {
    RngStream r = root.split(StreamPurpose::kRollout, i);
    LocationId home =
        static_cast<LocationId>(r.uniform_int(cfg.grid.num_cells()));
    State start = State::initial({0, home}, home);
    auto [traj, rollout] = sample_trajectory(policy, env, start, steps, r,
                                             static_cast<UserId>(i));
    out_data[i] = make_client_dataset(static_cast<UserId>(i), {traj},
                                      cfg.slots_per_day);
  });
  save_trajectories(out_data, out);
  save_run_config(cfg, out + ".config.json");
  std::cout << "generated " << num << " trajectories to " << out << "\n";
  return 0;
}

inline int run_evaluate(const std::string& config_path,
                        const std::string& real_path,
                        const std::string& synth_path,
                        const std::string& out_dir) {
  RunConfig cfg = load_or_default(config_path);
  std::filesystem::create_directories(out_dir);
  auto real = load_trajectories(real_path, cfg.grid, cfg.slots_per_day, cfg.days);
  auto synth =
      load_trajectories(synth_path, cfg.grid, cfg.slots_per_day, cfg.days);
  MetricReport report =
      evaluate(flatten(real), flatten(synth), cfg.eval_config());

  std::ofstream f(out_dir + "/report.txt");
  if (!f) throw std::runtime_error("cannot open report file");
  f << "fedtraj.metric-report.v1\n";
  for (const auto& m : report.metrics) {
    f << m.name << " jsd " << m.jsd_value << "\n";
    write_histogram(m.real, out_dir + "/" + m.name + ".real.hist.txt");
    write_histogram(m.synthetic, out_dir + "/" + m.name + ".synthetic.hist.txt");
  }
  save_run_config(cfg, out_dir + "/config.resolved.json");
  for (const auto& m : report.metrics)
    std::cout << m.name << " jsd " << m.jsd_value << "\n";
  return 0;
}

inline int run_attack(const std::string& config_path,
                      const std::string& members_path,
                      const std::string& holdout_path,
                      const std::string& discs_dir,
                      const std::string& synth_path, const std::string& out) {
  RunConfig cfg = load_or_default(config_path);
  auto members_data =
      load_trajectories(members_path, cfg.grid, cfg.slots_per_day, cfg.days);
  auto holdout_data =
      load_trajectories(holdout_path, cfg.grid, cfg.slots_per_day, cfg.days);
  auto synth =
      load_trajectories(synth_path, cfg.grid, cfg.slots_per_day, cfg.days);

  std::vector<Trajectory> members = flatten(members_data);
  std::vector<Trajectory> non_members = flatten(holdout_data);
  const std::size_t n = std::min(members.size(), non_members.size());
  members.resize(n);
  non_members.resize(n);

  // Load the personal discriminators written by `train`.
  std::map<std::string, std::string> disc_files;  // sorted by filename
  for (const auto& entry : std::filesystem::directory_iterator(discs_dir))
    if (entry.path().extension() == ".params")
      disc_files[entry.path().filename().string()] = entry.path().string();
  if (disc_files.size() < 2)
    throw std::runtime_error("need >= 2 discriminator checkpoints in " +
                             discs_dir);
  std::vector<PersonalDiscriminator> discs;
  RngStream init(cfg.seed);
  std::size_t idx = 0;
  for (const auto& [name, path] : disc_files) {
    discs.emplace_back(static_cast<UserId>(idx), cfg.grid,
                       cfg.trainer_config().disc,
                       init.split(StreamPurpose::kInit, idx + 1));
    load_params_into(discs.back().params(), path);
    ++idx;
  }

  // White-box oracle: the DP-aggregated reward at the run's budget, fresh
  // noise per query. Sequential queries keep the noise draws reproducible.
  DPBudget budget = cfg.make_budget(static_cast<int>(discs.size()));
  RngStream noise = RngStream(cfg.seed).split(StreamPurpose::kNoise, 0);
  RewardOracle oracle = [&](const State& s, Action a) {
    std::vector<double> scores;
    scores.reserve(discs.size());
    for (const auto& d : discs) scores.push_back(d.score(s, a));
    return compensated_reward(scores, cfg.beta, budget, noise);
  };

  MIAResult mia = membership_inference(members, non_members, oracle,
                                       cfg.slots_per_day, RngStream(cfg.seed));
  UniquenessResult uniq = uniqueness_test(members, flatten(synth));

  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open for writing: " + out);
  f << "fedtraj.attack-report.v1\n";
  f << "classifier logistic-regression-gd\n";
  f << "features " << mia.feature_description << "\n";
  f << "dp_mode " << cfg.dp_mode << "\n";
  f << "epsilon " << (cfg.dp_mode == "none" ? std::string("inf")
                                            : std::to_string(cfg.epsilon))
    << "\n";
  f << "samples_per_class " << n << "\n";
  for (std::size_t i = 0; i < mia.fold_accuracies.size(); ++i)
    f << "fold_" << i << "_accuracy " << mia.fold_accuracies[i] << "\n";
  f << "mean_accuracy " << mia.mean_accuracy << "\n";
  f << "uniqueness_mean " << uniq.mean_rate << "\n";
  f << "uniqueness_max " << uniq.max_rate << "\n";
  std::cout << "MIA mean accuracy " << mia.mean_accuracy
            << ", uniqueness mean " << uniq.mean_rate << " max "
            << uniq.max_rate << "\n";
  return 0;
}

inline int run_dp_budget(double epsilon, int users,
                         std::optional<double> kappa) {
  DPBudget b = budget_for(epsilon, users, kappa);
  std::cout << "dp-budget report\n";
  std::cout << "mode = " << dp_mode_name(b.mode) << "\n";
  std::cout << "epsilon = " << b.epsilon << "\n";
  std::cout << "users = " << b.num_users << "\n";
  if (kappa) std::cout << "kappa = " << b.kappa << "\n";
  std::cout << "lambda = " << b.lambda_mean << "\n";
  if (kappa) std::cout << "lambda_c = " << b.lambda_var << "\n";
  return 0;
}

}  // namespace cli_detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"federated privacy-preserving mobility trajectory generator"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, holdout_path, discs_dir,
      synth_path, real_path, checkpoint;
  std::optional<int> users, trajs, days;
  std::optional<std::uint64_t> seed;
  int num = 100;
  double epsilon = 1.0;
  int budget_users = 2;
  std::optional<double> kappa;

  CLI::App* synth = app.add_subcommand("synth-data", "generate ground-truth data");
  synth->add_option("--config", config_path, "config JSON");
  synth->add_option("--out", out_path, "output trajectory file")->required();
  synth->add_option("--users", users, "override data.num_users");
  synth->add_option("--trajectories", trajs, "override data.trajectories_per_user");
  synth->add_option("--days", days, "override data.days");
  synth->add_option("--seed", seed, "override seed");

  CLI::App* train_cmd = app.add_subcommand("train", "run the federated training loop");
  train_cmd->add_option("--config", config_path, "config JSON");
  train_cmd->add_option("--data", data_path, "training trajectory file")->required();
  train_cmd->add_option("--out", out_path, "output directory")->required();

  CLI::App* gen = app.add_subcommand("generate", "sample trajectories from a checkpoint");
  gen->add_option("--config", config_path, "config JSON");
  gen->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  gen->add_option("--num", num, "number of trajectories");
  gen->add_option("--out", out_path, "output trajectory file")->required();
  gen->add_option("--seed", seed, "override seed");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "statistical fidelity report");
  eval_cmd->add_option("--config", config_path, "config JSON");
  eval_cmd->add_option("--real", real_path, "real trajectory file")->required();
  eval_cmd->add_option("--synthetic", synth_path, "synthetic trajectory file")->required();
  eval_cmd->add_option("--out", out_path, "output directory")->required();

  CLI::App* attack = app.add_subcommand("attack", "membership inference + uniqueness report");
  attack->add_option("--config", config_path, "config JSON");
  attack->add_option("--data", data_path, "training (member) trajectory file")->required();
  attack->add_option("--holdout", holdout_path, "held-out (non-member) trajectory file")->required();
  attack->add_option("--discs", discs_dir, "directory of discriminator checkpoints")->required();
  attack->add_option("--synthetic", synth_path, "generated trajectory file")->required();
  attack->add_option("--out", out_path, "report file")->required();

  CLI::App* budget = app.add_subcommand("dp-budget", "print Laplace scales for a budget");
  budget->add_option("--epsilon", epsilon, "privacy budget")->required();
  budget->add_option("--users", budget_users, "participating users")->required();
  budget->add_option("--kappa", kappa, "compensated-mode split parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed())
      return cli_detail::run_synth_data(config_path, out_path, users, trajs,
                                        days, seed);
    if (train_cmd->parsed())
      return cli_detail::run_train(config_path, data_path, out_path);
    if (gen->parsed())
      return cli_detail::run_generate(config_path, checkpoint, num, out_path,
                                      seed);
    if (eval_cmd->parsed())
      return cli_detail::run_evaluate(config_path, real_path, synth_path,
                                      out_path);
    if (attack->parsed())
      return cli_detail::run_attack(config_path, data_path, holdout_path,
                                    discs_dir, synth_path, out_path);
    if (budget->parsed())
      return cli_detail::run_dp_budget(epsilon, budget_users, kappa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_CLI_HPP_
