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

#ifndef FEDTRAJ_ORCHESTRATOR_HPP_
#define FEDTRAJ_ORCHESTRATOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedtraj/aggregation.hpp"
#include "fedtraj/core.hpp"
#include "fedtraj/discriminator.hpp"
#include "fedtraj/mobility_env.hpp"
#include "fedtraj/parallel.hpp"
#include "fedtraj/policy.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

// --- message contract ---
//
// Every server<->client exchange passes through serialize/parse, so the
// in-process transport has the same surface a network transport would.
// Downstream messages carry synthetic trajectories (home, points, and for
// reward queries the sampled actions). Upstream messages carry nothing but
// the round id and (pair index, score) entries.

struct SyntheticTrajectoryMsg {
  LocationId home = 0;
  std::vector<SpatioTemporalPoint> points;
  std::vector<int> actions;  // present for reward-query batches only
};

struct ServerToClientMsg {
  int round = 0;
  bool is_query = false;
  std::vector<SyntheticTrajectoryMsg> trajectories;
};

struct ClientToServerMsg {
  int round = 0;
  std::vector<std::pair<int, double>> scores;  // (pair index, score)
};

inline std::string serialize(const ServerToClientMsg& msg) {
  nlohmann::json j;
  j["v"] = 1;
  j["round"] = msg.round;
  j["kind"] = msg.is_query ? "query" : "disc";
  nlohmann::json trajs = nlohmann::json::array();
  for (const auto& t : msg.trajectories) {
    nlohmann::json jt;
    jt["home"] = t.home;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : t.points)
      pts.push_back({p.slot, p.loc});
    jt["points"] = std::move(pts);
    if (msg.is_query) jt["actions"] = t.actions;
    trajs.push_back(std::move(jt));
  }
  j["trajs"] = std::move(trajs);
  return j.dump();
}

inline ServerToClientMsg parse_down(const std::string& payload) {
  nlohmann::json j = nlohmann::json::parse(payload);
  if (j.at("v").get<int>() != 1)
    throw std::runtime_error("down message: unsupported version");
  ServerToClientMsg msg;
  msg.round = j.at("round").get<int>();
  msg.is_query = j.at("kind").get<std::string>() == "query";
  for (const auto& jt : j.at("trajs")) {
    SyntheticTrajectoryMsg t;
    t.home = jt.at("home").get<LocationId>();
    for (const auto& p : jt.at("points"))
      t.points.push_back({p.at(0).get<SlotIndex>(), p.at(1).get<LocationId>()});
    if (msg.is_query) t.actions = jt.at("actions").get<std::vector<int>>();
    msg.trajectories.push_back(std::move(t));
  }
  return msg;
}

inline std::string serialize(const ClientToServerMsg& msg) {
  nlohmann::json j;
  j["v"] = 1;
  j["round"] = msg.round;
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [idx, score] : msg.scores)
    scores.push_back({idx, score});
  j["scores"] = std::move(scores);
  return j.dump();
}

inline ClientToServerMsg parse_up(const std::string& payload) {
  nlohmann::json j = nlohmann::json::parse(payload);
  if (j.at("v").get<int>() != 1)
    throw std::runtime_error("up message: unsupported version");
  ClientToServerMsg msg;
  msg.round = j.at("round").get<int>();
  for (const auto& e : j.at("scores"))
    msg.scores.emplace_back(e.at(0).get<int>(), e.at(1).get<double>());
  return msg;
}

// --- privacy audit ---

// (slot, loc) pairs tagged at ingestion of real client data.
class RealPointRegistry {
 public:
  void tag(SlotIndex slot, LocationId loc) { tagged_.insert(key(slot, loc)); }
  void tag_dataset(const ClientDataset& d) {
    for (const auto& t : d.trajectories)
      for (const auto& p : t.points()) tag(p.slot, p.loc);
  }
  bool contains(SlotIndex slot, LocationId loc) const {
    return tagged_.count(key(slot, loc)) > 0;
  }
  std::size_t size() const { return tagged_.size(); }

 private:
  static std::uint64_t key(SlotIndex slot, LocationId loc) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(slot)) << 32) |
           static_cast<std::uint32_t>(loc);
  }
  std::unordered_set<std::uint64_t> tagged_;
};

struct TracedMessage {
  enum class Direction { kDown, kUp };
  Direction direction = Direction::kDown;
  int round = 0;
  UserId client = 0;
  std::string payload;
};

struct MessageTrace {
  std::vector<TracedMessage> messages;
};

struct AuditResult {
  bool pass = true;
  std::vector<std::string> violations;
};

// PASS iff no upstream message carries a tagged real (slot, loc) pair and
// every upstream payload matches the {round id, (pair index, score)...}
// schema exactly.
inline AuditResult message_audit(const MessageTrace& trace,
                                 const RealPointRegistry& registry) {
  AuditResult result;
  auto violate = [&](const std::string& what, const TracedMessage& m) {
    result.pass = false;
    result.violations.push_back("round " + std::to_string(m.round) +
                                " client " + std::to_string(m.client) + ": " +
                                what);
  };

  std::function<bool(const nlohmann::json&)> contains_tagged =
      [&](const nlohmann::json& j) -> bool {
    if (j.is_array()) {
      if (j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer() &&
          registry.contains(j[0].get<SlotIndex>(), j[1].get<LocationId>()))
        return true;
      for (const auto& e : j)
        if (contains_tagged(e)) return true;
    } else if (j.is_object()) {
      if (j.contains("slot") && j.contains("loc") &&
          j["slot"].is_number_integer() && j["loc"].is_number_integer() &&
          registry.contains(j["slot"].get<SlotIndex>(), j["loc"].get<LocationId>()))
        return true;
      for (const auto& [k, e] : j.items())
        if (contains_tagged(e)) return true;
    }
    return false;
  };

  for (const auto& m : trace.messages) {
    if (m.direction != TracedMessage::Direction::kUp) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(m.payload);
    } catch (const std::exception&) {
      violate("unparseable upstream payload", m);
      continue;
    }
    if (contains_tagged(j)) violate("real trajectory point in upstream payload", m);
    if (!j.is_object() || j.size() != 3 || !j.contains("v") ||
        !j.contains("round") || !j.contains("scores") ||
        !j["round"].is_number_integer() || !j["scores"].is_array()) {
      violate("upstream payload outside the scores schema", m);
      continue;
    }
    for (const auto& e : j["scores"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_float()) {
        violate("upstream score entry is not a (pair index, score) tuple", m);
        break;
      }
    }
  }
  return result;
}

// --- training loop ---

struct TrainerConfig {
  LocationGrid grid;
  double alpha = 0.55;
  PolicyConfig policy;
  DiscriminatorConfig disc;
  int num_rounds = 60;
  int batch_trajectories = 8;  // per synthetic batch (two batches per round)
  int episode_steps = 47;      // sampled transitions per episode
  double beta = 1.0;
  DPBudget budget = DPBudget::noise_free(2);  // |U| patched per round
  std::uint64_t master_seed = 1;

  void validate() const {
    grid.validate();
    if (!(alpha > 0)) throw std::invalid_argument("TrainerConfig: alpha > 0");
    if (num_rounds < 0 || batch_trajectories < 1 || episode_steps < 1)
      throw std::invalid_argument("TrainerConfig: counts must be >= 1");
    if (beta < 0) throw std::invalid_argument("TrainerConfig: beta >= 0");
  }
};

struct RoundReport {
  int round = 0;
  int active_clients = 0;
  int reward_queries = 0;
  double epsilon = 0;
  double lambda_mean = 0;
  double lambda_var = 0;
  double mean_reward = 0;  // mean compensated reward over the query batch
  double mean_xi = 0;
  double mean_disc_loss = 0;  // last local iteration, averaged over clients
  std::vector<PpoStats> ppo;
};

// Algorithm: per round, (a) sample a synthetic batch and broadcast it, (b)
// every client trains its personal discriminator locally against that
// batch, (c) broadcast a fresh query batch, (d) clients return per-pair
// scores, (e) the server aggregates them into compensated rewards, (f) the
// server takes a PPO step. Failed clients drop out for the round and the
// budget is recomputed with the reduced |U|.
class FederatedTrainer {
 public:
  FederatedTrainer(TrainerConfig cfg, std::vector<ClientDataset> datasets,
                   MessageTrace* trace = nullptr)
      : cfg_(std::move(cfg)),
        rng_(cfg_.master_seed),
        trace_(trace),
        policy_(cfg_.grid, cfg_.policy,
                rng_.split(StreamPurpose::kInit, 0)) {
    cfg_.validate();
    if (datasets.size() < 2)
      throw std::invalid_argument("FederatedTrainer: >= 2 clients required");
    std::sort(datasets.begin(), datasets.end(),
              [](const ClientDataset& a, const ClientDataset& b) {
                return a.user < b.user;
              });
    env_.alpha = cfg_.alpha;
    env_.grid = cfg_.grid;
    policy_opt_ = nn::AdamState(policy_.params(), cfg_.policy.adam);
    clients_.reserve(datasets.size());
    std::size_t index = 1;
    for (auto& d : datasets) {
      registry_.tag_dataset(d);
      const UserId user = d.user;
      ClientSim c{std::move(d),
                  PersonalDiscriminator(user, cfg_.grid, cfg_.disc,
                                        rng_.split(StreamPurpose::kInit, index)),
                  nn::AdamState()};
      c.opt = nn::AdamState(c.disc.params(), cfg_.disc.adam);
      clients_.push_back(std::move(c));
      ++index;
    }
  }

  RoundReport run_round() {
    const int r = rounds_done_;
    RngStream round_rng = rng_.split(StreamPurpose::kRound, r);

    // (a) synthetic batch for discriminator training
    std::vector<Trajectory> disc_batch(cfg_.batch_trajectories, Trajectory());
    std::vector<Rollout> disc_rollouts(cfg_.batch_trajectories);
    sample_batch(round_rng.split(StreamPurpose::kRollout, 0), &disc_batch,
                 &disc_rollouts);
    const std::string disc_payload =
        serialize(make_down_msg(r, disc_batch, nullptr));
    record(TracedMessage::Direction::kDown, r, -1, disc_payload);

    // (b) local discriminator updates, clients in parallel
    std::vector<char> failed(clients_.size(), 0);
    std::vector<double> disc_losses(clients_.size(), 0.0);
    parallel_for(clients_.size(), [&](std::size_t i) {
      ClientSim& c = clients_[i];
      try {
        ServerToClientMsg msg = parse_down(disc_payload);
        std::vector<Trajectory> negatives;
        negatives.reserve(msg.trajectories.size());
        for (const auto& t : msg.trajectories)
          negatives.emplace_back(-1, t.points);
        RngStream local = rng_.split(StreamPurpose::kClient, r,
                                     static_cast<std::uint64_t>(c.data.user));
        LocalTrainStatus status =
            train_local(c.disc, c.data, negatives, cfg_.disc.iterations,
                        cfg_.disc.batch, c.opt, local);
        if (status.skipped)
          failed[i] = 1;
        else if (!status.losses.empty())
          disc_losses[i] = status.losses.back();
      } catch (const std::exception&) {
        failed[i] = 1;
      }
    });

    // (c) fresh query batch; the server keeps the rollouts
    std::vector<Trajectory> query_batch(cfg_.batch_trajectories, Trajectory());
    std::vector<Rollout> query_rollouts(cfg_.batch_trajectories);
    sample_batch(round_rng.split(StreamPurpose::kQuery, 0), &query_batch,
                 &query_rollouts);
    const std::string query_payload =
        serialize(make_down_msg(r, query_batch, &query_rollouts));
    record(TracedMessage::Direction::kDown, r, -1, query_payload);

    // (d) clients score every (state, action) pair of the query batch
    const int pairs_per_traj = cfg_.episode_steps;
    const int total_pairs = pairs_per_traj * cfg_.batch_trajectories;
    std::vector<std::vector<double>> client_scores(clients_.size());
    parallel_for(clients_.size(), [&](std::size_t i) {
      if (failed[i]) return;
      ClientSim& c = clients_[i];
      try {
        ServerToClientMsg msg = parse_down(query_payload);
        ClientToServerMsg up;
        up.round = r;
        std::vector<double> scores(total_pairs, 0.0);
        int idx = 0;
        for (const auto& t : msg.trajectories) {
          Trajectory traj(-1, t.points);
          std::vector<State> states = prefix_states(traj, t.home);
          for (std::size_t k = 0; k < states.size(); ++k) {
            StateFeatures f =
                featurize(states[k], cfg_.disc.feat, cfg_.grid);
            scores[idx] = c.disc.score_features(f, t.actions[k]);
            up.scores.emplace_back(idx, scores[idx]);
            ++idx;
          }
        }
        std::string payload = serialize(up);
        record(TracedMessage::Direction::kUp, r, c.data.user, payload);
        ClientToServerMsg parsed = parse_up(payload);
        std::vector<double> received(total_pairs, 0.0);
        for (const auto& [pair_idx, score] : parsed.scores)
          received[pair_idx] = score;
        client_scores[i] = std::move(received);
      } catch (const std::exception&) {
        failed[i] = 1;
      }
    });

    int active = 0;
    for (std::size_t i = 0; i < clients_.size(); ++i)
      if (!failed[i]) ++active;
    if (active < 2)
      throw std::runtime_error("run_round: fewer than 2 active clients");
    DPBudget budget = cfg_.budget.with_num_users(active);

    // (e) aggregate per-pair scores in ascending user order
    std::vector<std::vector<double>> rows(total_pairs);
    for (int p = 0; p < total_pairs; ++p) {
      rows[p].reserve(active);
      for (std::size_t i = 0; i < clients_.size(); ++i)
        if (!failed[i]) rows[p].push_back(client_scores[i][p]);
    }
    RewardBatch rewards =
        aggregate_batch(std::move(rows), cfg_.beta, budget, round_rng);

    RoundReport report;
    report.round = r;
    report.active_clients = active;
    report.reward_queries = total_pairs;
    report.epsilon = budget.epsilon;
    report.lambda_mean = budget.lambda_mean;
    report.lambda_var = budget.lambda_var;
    for (const RewardEntry& e : rewards) {
      report.mean_reward += e.compensated;
      report.mean_xi += e.xi;
    }
    report.mean_reward /= rewards.size();
    report.mean_xi /= rewards.size();
    double loss_sum = 0;
    for (std::size_t i = 0; i < clients_.size(); ++i)
      if (!failed[i]) loss_sum += disc_losses[i];
    report.mean_disc_loss = loss_sum / active;

    // (f) PPO step on the compensated rewards
    for (int j = 0; j < cfg_.batch_trajectories; ++j) {
      for (int t = 0; t < pairs_per_traj; ++t)
        query_rollouts[j].steps[t].reward =
            rewards[j * pairs_per_traj + t].compensated;
      compute_advantages(query_rollouts[j], cfg_.policy.gamma,
                         cfg_.policy.gae_lambda);
    }
    RngStream shuffle = round_rng.split(StreamPurpose::kShuffle, 0);
    report.ppo = ppo_update(policy_, query_rollouts, policy_opt_, shuffle);

    ++rounds_done_;
    return report;
  }

  std::vector<RoundReport> train(
      const std::function<void(const RoundReport&)>& on_round = {}) {
    std::vector<RoundReport> history;
    history.reserve(cfg_.num_rounds);
    for (int i = 0; i < cfg_.num_rounds; ++i) {
      history.push_back(run_round());
      if (on_round) on_round(history.back());
    }
    return history;
  }

  PolicyNet& policy() { return policy_; }
  const PolicyNet& policy() const { return policy_; }
  const TransitionConfig& env() const { return env_; }
  const RealPointRegistry& registry() const { return registry_; }
  std::vector<const PersonalDiscriminator*> discriminators() const {
    std::vector<const PersonalDiscriminator*> out;
    out.reserve(clients_.size());
    for (const auto& c : clients_) out.push_back(&c.disc);
    return out;
  }
  int rounds_done() const { return rounds_done_; }

 private:
  struct ClientSim {
    ClientDataset data;
    PersonalDiscriminator disc;
    nn::AdamState opt;
  };

  void sample_batch(const RngStream& batch_rng, std::vector<Trajectory>* trajs,
                    std::vector<Rollout>* rollouts) {
    parallel_for(trajs->size(), [&](std::size_t i) {
      RngStream r = batch_rng.split(StreamPurpose::kRollout, i + 1);
      LocationId home =
          static_cast<LocationId>(r.uniform_int(cfg_.grid.num_cells()));
      State start = State::initial({0, home}, home);
      auto [traj, rollout] =
          sample_trajectory(policy_, env_, start, cfg_.episode_steps, r, -1);
      (*trajs)[i] = std::move(traj);
      (*rollouts)[i] = std::move(rollout);
    });
  }

  ServerToClientMsg make_down_msg(int round,
                                  const std::vector<Trajectory>& batch,
                                  const std::vector<Rollout>* rollouts) const {
    ServerToClientMsg msg;
    msg.round = round;
    msg.is_query = rollouts != nullptr;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      SyntheticTrajectoryMsg t;
      t.home = batch[j].points().front().loc;
      t.points = batch[j].points();
      if (rollouts) {
        t.actions.reserve((*rollouts)[j].steps.size());
        for (const auto& s : (*rollouts)[j].steps) t.actions.push_back(s.action);
      }
      msg.trajectories.push_back(std::move(t));
    }
    return msg;
  }

  void record(TracedMessage::Direction dir, int round, UserId client,
              const std::string& payload) {
    if (!trace_) return;
    std::lock_guard<std::mutex> lock(trace_mu_);
    trace_->messages.push_back(TracedMessage{dir, round, client, payload});
  }

  TrainerConfig cfg_;
  RngStream rng_;
  MessageTrace* trace_;
  TransitionConfig env_;
  PolicyNet policy_;
  nn::AdamState policy_opt_;
  std::vector<ClientSim> clients_;
  RealPointRegistry registry_;
  int rounds_done_ = 0;
  std::mutex trace_mu_;
};

// Runs the whole federated loop and returns the trained trainer (policy,
// discriminators) plus per-round history.
inline std::pair<std::unique_ptr<FederatedTrainer>, std::vector<RoundReport>>
train(TrainerConfig cfg, std::vector<ClientDataset> clients,
      MessageTrace* trace = nullptr,
      const std::function<void(const RoundReport&)>& on_round = {}) {
  auto trainer = std::make_unique<FederatedTrainer>(std::move(cfg),
                                                    std::move(clients), trace);
  std::vector<RoundReport> history = trainer->train(on_round);
  return {std::move(trainer), std::move(history)};
}

}  // namespace fedtraj

#endif  // FEDTRAJ_ORCHESTRATOR_HPP_
