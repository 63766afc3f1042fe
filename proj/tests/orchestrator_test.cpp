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

#include "fedtraj/orchestrator.hpp"

#include <gtest/gtest.h>

#include "fedtraj/io.hpp"

namespace fedtraj {
namespace {

TrainerConfig tiny_trainer_config(std::uint64_t seed = 1) {
  TrainerConfig cfg;
  cfg.grid.width = 6;
  cfg.grid.height = 6;
  cfg.grid.cell_size = 500.0;
  cfg.alpha = 0.55;

  FeaturizerConfig feat;
  feat.window = 4;
  feat.loc_dim = 6;
  feat.tod_dim = 3;
  feat.act_dim = 3;
  feat.attn_dim = 8;
  feat.mlp_dim = 8;
  feat.slots_per_day = 12;

  cfg.policy.feat = feat;
  cfg.policy.adam.lr = 1e-3;
  cfg.policy.epochs = 2;
  cfg.policy.minibatch = 64;
  cfg.disc.feat = feat;
  cfg.disc.adam.lr = 2e-3;
  cfg.disc.iterations = 2;
  cfg.disc.batch = 16;

  cfg.num_rounds = 2;
  cfg.batch_trajectories = 4;
  cfg.episode_steps = 11;
  cfg.beta = 1.0;
  cfg.budget = DPBudget::noise_free(2);
  cfg.master_seed = seed;
  return cfg;
}

std::vector<ClientDataset> tiny_clients(int n, const TrainerConfig& cfg,
                                        std::uint64_t seed) {
  TransitionConfig env;
  env.alpha = cfg.alpha;
  env.grid = cfg.grid;
  return synth_ground_truth(n, 2, 1, env, EprBehavior{},
                            cfg.policy.feat.slots_per_day, RngStream(seed));
}

TEST(Messages, DownMessageRoundTrips) {
  ServerToClientMsg msg;
  msg.round = 3;
  msg.is_query = true;
  msg.trajectories.push_back(
      {7, {{0, 7}, {1, 9}, {2, 9}}, {3, 0}});
  ServerToClientMsg back = parse_down(serialize(msg));
  EXPECT_EQ(back.round, 3);
  EXPECT_TRUE(back.is_query);
  ASSERT_EQ(back.trajectories.size(), 1u);
  EXPECT_EQ(back.trajectories[0].home, 7);
  EXPECT_EQ(back.trajectories[0].points,
            (std::vector<SpatioTemporalPoint>{{0, 7}, {1, 9}, {2, 9}}));
  EXPECT_EQ(back.trajectories[0].actions, (std::vector<int>{3, 0}));
}

TEST(Messages, UpMessageRoundTrips) {
  ClientToServerMsg msg;
  msg.round = 5;
  msg.scores = {{0, 0.25}, {7, 0.75}};
  ClientToServerMsg back = parse_up(serialize(msg));
  EXPECT_EQ(back.round, 5);
  EXPECT_EQ(back.scores, msg.scores);
}

TEST(RunRound, SmokeContractAllFieldsFinite) {
  TrainerConfig cfg = tiny_trainer_config();
  cfg.num_rounds = 1;
  FederatedTrainer trainer(cfg, tiny_clients(2, cfg, 42));
  RoundReport r = trainer.run_round();
  EXPECT_EQ(r.round, 0);
  EXPECT_EQ(r.active_clients, 2);
  EXPECT_EQ(r.reward_queries, cfg.batch_trajectories * cfg.episode_steps);
  EXPECT_TRUE(std::isfinite(r.mean_reward));
  EXPECT_TRUE(std::isfinite(r.mean_xi));
  EXPECT_TRUE(std::isfinite(r.mean_disc_loss));
  ASSERT_FALSE(r.ppo.empty());
  for (const auto& e : r.ppo) {
    EXPECT_TRUE(std::isfinite(e.policy_loss));
    EXPECT_TRUE(std::isfinite(e.value_loss));
    EXPECT_TRUE(std::isfinite(e.entropy));
  }
}

TEST(RunRound, DeterministicGivenMasterSeed) {
  auto run = [&]() {
    TrainerConfig cfg = tiny_trainer_config(99);
    FederatedTrainer trainer(cfg, tiny_clients(3, cfg, 7));
    std::vector<RoundReport> history = trainer.train();
    return std::make_pair(history, trainer.policy().params().value("pi.act.w").v);
  };
  auto [h1, p1] = run();
  auto [h2, p2] = run();
  ASSERT_EQ(h1.size(), h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) {
    EXPECT_EQ(h1[i].mean_reward, h2[i].mean_reward);
    EXPECT_EQ(h1[i].mean_xi, h2[i].mean_xi);
    EXPECT_EQ(h1[i].mean_disc_loss, h2[i].mean_disc_loss);
  }
  EXPECT_EQ(p1, p2);
}

TEST(RunRound, ExcludesDegenerateClientAndShrinksBudget) {
  TrainerConfig cfg = tiny_trainer_config();
  cfg.budget = DPBudget::mean_only(1.0, 2);  // |U| recomputed per round
  auto clients = tiny_clients(3, cfg, 8);
  // Replace one client's data with single-point trajectories: no pairs.
  ClientDataset degenerate;
  degenerate.user = 77;
  degenerate.home = 0;
  degenerate.trajectories = {Trajectory(77, {{0, 0}})};
  clients.push_back(degenerate);
  FederatedTrainer trainer(cfg, std::move(clients));
  RoundReport r = trainer.run_round();
  EXPECT_EQ(r.active_clients, 3);
  EXPECT_DOUBLE_EQ(r.lambda_mean, 1.0 / (1.0 * 3));
}

TEST(RunRound, ThrowsWhenFewerThanTwoClientsRemain) {
  TrainerConfig cfg = tiny_trainer_config();
  auto clients = tiny_clients(1, cfg, 9);
  ClientDataset degenerate;
  degenerate.user = 50;
  degenerate.home = 0;
  degenerate.trajectories = {Trajectory(50, {{0, 0}})};
  clients.push_back(degenerate);
  FederatedTrainer trainer(cfg, std::move(clients));
  EXPECT_THROW(trainer.run_round(), std::runtime_error);
}

TEST(Train, ZeroRoundsReturnsInitializedPolicy) {
  TrainerConfig cfg = tiny_trainer_config(5);
  cfg.num_rounds = 0;
  auto clients = tiny_clients(2, cfg, 10);
  FederatedTrainer a(cfg, clients);
  auto history = a.train();
  EXPECT_TRUE(history.empty());
  FederatedTrainer b(cfg, clients);  // untouched twin
  EXPECT_EQ(a.policy().params().value("enc.in.w").v,
            b.policy().params().value("enc.in.w").v);
}

TEST(Train, HistoryLengthEqualsNumRounds) {
  TrainerConfig cfg = tiny_trainer_config(6);
  cfg.num_rounds = 3;
  FederatedTrainer trainer(cfg, tiny_clients(2, cfg, 11));
  EXPECT_EQ(trainer.train().size(), 3u);
}

// Privacy locality, functionally: one client's local training result cannot
// depend on any other client's data within a round.
TEST(Train, ClientDiscriminatorIndependentOfOtherClientsData) {
  TrainerConfig cfg = tiny_trainer_config(12);
  cfg.num_rounds = 1;
  auto clients1 = tiny_clients(3, cfg, 13);
  auto clients2 = clients1;
  // Swap out every other client's data for freshly generated sets.
  auto other = tiny_clients(3, cfg, 999);
  clients2[1].trajectories = other[1].trajectories;
  clients2[1].home = other[1].home;
  clients2[2].trajectories = other[2].trajectories;
  clients2[2].home = other[2].home;

  FederatedTrainer t1(cfg, clients1);
  FederatedTrainer t2(cfg, clients2);
  t1.run_round();
  t2.run_round();
  const UserId first_user = clients1[0].user;
  const PersonalDiscriminator* d1 = nullptr;
  const PersonalDiscriminator* d2 = nullptr;
  for (const auto* d : t1.discriminators())
    if (d->user() == first_user) d1 = d;
  for (const auto* d : t2.discriminators())
    if (d->user() == first_user) d2 = d;
  ASSERT_NE(d1, nullptr);
  ASSERT_NE(d2, nullptr);
  for (const auto& name : d1->params().names())
    EXPECT_EQ(d1->params().value(name).v, d2->params().value(name).v) << name;
}

TEST(MessageAudit, NormalTracePasses) {
  TrainerConfig cfg = tiny_trainer_config(14);
  MessageTrace trace;
  FederatedTrainer trainer(cfg, tiny_clients(3, cfg, 15), &trace);
  trainer.train();
  EXPECT_GT(trace.messages.size(), 0u);
  AuditResult audit = message_audit(trace, trainer.registry());
  EXPECT_TRUE(audit.pass) << (audit.violations.empty()
                                  ? ""
                                  : audit.violations.front());
}

TEST(MessageAudit, OnlyScoreFloatsUpstreamPasses) {
  RealPointRegistry registry;
  registry.tag(3, 4);
  MessageTrace trace;
  ClientToServerMsg up;
  up.round = 0;
  up.scores = {{0, 0.123}, {1, 0.456}};
  trace.messages.push_back({TracedMessage::Direction::kUp, 0, 1,
                            serialize(up)});
  EXPECT_TRUE(message_audit(trace, registry).pass);
}

TEST(MessageAudit, CorruptedTraceWithRealPointFails) {
  TrainerConfig cfg = tiny_trainer_config(16);
  MessageTrace trace;
  FederatedTrainer trainer(cfg, tiny_clients(2, cfg, 17), &trace);
  trainer.run_round();
  // Embed one real (slot, loc) pair into an upstream payload.
  const auto& datasets = trainer.registry();
  nlohmann::json j = nlohmann::json::parse(trace.messages.back().payload);
  bool is_up = trace.messages.back().direction == TracedMessage::Direction::kUp;
  ASSERT_TRUE(is_up);
  // Find some tagged point by scanning a known client trajectory range.
  SpatioTemporalPoint leaked{};
  bool found = false;
  for (SlotIndex slot = 0; slot < 12 && !found; ++slot)
    for (LocationId loc = 0; loc < 36 && !found; ++loc)
      if (datasets.contains(slot, loc)) {
        leaked = {slot, loc};
        found = true;
      }
  ASSERT_TRUE(found);
  j["scores"].push_back({leaked.slot, leaked.loc});
  trace.messages.back().payload = j.dump();
  AuditResult audit = message_audit(trace, trainer.registry());
  EXPECT_FALSE(audit.pass);
}

TEST(MessageAudit, SchemaViolationFails) {
  RealPointRegistry registry;
  MessageTrace trace;
  // Upstream message smuggling an extra field.
  trace.messages.push_back(
      {TracedMessage::Direction::kUp, 0, 1,
       R"({"v":1,"round":0,"scores":[[0,0.5]],"extra":"x"})"});
  EXPECT_FALSE(message_audit(trace, registry).pass);
}

// Training-signal sanity oracle: with a noise-free budget and EPR-process
// clients, the mean compensated reward trends up in most seeds.
TEST(Train, MeanRewardTrendsUpInMostSeeds) {
  int improved = 0;
  for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
    TrainerConfig cfg = tiny_trainer_config(seed);
    cfg.num_rounds = 24;
    cfg.disc.iterations = 2;
    FederatedTrainer trainer(cfg, tiny_clients(6, cfg, seed * 7));
    auto history = trainer.train();
    auto window_mean = [&](std::size_t begin) {
      double m = 0;
      for (std::size_t i = begin; i < begin + 10; ++i)
        m += history[i].mean_reward;
      return m / 10;
    };
    if (window_mean(history.size() - 10) >= window_mean(0)) ++improved;
  }
  EXPECT_GE(improved, 4);
}

}  // namespace
}  // namespace fedtraj
