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

#ifndef FEDTRAJ_ATTACKS_HPP_
#define FEDTRAJ_ATTACKS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedtraj/core.hpp"
#include "fedtraj/discriminator.hpp"
#include "fedtraj/nn/graph.hpp"
#include "fedtraj/parallel.hpp"
#include "fedtraj/random.hpp"

namespace fedtraj {

// Fraction of trajectory a's points that b matches at the same time slot;
// the denominator is a's length.
inline double overlap_rate(const Trajectory& a, const Trajectory& b) {
  if (a.empty()) throw std::invalid_argument("overlap_rate: empty trajectory");
  std::map<SlotIndex, LocationId> b_at;
  for (const auto& p : b.points()) b_at[p.slot] = p.loc;
  int matches = 0;
  for (const auto& p : a.points()) {
    auto it = b_at.find(p.slot);
    if (it != b_at.end() && it->second == p.loc) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(a.size());
}

struct UniquenessResult {
  struct Match {
    std::size_t synthetic_index = 0;
    double rate = 0;
  };
  std::vector<Match> per_real;  // aligned with the real input set
  double mean_rate = 0;
  double max_rate = 0;
};

// Brute-force: for each real trajectory, the best synthetic match by
// overlap rate.
inline UniquenessResult uniqueness_test(const std::vector<Trajectory>& real,
                                        const std::vector<Trajectory>& synthetic) {
  if (real.empty() || synthetic.empty())
    throw std::invalid_argument("uniqueness_test: empty input set");
  UniquenessResult out;
  out.per_real.resize(real.size());
  parallel_for(real.size(), [&](std::size_t i) {
    UniquenessResult::Match best;
    for (std::size_t j = 0; j < synthetic.size(); ++j) {
      double r = overlap_rate(real[i], synthetic[j]);
      if (r > best.rate || (r == best.rate && j < best.synthetic_index)) {
        best.rate = r;
        best.synthetic_index = j;
      }
    }
    out.per_real[i] = best;
  });
  for (const auto& m : out.per_real) {
    out.mean_rate += m.rate;
    out.max_rate = std::max(out.max_rate, m.rate);
  }
  out.mean_rate /= out.per_real.size();
  return out;
}

using RewardOracle = std::function<double(const State&, Action)>;

inline constexpr int kMiaFeatureCount = 9;
inline constexpr const char* kMiaFeatureDescription =
    "mean, stddev, min, max, q10, q25, q50, q75, q90 of per-pair rewards";

// Summarizes the per-pair reward sequence of one trajectory into a fixed
// 9-entry vector: mean, population stddev, min, max, and the 0.1/0.25/0.5/
// 0.75/0.9 quantiles (sorted, linear interpolation).
inline std::vector<double> mia_features(const Trajectory& trajectory,
                                        const RewardOracle& oracle,
                                        int slots_per_day) {
  if (trajectory.size() < 2)
    throw std::invalid_argument("mia_features: trajectory length >= 2");
  const LocationId home = infer_home({trajectory}, slots_per_day);
  std::vector<double> rewards;
  for (const auto& [s, a] : extract_pairs(trajectory, home))
    rewards.push_back(oracle(s, a));

  const std::size_t n = rewards.size();
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;

  std::vector<double> sorted = rewards;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    double pos = p * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    return lo + 1 < n ? sorted[lo] * (1 - frac) + sorted[lo + 1] * frac
                      : sorted[lo];
  };
  return {mean,          std::sqrt(var),  sorted.front(),
          sorted.back(), quantile(0.10),  quantile(0.25),
          quantile(0.50), quantile(0.75), quantile(0.90)};
}

struct MIAResult {
  std::vector<double> fold_accuracies;  // five stratified folds
  double mean_accuracy = 0;
  std::string feature_description = kMiaFeatureDescription;
};

namespace detail {

// Regularized logistic regression by full-batch gradient descent on
// standardized features. Returns accuracy on the test split.
inline double logistic_fold_accuracy(const std::vector<std::vector<double>>& x_train,
                                     const std::vector<double>& y_train,
                                     const std::vector<std::vector<double>>& x_test,
                                     const std::vector<double>& y_test) {
  const std::size_t n = x_train.size(), d = x_train[0].size();
  std::vector<double> mean(d, 0), sd(d, 0);
  for (const auto& row : x_train)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (const auto& row : x_train)
    for (std::size_t j = 0; j < d; ++j)
      sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(n));
  auto standardize = [&](const std::vector<std::vector<double>>& rows) {
    nn::Tensor x = nn::Tensor::zeros({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        x.v[i * d + j] = (rows[i][j] - mean[j]) / (sd[j] > 0 ? sd[j] : 1.0);
    return x;
  };

  nn::ParameterSet ps;
  ps.add("w", nn::Tensor::zeros({d, 1}));
  ps.add("b", nn::Tensor::zeros({1, 1}));
  nn::Tensor x = standardize(x_train);
  nn::Tensor y({n, 1}, y_train);

  const int iterations = 300;
  const double lr = 0.5, l2 = 1e-3;
  for (int it = 0; it < iterations; ++it) {
    ps.zero_grads();
    nn::Graph g;
    nn::VarId z = g.add_row(g.matmul(g.input(x), g.param(ps, "w")),
                            g.param(ps, "b"));
    // BCE with logits: mean(softplus(z) - y*z) + l2*|w|^2
    nn::VarId bce = g.mean(g.sub(g.softplus(z), g.hadamard(g.input(y), z)));
    nn::VarId w = g.param(ps, "w");
    nn::VarId loss = g.add(bce, g.scale(g.sum(g.hadamard(w, w)), l2));
    g.backward(loss);
    for (auto& [name, value] : ps) {
      nn::Tensor& grad = ps.grad(name);
      for (std::size_t i = 0; i < value.v.size(); ++i)
        value.v[i] -= lr * grad.v[i];
    }
  }

  nn::Tensor xt = standardize(x_test);
  int correct = 0;
  const nn::Tensor& w = ps.value("w");
  const double b = ps.value("b").v[0];
  for (std::size_t i = 0; i < x_test.size(); ++i) {
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += xt.v[i * d + j] * w.v[j];
    const double predicted = z > 0 ? 1.0 : 0.0;
    if (predicted == y_test[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x_test.size());
}

}  // namespace detail

// White-box membership inference: per-trajectory reward features, a
// logistic-regression classifier, stratified five-fold cross-validation.
inline MIAResult membership_inference(const std::vector<Trajectory>& members,
                                      const std::vector<Trajectory>& non_members,
                                      const RewardOracle& oracle,
                                      int slots_per_day,
                                      const RngStream& fold_rng) {
  if (members.size() != non_members.size())
    throw std::invalid_argument("membership_inference: class sizes must match");
  if (members.size() < 10)
    throw std::invalid_argument("membership_inference: >= 10 per class");

  // Sequential featurization: the oracle may hold a noise stream whose
  // draws must be assigned to queries in a reproducible order.
  const std::size_t n = members.size();
  std::vector<std::vector<double>> feats(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const Trajectory& t = i < n ? members[i] : non_members[i - n];
    feats[i] = mia_features(t, oracle, slots_per_day);
  }

  // Stratified fold assignment: shuffle each class, then round-robin.
  constexpr int kFolds = 5;
  RngStream rng = fold_rng.split(StreamPurpose::kFolds, 0);
  std::vector<int> fold(2 * n);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = cls * n + i;
    for (std::size_t i = n; i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    for (std::size_t i = 0; i < n; ++i) fold[idx[i]] = static_cast<int>(i % kFolds);
  }

  MIAResult result;
  result.fold_accuracies.resize(kFolds);
  for (int f = 0; f < kFolds; ++f) {
    std::vector<std::vector<double>> x_train, x_test;
    std::vector<double> y_train, y_test;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      const double label = i < n ? 1.0 : 0.0;
      if (fold[i] == f) {
        x_test.push_back(feats[i]);
        y_test.push_back(label);
      } else {
        x_train.push_back(feats[i]);
        y_train.push_back(label);
      }
    }
    result.fold_accuracies[f] =
        detail::logistic_fold_accuracy(x_train, y_train, x_test, y_test);
  }
  for (double a : result.fold_accuracies) result.mean_accuracy += a;
  result.mean_accuracy /= kFolds;
  return result;
}

}  // namespace fedtraj

#endif  // FEDTRAJ_ATTACKS_HPP_
