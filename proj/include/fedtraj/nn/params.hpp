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

#ifndef FEDTRAJ_NN_PARAMS_HPP_
#define FEDTRAJ_NN_PARAMS_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedtraj/nn/tensor.hpp"

namespace fedtraj::nn {

// Named parameters with mirrored gradient slots. Iteration is in sorted
// name order, which fixes the update and serialization order.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor init) {
    if (values_.count(name))
      throw std::invalid_argument("ParameterSet: duplicate name " + name);
    grads_[name] = Tensor::zeros_like(init);
    values_[name] = std::move(init);
  }

  bool has(const std::string& name) const { return values_.count(name) > 0; }

  Tensor& value(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end())
      throw std::invalid_argument("ParameterSet: unknown name " + name);
    return it->second;
  }
  const Tensor& value(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end())
      throw std::invalid_argument("ParameterSet: unknown name " + name);
    return it->second;
  }
  Tensor& grad(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end())
      throw std::invalid_argument("ParameterSet: unknown name " + name);
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, g] : grads_) g.v.assign(g.v.size(), 0.0);
  }

  // Adds `other`'s gradient slots into this set's, entry by entry.
  void accumulate_grads(const ParameterSet& other) {
    for (auto& [name, g] : grads_) {
      const Tensor& og = other.grads_.at(name);
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += og.v[i];
    }
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [name, t] : values_) out.push_back(name);
    return out;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : values_) n += t.v.size();
    return n;
  }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 private:
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> grads_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer state: per-parameter first/second moment
// accumulators plus the step counter.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParameterSet& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& [name, t] : params) {
      m_[name] = Tensor::zeros_like(t);
      v_[name] = Tensor::zeros_like(t);
    }
  }

  // One bias-corrected update from the gradients stored in `params`.
  void step(ParameterSet& params) {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (auto& [name, value] : params) {
      Tensor& g = params.grad(name);
      Tensor& m = m_.at(name);
      Tensor& v = v_.at(name);
      if (!value.same_shape(g))
        throw std::invalid_argument("AdamState: gradient shape mismatch");
      for (std::size_t i = 0; i < value.v.size(); ++i) {
        m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * g.v[i];
        v.v[i] = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * g.v[i] * g.v[i];
        double mhat = m.v[i] / bc1;
        double vhat = v.v[i] / bc2;
        value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
  std::int64_t step_ = 0;
};

// Applies one optimizer step using the gradients currently held by `params`.
inline void optimizer_step(ParameterSet& params, AdamState& state) {
  state.step(params);
}

}  // namespace fedtraj::nn

#endif  // FEDTRAJ_NN_PARAMS_HPP_
