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

#ifndef FEDTRAJ_NN_TENSOR_HPP_
#define FEDTRAJ_NN_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fedtraj::nn {

// Dense row-major tensor of 64-bit floats. Rank 1 or 2 in practice.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::initializer_list<std::size_t> s, std::vector<double> values)
      : shape(s), v(std::move(values)) {
    if (v.size() != numel())
      throw std::invalid_argument("Tensor: values do not match shape");
  }

  static Tensor zeros(std::initializer_list<std::size_t> s) {
    Tensor t;
    t.shape = s;
    t.v.assign(t.numel(), 0.0);
    return t;
  }
  static Tensor zeros_like(const Tensor& other) {
    Tensor t;
    t.shape = other.shape;
    t.v.assign(other.v.size(), 0.0);
    return t;
  }
  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

}  // namespace fedtraj::nn

#endif  // FEDTRAJ_NN_TENSOR_HPP_
