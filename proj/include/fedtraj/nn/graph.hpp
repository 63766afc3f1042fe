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

#ifndef FEDTRAJ_NN_GRAPH_HPP_
#define FEDTRAJ_NN_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedtraj/nn/params.hpp"
#include "fedtraj/nn/tensor.hpp"

namespace fedtraj::nn {

using VarId = std::size_t;

// Reverse-mode tape. Each op appends a node holding the forward value and a
// closure that scatters the node's output gradient to its parents. One graph
// per forward pass; parameter tensors are referenced, not copied, and must
// stay unchanged while the graph is alive.
class Graph {
 public:
  VarId input(Tensor t) { return push(std::move(t)); }

  VarId scalar(double x) { return push(Tensor::scalar(x)); }

  // Leaf referencing external storage; backward() accumulates into `sink`
  // when it is non-null.
  VarId leaf(const Tensor* value, Tensor* sink) {
    VarId id = nodes_.size();
    nodes_.push_back(Node{});
    nodes_[id].external = value;
    nodes_[id].sink = sink;
    return id;
  }

  // Leaf bound to a named parameter; backward() accumulates into its
  // gradient slot.
  VarId param(ParameterSet& ps, const std::string& name) {
    return leaf(&ps.value(name), &ps.grad(name));
  }

  // Read-only parameter leaf for inference passes.
  VarId frozen(const ParameterSet& ps, const std::string& name) {
    return leaf(&ps.value(name), nullptr);
  }

  const Tensor& value(VarId id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.val;
  }

  // Valid after backward().
  const Tensor& grad(VarId id) const { return grads_[id]; }

  // --- arithmetic ---

  VarId matmul(VarId a, VarId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.shape.size() != 2 || B.shape.size() != 2 || A.cols() != B.rows())
      throw std::invalid_argument("matmul: incompatible shapes");
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = &A.v[i * k];
      double* crow = &C.v[i * n];
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = &B.v[p * n];
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, b, m, k, n]() {
      const Tensor& G = grads_[id];
      const Tensor& A = value(a);
      const Tensor& B = value(b);
      Tensor& GA = grads_[a];
      Tensor& GB = grads_[b];
      // GA += G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0;
          for (std::size_t j = 0; j < n; ++j) s += G.v[i * n + j] * B.v[p * n + j];
          GA.v[i * k + p] += s;
        }
      // GB += A^T * G
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          const double av = A.v[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j)
            GB.v[p * n + j] += av * G.v[i * n + j];
        }
    };
    return id;
  }

  VarId transpose(VarId a) {
    const Tensor& A = value(a);
    if (A.shape.size() != 2) throw std::invalid_argument("transpose: rank-2 only");
    const std::size_t m = A.rows(), n = A.cols();
    Tensor T = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) T.v[j * m + i] = A.v[i * n + j];
    VarId id = push(std::move(T));
    nodes_[id].back = [this, id, a, m, n]() {
      const Tensor& G = grads_[id];
      Tensor& GA = grads_[a];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) GA.v[i * n + j] += G.v[j * m + i];
    };
    return id;
  }

  VarId add(VarId a, VarId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] += B.v[i];
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& G = grads_[id];
      for (std::size_t i = 0; i < G.v.size(); ++i) {
        grads_[a].v[i] += G.v[i];
        grads_[b].v[i] += G.v[i];
      }
    };
    return id;
  }

  VarId sub(VarId a, VarId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] -= B.v[i];
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& G = grads_[id];
      for (std::size_t i = 0; i < G.v.size(); ++i) {
        grads_[a].v[i] += G.v[i];
        grads_[b].v[i] -= G.v[i];
      }
    };
    return id;
  }

  // a[m x n] + bias[1 x n], broadcast over rows.
  VarId add_row(VarId a, VarId bias) {
    const Tensor& A = value(a);
    const Tensor& B = value(bias);
    if (B.rows() != 1 || B.cols() != A.cols())
      throw std::invalid_argument("add_row: bias must be 1 x cols(a)");
    Tensor C = A;
    const std::size_t n = A.cols();
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) C.v[i * n + j] += B.v[j];
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, bias, n]() {
      const Tensor& G = grads_[id];
      Tensor& GA = grads_[a];
      Tensor& GB = grads_[bias];
      for (std::size_t i = 0; i < G.v.size(); ++i) GA.v[i] += G.v[i];
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) GB.v[j] += G.v[i * n + j];
    };
    return id;
  }

  VarId hadamard(VarId a, VarId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("hadamard: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] *= B.v[i];
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& G = grads_[id];
      const Tensor& A = value(a);
      const Tensor& B = value(b);
      for (std::size_t i = 0; i < G.v.size(); ++i) {
        grads_[a].v[i] += G.v[i] * B.v[i];
        grads_[b].v[i] += G.v[i] * A.v[i];
      }
    };
    return id;
  }

  VarId scale(VarId a, double c) {
    Tensor C = value(a);
    for (double& x : C.v) x *= c;
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, c]() {
      const Tensor& G = grads_[id];
      for (std::size_t i = 0; i < G.v.size(); ++i) grads_[a].v[i] += c * G.v[i];
    };
    return id;
  }

  VarId add_const(VarId a, double c) {
    Tensor C = value(a);
    for (double& x : C.v) x += c;
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      for (std::size_t i = 0; i < G.v.size(); ++i) grads_[a].v[i] += G.v[i];
    };
    return id;
  }

  VarId neg(VarId a) { return scale(a, -1.0); }

  // --- pointwise nonlinearities ---

  VarId tanh(VarId a) {
    Tensor C = value(a);
    for (double& x : C.v) x = std::tanh(x);
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      const Tensor& Y = nodes_[id].val;
      for (std::size_t i = 0; i < G.v.size(); ++i)
        grads_[a].v[i] += G.v[i] * (1.0 - Y.v[i] * Y.v[i]);
    };
    return id;
  }

  VarId sigmoid(VarId a) {
    Tensor C = value(a);
    for (double& x : C.v) x = stable_sigmoid(x);
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      const Tensor& Y = nodes_[id].val;
      for (std::size_t i = 0; i < G.v.size(); ++i)
        grads_[a].v[i] += G.v[i] * Y.v[i] * (1.0 - Y.v[i]);
    };
    return id;
  }

  VarId exp(VarId a) {
    Tensor C = value(a);
    for (double& x : C.v) x = std::exp(x);
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      const Tensor& Y = nodes_[id].val;
      for (std::size_t i = 0; i < G.v.size(); ++i)
        grads_[a].v[i] += G.v[i] * Y.v[i];
    };
    return id;
  }

  VarId log(VarId a) {
    Tensor C = value(a);
    for (double& x : C.v) x = std::log(x);
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      const Tensor& X = value(a);
      for (std::size_t i = 0; i < G.v.size(); ++i)
        grads_[a].v[i] += G.v[i] / X.v[i];
    };
    return id;
  }

  // log(1 + e^x), overflow-safe.
  VarId softplus(VarId a) {
    Tensor C = value(a);
    for (double& x : C.v)
      x = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      const Tensor& X = value(a);
      for (std::size_t i = 0; i < G.v.size(); ++i)
        grads_[a].v[i] += G.v[i] * stable_sigmoid(X.v[i]);
    };
    return id;
  }

  // --- reductions / selection ---

  VarId sum(VarId a) {
    double s = 0;
    for (double x : value(a).v) s += x;
    VarId id = push(Tensor::scalar(s));
    nodes_[id].back = [this, id, a]() {
      const double g = grads_[id].v[0];
      for (double& x : grads_[a].v) x += g;
    };
    return id;
  }

  VarId mean(VarId a) {
    const std::size_t n = value(a).v.size();
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
  }

  VarId pick(VarId a, std::size_t flat_index) {
    const Tensor& A = value(a);
    if (flat_index >= A.v.size()) throw std::invalid_argument("pick: index");
    VarId id = push(Tensor::scalar(A.v[flat_index]));
    nodes_[id].back = [this, id, a, flat_index]() {
      grads_[a].v[flat_index] += grads_[id].v[0];
    };
    return id;
  }

  VarId row(VarId a, std::size_t r) {
    const Tensor& A = value(a);
    const std::size_t n = A.cols();
    if (r >= A.rows()) throw std::invalid_argument("row: index");
    Tensor R = Tensor::zeros({1, n});
    std::copy_n(&A.v[r * n], n, R.v.begin());
    VarId id = push(std::move(R));
    nodes_[id].back = [this, id, a, r, n]() {
      const Tensor& G = grads_[id];
      for (std::size_t j = 0; j < n; ++j) grads_[a].v[r * n + j] += G.v[j];
    };
    return id;
  }

  // Embedding lookup: out[i] = table[ids[i]].
  VarId rows(VarId table, std::vector<int> ids) {
    const Tensor& T = value(table);
    const std::size_t n = T.cols();
    Tensor R = Tensor::zeros({ids.size(), n});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= T.rows())
        throw std::invalid_argument("rows: id out of range");
      std::copy_n(&T.v[static_cast<std::size_t>(ids[i]) * n], n, &R.v[i * n]);
    }
    VarId id = push(std::move(R));
    nodes_[id].back = [this, id, table, ids = std::move(ids), n]() {
      const Tensor& G = grads_[id];
      Tensor& GT = grads_[table];
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          GT.v[static_cast<std::size_t>(ids[i]) * n + j] += G.v[i * n + j];
    };
    return id;
  }

  // Concatenates same-row-count tensors along columns.
  VarId concat_cols(const std::vector<VarId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const std::size_t m = value(parts[0]).rows();
    std::size_t total = 0;
    for (VarId p : parts) {
      if (value(p).rows() != m)
        throw std::invalid_argument("concat_cols: row mismatch");
      total += value(p).cols();
    }
    Tensor C = Tensor::zeros({m, total});
    std::size_t off = 0;
    for (VarId p : parts) {
      const Tensor& P = value(p);
      const std::size_t n = P.cols();
      for (std::size_t i = 0; i < m; ++i)
        std::copy_n(&P.v[i * n], n, &C.v[i * total + off]);
      off += n;
    }
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, parts, m, total]() {
      const Tensor& G = grads_[id];
      std::size_t off = 0;
      for (VarId p : parts) {
        const std::size_t n = value(p).cols();
        Tensor& GP = grads_[p];
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            GP.v[i * n + j] += G.v[i * total + off + j];
        off += n;
      }
    };
    return id;
  }

  // --- softmax family ---

  // Softmax over the flattened tensor (used for 1 x n logit rows).
  VarId softmax_vec(VarId a) {
    Tensor C = value(a);
    softmax_inplace(C.v.data(), C.v.size());
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a]() {
      const Tensor& G = grads_[id];
      const Tensor& S = nodes_[id].val;
      double dot = 0;
      for (std::size_t i = 0; i < G.v.size(); ++i) dot += G.v[i] * S.v[i];
      for (std::size_t i = 0; i < G.v.size(); ++i)
        grads_[a].v[i] += S.v[i] * (G.v[i] - dot);
    };
    return id;
  }

  VarId log_softmax_vec(VarId a) {
    Tensor C = value(a);
    const std::size_t n = C.v.size();
    double mx = *std::max_element(C.v.begin(), C.v.end());
    double lse = 0;
    for (double x : C.v) lse += std::exp(x - mx);
    lse = mx + std::log(lse);
    for (double& x : C.v) x -= lse;
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, n]() {
      const Tensor& G = grads_[id];
      const Tensor& LS = nodes_[id].val;
      double gsum = 0;
      for (std::size_t i = 0; i < n; ++i) gsum += G.v[i];
      for (std::size_t i = 0; i < n; ++i)
        grads_[a].v[i] += G.v[i] - std::exp(LS.v[i]) * gsum;
    };
    return id;
  }

  // Row-wise softmax of an L x L score matrix where row i attends only to
  // columns 0..i; masked columns get probability 0.
  VarId causal_softmax_rows(VarId a) {
    const Tensor& A = value(a);
    if (A.rows() != A.cols())
      throw std::invalid_argument("causal_softmax_rows: square input required");
    const std::size_t L = A.rows();
    Tensor C = Tensor::zeros({L, L});
    for (std::size_t i = 0; i < L; ++i) {
      std::copy_n(&A.v[i * L], i + 1, &C.v[i * L]);
      softmax_inplace(&C.v[i * L], i + 1);
    }
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, L]() {
      const Tensor& G = grads_[id];
      const Tensor& S = nodes_[id].val;
      Tensor& GA = grads_[a];
      for (std::size_t i = 0; i < L; ++i) {
        double dot = 0;
        for (std::size_t j = 0; j <= i; ++j)
          dot += G.v[i * L + j] * S.v[i * L + j];
        for (std::size_t j = 0; j <= i; ++j)
          GA.v[i * L + j] += S.v[i * L + j] * (G.v[i * L + j] - dot);
      }
    };
    return id;
  }

  // --- clipping ---

  VarId min2(VarId a, VarId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("min2: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] = std::min(A.v[i], B.v[i]);
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& G = grads_[id];
      const Tensor& A = value(a);
      const Tensor& B = value(b);
      for (std::size_t i = 0; i < G.v.size(); ++i) {
        if (A.v[i] <= B.v[i])  // ties route to the first argument
          grads_[a].v[i] += G.v[i];
        else
          grads_[b].v[i] += G.v[i];
      }
    };
    return id;
  }

  // Clamp to [lo, hi]; gradient passes through inside the interval
  // (boundaries inclusive) and is zero outside.
  VarId clamp(VarId a, double lo, double hi) {
    const Tensor& A = value(a);
    Tensor C = A;
    for (double& x : C.v) x = std::clamp(x, lo, hi);
    VarId id = push(std::move(C));
    nodes_[id].back = [this, id, a, lo, hi]() {
      const Tensor& G = grads_[id];
      const Tensor& X = value(a);
      for (std::size_t i = 0; i < G.v.size(); ++i)
        if (X.v[i] >= lo && X.v[i] <= hi) grads_[a].v[i] += G.v[i];
    };
    return id;
  }

  // --- backward ---

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, then flushes
  // parameter-leaf gradients into their ParameterSet slots.
  void backward(VarId loss) {
    const Tensor& L = value(loss);
    if (L.numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    if (!std::isfinite(L.v[0]))
      throw std::runtime_error("backward: non-finite loss");
    grads_.clear();
    grads_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      grads_[i] = Tensor::zeros_like(value(i));
    grads_[loss].v[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].back) nodes_[i].back();
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].sink) {
        Tensor& sink = *nodes_[i].sink;
        for (std::size_t j = 0; j < sink.v.size(); ++j)
          sink.v[j] += grads_[i].v[j];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    const Tensor* external = nullptr;  // set for parameter leaves
    Tensor* sink = nullptr;            // gradient flush target
    std::function<void()> back;
  };

  VarId push(Tensor t) {
    VarId id = nodes_.size();
    nodes_.push_back(Node{});
    nodes_[id].val = std::move(t);
    return id;
  }

  static double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
  }

  static void softmax_inplace(double* x, std::size_t n) {
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::exp(x[i] - mx);
      total += x[i];
    }
    for (std::size_t i = 0; i < n; ++i) x[i] /= total;
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace fedtraj::nn

#endif  // FEDTRAJ_NN_GRAPH_HPP_
