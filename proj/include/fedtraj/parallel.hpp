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

#ifndef FEDTRAJ_PARALLEL_HPP_
#define FEDTRAJ_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fedtraj {

inline unsigned worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(chunk_index, begin, end) over `num_chunks` contiguous index ranges
// of [0, n). Chunk boundaries depend only on (n, num_chunks), so callers can
// reduce per-chunk results in chunk order and get machine-independent,
// scheduling-independent floating-point sums.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t num_chunks, Fn&& fn) {
  if (n == 0) return;
  num_chunks = std::max<std::size_t>(1, std::min(num_chunks, n));
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  ranges.reserve(num_chunks);
  std::size_t base = n / num_chunks, rem = n % num_chunks, begin = 0;
  for (std::size_t c = 0; c < num_chunks; ++c) {
    std::size_t len = base + (c < rem ? 1 : 0);
    ranges.emplace_back(begin, begin + len);
    begin += len;
  }

  unsigned threads = std::min<std::size_t>(worker_count(), num_chunks);
  if (threads <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c)
      fn(c, ranges[c].first, ranges[c].second);
    return;
  }

  std::mutex error_mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t c = t; c < num_chunks; c += threads) {
        try {
          fn(c, ranges[c].first, ranges[c].second);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Convenience wrapper: fn(i) for i in [0, n), chunked over the default
// worker count. Safe only for independent items.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  parallel_chunks(n, worker_count() * 2, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace fedtraj

#endif  // FEDTRAJ_PARALLEL_HPP_
