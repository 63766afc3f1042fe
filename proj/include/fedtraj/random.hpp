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

#ifndef FEDTRAJ_RANDOM_HPP_
#define FEDTRAJ_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace fedtraj {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Also used to derive
// child-stream seeds, so the whole run is a pure function of one master seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream purposes. Every random decision in a run draws from a stream
// addressed as master.split(purpose, index...); the address, not call
// order, determines the values.
enum class StreamPurpose : std::uint64_t {
  kData = 1,      // ground-truth generation
  kInit = 2,      // parameter initialization
  kRollout = 3,   // policy episode sampling
  kNoise = 4,     // DP noise draws
  kFolds = 5,     // attack fold assignment
  kRound = 6,     // per-round substreams
  kClient = 7,    // per-client substreams
  kShuffle = 8,   // minibatch shuffling
  kQuery = 9,     // reward-query batch sampling
};

// Deterministic 64-bit stream with addressed splitting.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : base_(seed), state_(mix64(seed)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); Lemire multiply-shift, deterministic.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Child stream addressed by (purpose, index). Stable: the same address
  // from the same parent always yields the same stream, regardless of how
  // much the parent has been consumed.
  RngStream split(StreamPurpose purpose, std::uint64_t index = 0) const {
    std::uint64_t s = base_;
    s = mix64(s ^ (static_cast<std::uint64_t>(purpose) * 0xd1b54a32d192ed03ULL));
    s = mix64(s ^ (index * 0x8cb92ba72f3d8dd7ULL));
    return RngStream(s);
  }

  RngStream split(StreamPurpose purpose, std::uint64_t a, std::uint64_t b) const {
    return split(purpose, a).split(purpose, b ^ 0x5851f42d4c957f2dULL);
  }

  std::uint64_t base_seed() const { return base_; }

 private:
  std::uint64_t base_;
  std::uint64_t state_;
};

}  // namespace fedtraj

#endif  // FEDTRAJ_RANDOM_HPP_
