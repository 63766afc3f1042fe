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

#ifndef FEDTRAJ_NN_CHECKPOINT_HPP_
#define FEDTRAJ_NN_CHECKPOINT_HPP_

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fedtraj/nn/params.hpp"

namespace fedtraj::nn {

inline constexpr const char* kParamsFormatHeader = "fedtraj.params.v1";

// Text container of (name, shape, values) triples. Values are written as
// hex floats, so save/load round-trips are bit exact.
//
//   fedtraj.params.v1
//   <param count>
//   <name> <rank> <dim...>        (one per parameter, followed by)
//   <value value ...>             (numel hexfloat values on one line)
inline void save_parameters(const ParameterSet& params, std::ostream& os) {
  os << kParamsFormatHeader << "\n" << params.names().size() << "\n";
  for (const auto& [name, t] : params) {
    os << name << " " << t.shape.size();
    for (std::size_t d : t.shape) os << " " << d;
    os << "\n";
    os << std::hexfloat;
    for (std::size_t i = 0; i < t.v.size(); ++i)
      os << (i ? " " : "") << t.v[i];
    os << std::defaultfloat << "\n";
  }
}

inline void save_parameters(const ParameterSet& params,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  save_parameters(params, f);
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline ParameterSet load_parameters(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header != kParamsFormatHeader)
    throw std::runtime_error("parameter file: bad or missing format header");
  std::size_t count = 0;
  is >> count;
  ParameterSet ps;
  for (std::size_t p = 0; p < count; ++p) {
    std::string name;
    std::size_t rank = 0;
    if (!(is >> name >> rank))
      throw std::runtime_error("parameter file: truncated entry");
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      if (!(is >> shape[d]))
        throw std::runtime_error("parameter file: truncated shape");
      numel *= shape[d];
    }
    Tensor t;
    t.shape = shape;
    t.v.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      std::string tok;
      if (!(is >> tok))
        throw std::runtime_error("parameter file: truncated values");
      char* end = nullptr;
      t.v[i] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw std::runtime_error("parameter file: bad value token '" + tok + "'");
    }
    ps.add(name, std::move(t));
  }
  return ps;
}

inline ParameterSet load_parameters(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return load_parameters(f);
}

}  // namespace fedtraj::nn

#endif  // FEDTRAJ_NN_CHECKPOINT_HPP_
