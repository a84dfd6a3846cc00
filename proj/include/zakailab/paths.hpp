/*
 * Copyright 2026 The zakailab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "zakailab/common.hpp"

namespace zakailab::paths {

// Uniform grid 0 = t_0 < ... < t_J = T.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, int J);
  double dt() const { return horizon / steps; }
  double time(int j) const { return horizon * j / steps; }
};

// Philox4x32-10 counter-based generator.  A draw is a pure function of
// (seed, lineage digest, draw index): no sequential state, so any particle /
// role / run can be sampled in any order, on any thread, with identical
// results.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& ctr,
                                        const std::array<std::uint32_t, 2>& key);

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

// Identifies one logical random stream: a master seed plus a lineage of
// (role, index) pairs, e.g. seed -> ("run", 3) -> ("particle", 41) -> ("B", 0).
// The lineage is folded into a 64-bit digest placed in the upper counter
// words, so distinct digests own disjoint counter ranges of 2^64 draws each.
class StreamKey {
 public:
  explicit StreamKey(std::uint64_t seed) : seed_(seed), digest_(0) {}
  StreamKey child(std::string_view role, std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t digest() const { return digest_; }

 private:
  StreamKey(std::uint64_t seed, std::uint64_t digest)
      : seed_(seed), digest_(digest) {}
  std::uint64_t seed_;
  std::uint64_t digest_;
};

// Index-addressable N(0,1) stream (Box-Muller over Philox lanes).  Each
// counter block yields the pair (normal[2b], normal[2b+1]).
class NormalStream {
 public:
  explicit NormalStream(const StreamKey& key);

  double at(std::uint64_t i) const;
  // Fills out[0..len) with normals start, start+1, ...  Shares blocks between
  // adjacent even/odd indices, unlike repeated at() calls.
  void fill(std::uint64_t start, std::span<double> out) const;

 private:
  std::pair<double, double> block(std::uint64_t b) const;
  std::array<std::uint32_t, 2> key_;
  std::uint64_t digest_;
};

// Index-addressable U(0,1) stream over the same counter layout.  Lane i of
// block b is uniform[2b+i]; independent of the NormalStream on a *different*
// lineage only (they share counters on the same one).
class UniformStream {
 public:
  explicit UniformStream(const StreamKey& key);
  double at(std::uint64_t i) const;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t digest_;
};

// Brownian increments on a grid: row j holds dW_j ~ N(0, dt I_dim).
struct BrownianPath {
  TimeGrid grid;
  int dim = 0;
  Mat increments;  // steps x dim
};

BrownianPath sample_brownian(const TimeGrid& grid, int dim, const StreamKey& key);

// Positions W_{t_j} = sum of increments before j; row 0 is zero.
Mat cumulate(const BrownianPath& path);

// Sums groups of `factor` consecutive increments: the same Brownian path seen
// on a grid coarsened by `factor` (steps must divide evenly).
BrownianPath coarsen(const BrownianPath& path, int factor);

}  // namespace zakailab::paths
