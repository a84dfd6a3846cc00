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

#include <functional>
#include <vector>

#include "zakailab/common.hpp"

namespace zakailab::measure {

// Finite nonnegative measure as a weighted empirical cloud:
//   mu = (1/N) sum_i gamma_i delta_{x_i}
// Raw signal clouds carry gamma_i = 1; filter clouds carry likelihood weights.
struct WeightedCloud {
  Mat atoms;    // N x n
  Vec weights;  // N, nonnegative

  int size() const { return int(atoms.rows()); }
  int dim() const { return int(atoms.cols()); }
  static WeightedCloud uniform(Mat atom_rows);
  void check() const;  // throws UnsupportedInput on shape/sign violations
};

// <mu, f> = (1/N) sum_i gamma_i f(x_i), accumulated with a fixed pairwise
// tree so the value is independent of evaluation threading.
double pair(const WeightedCloud& mu, const std::function<double(const Vec&)>& f);

// Same reduction when the caller already has per-atom values f(x_i).
double pair_values(const WeightedCloud& mu, std::span<const double> values);

double mass(const WeightedCloud& mu);

// Mean of the normalized measure, coordinate-wise pairings over the mass.
// Zero or non-finite mass throws DivergenceError.
Vec mean(const WeightedCloud& mu);

// Scales weights so the total mass is one.  Zero or non-finite mass throws.
WeightedCloud normalize(const WeightedCloud& mu);

// Effective sample size (sum gamma)^2 / sum gamma^2 in [1, N]; degeneracy
// monitor for likelihood-weighted clouds.
double effective_sample_size(const WeightedCloud& mu);

// Minimum-cost row->column assignment for a square cost matrix (shortest
// augmenting path with potentials, O(n^3)).
std::vector<int> solve_assignment(const Mat& cost);

// Brute-force assignment optimum, n <= 8: the oracle solve_assignment is
// tested against.
std::vector<int> solve_assignment_bruteforce(const Mat& cost);

// Order-2 transport distance between two same-size uniformly weighted clouds
// (weights identically one; N <= 256): sqrt of the mean squared displacement
// under the optimal atom matching.
double wasserstein2(const WeightedCloud& mu, const WeightedCloud& nu);

}  // namespace zakailab::measure
