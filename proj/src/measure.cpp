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
#include "zakailab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace zakailab::measure {

WeightedCloud WeightedCloud::uniform(Mat atom_rows) {
  WeightedCloud mu;
  mu.weights = Vec::Ones(atom_rows.rows());
  mu.atoms = std::move(atom_rows);
  return mu;
}

void WeightedCloud::check() const {
  if (atoms.rows() != weights.size())
    throw UnsupportedInput("WeightedCloud: atom/weight count mismatch");
  if (atoms.rows() == 0) throw UnsupportedInput("WeightedCloud: empty cloud");
  for (int i = 0; i < weights.size(); ++i)
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw UnsupportedInput("WeightedCloud: weight " + std::to_string(i) +
                             " is negative or non-finite");
}

double pair(const WeightedCloud& mu, const std::function<double(const Vec&)>& f) {
  mu.check();
  std::vector<double> vals(mu.size());
  Vec x(mu.dim());
  for (int i = 0; i < mu.size(); ++i) {
    x = mu.atoms.row(i);
    vals[i] = mu.weights[i] * f(x);
  }
  return pairwise_sum(vals) / mu.size();
}

double pair_values(const WeightedCloud& mu, std::span<const double> values) {
  if (int(values.size()) != mu.size())
    throw UnsupportedInput("pair_values: value count must match atom count");
  std::vector<double> vals(mu.size());
  for (int i = 0; i < mu.size(); ++i) vals[i] = mu.weights[i] * values[i];
  return pairwise_sum(vals) / mu.size();
}

double mass(const WeightedCloud& mu) {
  mu.check();
  std::vector<double> vals(mu.weights.data(), mu.weights.data() + mu.size());
  return pairwise_sum(vals) / mu.size();
}

Vec mean(const WeightedCloud& mu) {
  const double m = mass(mu);
  if (!(m > 0.0) || !std::isfinite(m))
    throw DivergenceError("mean: cloud mass is zero or not finite");
  const int N = mu.size();
  Vec out(mu.dim());
  std::vector<double> vals(static_cast<size_t>(N));
  for (int k = 0; k < mu.dim(); ++k) {
    for (int i = 0; i < N; ++i)
      vals[static_cast<size_t>(i)] = mu.weights[i] * mu.atoms(i, k);
    out[k] = pairwise_sum(vals) / (N * m);
  }
  return out;
}

WeightedCloud normalize(const WeightedCloud& mu) {
  const double m = mass(mu);
  if (!(m > 0.0) || !std::isfinite(m))
    throw UnsupportedInput("normalize: cloud has zero or non-finite mass");
  WeightedCloud out = mu;
  out.weights /= m;
  return out;
}

double effective_sample_size(const WeightedCloud& mu) {
  mu.check();
  const double s1 = mu.weights.sum();
  const double s2 = mu.weights.squaredNorm();
  if (!(s2 > 0.0)) throw UnsupportedInput("effective_sample_size: all-zero weights");
  return s1 * s1 / s2;
}

std::vector<int> solve_assignment(const Mat& a) {
  const int n = int(a.rows());
  if (a.cols() != n || n == 0)
    throw UnsupportedInput("solve_assignment: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // Column potentials with a virtual column 0; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

std::vector<int> solve_assignment_bruteforce(const Mat& a) {
  const int n = int(a.rows());
  if (a.cols() != n || n == 0 || n > 8)
    throw UnsupportedInput("solve_assignment_bruteforce: need square n <= 8");
  std::vector<int> perm(n), best(n);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += a(i, perm[i]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double wasserstein2(const WeightedCloud& mu, const WeightedCloud& nu) {
  mu.check();
  nu.check();
  if (mu.size() != nu.size() || mu.dim() != nu.dim())
    throw UnsupportedInput("wasserstein2: clouds must share size and dimension");
  if (mu.size() > 256)
    throw UnsupportedInput("wasserstein2: assignment solver capped at N=256");
  for (const WeightedCloud* c : {&mu, &nu})
    for (int i = 0; i < c->size(); ++i)
      if (std::abs(c->weights[i] - 1.0) > 1e-9)
        throw UnsupportedInput("wasserstein2: requires uniformly weighted clouds");
  const int n = mu.size();
  Mat cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = (mu.atoms.row(i) - nu.atoms.row(j)).squaredNorm();
  const auto match = solve_assignment(cost);
  std::vector<double> terms(n);
  for (int i = 0; i < n; ++i) terms[i] = cost(i, match[i]);
  return std::sqrt(pairwise_sum(terms) / n);
}

}  // namespace zakailab::measure
