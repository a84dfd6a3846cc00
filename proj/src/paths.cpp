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
#include "zakailab/paths.hpp"

#include <cmath>
#include <numbers>

namespace zakailab::paths {

TimeGrid::TimeGrid(double T, int J) : horizon(T), steps(J) {
  if (!(T > 0.0) || J < 1)
    throw ConfigError("TimeGrid: need horizon > 0 and steps >= 1");
}

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& c,
                       const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = std::uint64_t(kM0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kM1) * c[2];
  c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
       std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& ctr,
                                        const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = ctr;
  std::array<std::uint32_t, 2> k = key;
  round_once(c, k);
  for (int r = 1; r < 10; ++r) {
    k[0] += kW0;
    k[1] += kW1;
    round_once(c, k);
  }
  return c;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char b : s) {
    h ^= b;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

StreamKey StreamKey::child(std::string_view role, std::uint64_t index) const {
  std::uint64_t d = splitmix64(digest_ ^ fnv1a64(role));
  d = splitmix64(d ^ index);
  return StreamKey(seed_, d);
}

NormalStream::NormalStream(const StreamKey& key)
    : key_{std::uint32_t(key.seed()), std::uint32_t(key.seed() >> 32)},
      digest_(key.digest()) {}

std::pair<double, double> NormalStream::block(std::uint64_t b) const {
  const std::array<std::uint32_t, 4> ctr = {
      std::uint32_t(b), std::uint32_t(b >> 32), std::uint32_t(digest_),
      std::uint32_t(digest_ >> 32)};
  const auto x = philox4x32(ctr, key_);
  const std::uint64_t a = (std::uint64_t(x[0]) << 32) | x[1];
  const std::uint64_t c = (std::uint64_t(x[2]) << 32) | x[3];
  // (0,1)-uniforms from the top 53 bits, offset half an ulp so u > 0 strictly.
  const double u1 = (double(a >> 11) + 0.5) * 0x1p-53;
  const double u2 = (double(c >> 11) + 0.5) * 0x1p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(th), r * std::sin(th)};
}

double NormalStream::at(std::uint64_t i) const {
  const auto z = block(i >> 1);
  return (i & 1u) ? z.second : z.first;
}

void NormalStream::fill(std::uint64_t start, std::span<double> out) const {
  std::size_t i = 0;
  std::uint64_t idx = start;
  if ((idx & 1u) && i < out.size()) {
    out[i++] = block(idx >> 1).second;
    ++idx;
  }
  while (i < out.size()) {
    const auto z = block(idx >> 1);
    out[i++] = z.first;
    if (i < out.size()) out[i++] = z.second;
    idx += 2;
  }
}

UniformStream::UniformStream(const StreamKey& key)
    : key_{std::uint32_t(key.seed()), std::uint32_t(key.seed() >> 32)},
      digest_(key.digest()) {}

double UniformStream::at(std::uint64_t i) const {
  const std::uint64_t b = i >> 1;
  const std::array<std::uint32_t, 4> ctr = {
      std::uint32_t(b), std::uint32_t(b >> 32), std::uint32_t(digest_),
      std::uint32_t(digest_ >> 32)};
  const auto x = philox4x32(ctr, key_);
  const std::uint64_t a = (i & 1u) ? (std::uint64_t(x[2]) << 32) | x[3]
                                   : (std::uint64_t(x[0]) << 32) | x[1];
  return (double(a >> 11) + 0.5) * 0x1p-53;
}

BrownianPath sample_brownian(const TimeGrid& grid, int dim, const StreamKey& key) {
  if (dim < 1) throw ConfigError("sample_brownian: dim must be >= 1");
  BrownianPath p{grid, dim, Mat(grid.steps, dim)};
  NormalStream stream(key);
  const double s = std::sqrt(grid.dt());
  std::vector<double> row(dim);
  for (int j = 0; j < grid.steps; ++j) {
    stream.fill(std::uint64_t(j) * dim, row);
    for (int k = 0; k < dim; ++k) p.increments(j, k) = s * row[k];
  }
  return p;
}

Mat cumulate(const BrownianPath& path) {
  Mat w = Mat::Zero(path.grid.steps + 1, path.dim);
  for (int j = 0; j < path.grid.steps; ++j)
    w.row(j + 1) = w.row(j) + path.increments.row(j);
  return w;
}

BrownianPath coarsen(const BrownianPath& path, int factor) {
  if (factor < 1 || path.grid.steps % factor != 0)
    throw UnsupportedInput("coarsen: factor must divide the step count");
  const int coarse_steps = path.grid.steps / factor;
  BrownianPath p{TimeGrid(path.grid.horizon, coarse_steps), path.dim,
                 Mat::Zero(coarse_steps, path.dim)};
  for (int j = 0; j < coarse_steps; ++j)
    for (int r = 0; r < factor; ++r)
      p.increments.row(j) += path.increments.row(j * factor + r);
  return p;
}

}  // namespace zakailab::paths
