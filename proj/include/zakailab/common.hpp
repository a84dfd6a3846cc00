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

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace zakailab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Unrecoverable problems are reported as exceptions; the what() string names
// the offending field / time / step so a failing run is diagnosable from logs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularCoefficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FactorizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sum in a fixed pairwise-tree order.  Used for every measure pairing so that
// reductions are reproducible bit-for-bit regardless of worker-thread count,
// and more accurate than left-to-right accumulation for large clouds.
double pairwise_sum(std::span<const double> v);

// Shortest decimal round-trip formatting ("%.17g") used by all writers, so a
// rerun of the same scenario yields byte-identical artifacts.
std::string fmt_double(double x);

}  // namespace zakailab
