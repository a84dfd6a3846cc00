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
#ifndef ZAKAILAB_SCENARIO_HPP_
#define ZAKAILAB_SCENARIO_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zakailab/oracle.hpp"
#include "zakailab/verify.hpp"
#include "zakailab/zakai.hpp"

// Scenario files describe one complete experiment as a JSON document: the
// system coefficients, the grid, the particle/ensemble sizes, the dictionary,
// the test-functional battery, and the pass tolerances.  Parsing is strict;
// every validation error names the offending field path.
namespace zakailab::scenario {

struct MartingaleSpec {
  int k = 0;  // truncation level; 0 == section absent
  double s = 0.0;
  double t = 0.0;
  std::vector<calculus::CylinderFunctionRInf> phis;
  std::vector<verify::TestMartFunctional> chis;
};

struct Tolerances {
  double audit_ceiling = 1e6;
  // Fixed discretization-allowance coefficient; negative selects one-step
  // refinement calibration instead.
  double allowance_C = -1.0;
  int refinement_factor = 2;
  double kalman_mean_tol = 0.02;
  double kalman_var_rel_tol = 0.10;
  double reduction_tol = 1e-10;
  int lderiv_trials = 100;
  double lderiv_eps = 1e-4;
  double lderiv_rel_tol = 1e-4;
};

struct Scenario {
  int schema = 1;
  std::string label = "scenario";
  std::string variant = "cn";  // "cn" | "cs"
  paths::TimeGrid grid{1.0, 100};
  model::SystemCorrelatedNoise cn;
  model::SystemCorrelatedSensor cs;
  zakai::InitialLaw initial = zakai::InitialLaw::dirac(Vec::Zero(1));
  int particles = 256;
  int ensemble_runs = 8;
  int eval_stride = 1;
  int threads = 1;      // execution detail: excluded from the config digest
  int truth_paths = 4;  // observation records for simulate / kalman suites
  std::uint64_t seed = 1;
  std::string out = "out";
  calculus::Dictionary dictionary;
  std::vector<verify::BatteryItem> battery;
  std::vector<double> fpe_times;
  MartingaleSpec martingale;
  Tolerances tol;
  // Present when the coefficients form a linear-Gaussian family (affine
  // drifts without offset, constant diffusions) and the initial law is
  // Gaussian or a point mass: enables the closed-form filter oracle.
  std::optional<oracle::LinearGaussianSpec> linear;
  Vec linear_mean0;
  Mat linear_cov0;

  std::string digest;  // FNV-1a of the canonical config text

  int state_dim() const { return variant == "cn" ? cn.n : cs.n; }
  int driver_dim() const { return variant == "cn" ? cn.m : cs.m; }
};

// Command-line overrides are applied to the JSON tree before interpretation,
// so the digest (and hence artifact names) reflect the effective settings.
// The thread count never participates in the digest: results are required to
// be independent of it.
struct Overrides {
  std::optional<double> dt;
  std::optional<int> particles;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

Scenario parse_scenario(const std::string& text, const Overrides& ov = {});
Scenario load_scenario(const std::string& file, const Overrides& ov = {});

// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
std::string config_digest(const std::string& canonical);

}  // namespace zakailab::scenario

#endif  // ZAKAILAB_SCENARIO_HPP_
