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
#ifndef ZAKAILAB_VERIFY_HPP_
#define ZAKAILAB_VERIFY_HPP_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "zakailab/calculus.hpp"
#include "zakailab/zakai.hpp"

// Ensemble-level verification of the superposition principles.  An ensemble
// of independent filter runs stands in for the law of the measure-valued
// path; we test that this law satisfies (a) the weak Fokker-Planck equation
// on measure space and (b) the martingale problem satisfied by its projection
// onto finitely many dictionary pairings.  Both tests reduce to residuals
// that should vanish up to Monte-Carlo noise plus an O(dt) discretization
// allowance.
namespace zakailab::verify {

// Everything a residual evaluation needs from one run, tabulated on the
// evaluation subgrid: pairings z_u = <mu, phi_u>, generator pairings
// beta_u = <mu, L phi_u>, the Gram matrix alpha = A A^T of driver loadings,
// the total mass, and the integrability-audit integrand.  Raw particle
// clouds are deliberately not retained; at realistic ensemble sizes they do
// not fit in memory and nothing downstream needs them.
struct RunObservables {
  Mat z;                   // K x U
  Mat beta;                // K x U
  std::vector<Mat> alpha;  // K matrices of size U x U
  Vec mass;                // K
  Vec audit;               // K
};

struct EnsembleOptions {
  int runs = 8;
  int particles = 256;
  std::uint64_t seed = 1;
  int eval_stride = 1;  // observables every this many grid steps
  int threads = 1;
  // When > 1: drivers are sampled on the grid passed to the builder, summed
  // in groups of `coarsen`, and the runs are solved on the coarsened grid.
  // Evaluation times are unchanged (eval_stride must be divisible), so the
  // same residuals computed at two resolutions share their randomness; the
  // difference isolates the time-discretization bias.
  int coarsen = 1;
};

struct EnsembleLaw {
  paths::TimeGrid grid;  // the grid runs were solved on
  calculus::Dictionary dict;
  std::vector<int> eval_steps;
  Vec times;
  int particles = 0;
  std::uint64_t seed = 0;
  std::string variant;  // "cn" or "cs"

  std::vector<RunObservables> runs;

  int size() const { return int(runs.size()); }
  int eval_count() const { return int(times.size()); }
  // Index of t among the evaluation times; throws UnsupportedInput if t was
  // not tabulated.
  int eval_index(double t) const;
};

EnsembleLaw build_ensemble_cn(const model::SystemCorrelatedNoise& sys,
                              const paths::TimeGrid& grid,
                              const calculus::Dictionary& dict,
                              const zakai::InitialLaw& init,
                              const EnsembleOptions& opt);
EnsembleLaw build_ensemble_cs(const model::SystemCorrelatedSensor& sys,
                              const paths::TimeGrid& grid,
                              const calculus::Dictionary& dict,
                              const zakai::InitialLaw& init,
                              const EnsembleOptions& opt);

// One measure-space test functional G(mu) = g(<mu,phi_{c_1}>, ...,
// <mu,phi_{c_k}>), expressed against the ensemble's dictionary.
struct BatteryItem {
  calculus::OuterFunction g;
  std::vector<int> coords;  // dictionary indices, size g.arity()
  std::string label;
};

// Mixed battery over the first three dictionary slots: coordinate pairings,
// their products, and a bounded tanh form.  Needs dict.size() >= 3.
std::vector<BatteryItem> standard_battery(const calculus::Dictionary& dict);

struct ResidualReport {
  std::string kind;   // "fpe" | "martingale" | "mass"
  std::string label;  // functional description
  double s = 0.0;     // start time (0 for fpe/mass)
  double t = 0.0;     // evaluation time
  int runs = 0;
  int particles = 0;
  double dt = 0.0;
  double residual = 0.0;
  double std_error = 0.0;
  double allowance = 0.0;
  double gram_min_eig = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;  // |residual| <= 3 std_error + allowance
};

// Bounded functional of the projected path up to time s: a product of tanh
// of dictionary pairings evaluated at times <= s.  Empty product == 1, the
// plain (unconditional) martingale increment test.
struct TestMartFunctional {
  std::vector<double> times;
  std::vector<int> coords;

  static TestMartFunctional one() { return {}; }
  std::string label() const;
  double value(const EnsembleLaw& ens, const RunObservables& run) const;
};

// E[G(mu_t)] - E[G(mu_0)] - int_0^t E[LG(mu_r)] dr with ensemble averages and
// trapezoidal quadrature on the evaluation subgrid; the per-run combination
// supplies the Monte-Carlo standard error.
ResidualReport fpe_residual(const EnsembleLaw& ens, const BatteryItem& item,
                            double t, double allowance);

// E[(Phi(w_t) - Phi(w_s) - int_s^t (1/2 alpha^{uv} d_uv Phi + beta^u d_u Phi)
// dr) chi_s(w)] over the projected paths w_u(r) = <mu_r, phi_u>.  Uses the
// same quadrature as fpe_residual, so for linear Phi and chi == 1 the two
// agree exactly.  Also reports the smallest eigenvalue of the alpha blocks
// it touched.
ResidualReport martingale_residual(const EnsembleLaw& ens,
                                   const calculus::CylinderFunctionRInf& Phi,
                                   const TestMartFunctional& chi, double s,
                                   double t, double allowance);

// The total mass <mu_t, 1> is an exact martingale started at 1, even after
// Euler discretization (the exponential weights have conditional mean one),
// so no discretization allowance applies.
ResidualReport mass_check(const EnsembleLaw& ens, double t);

struct AuditReport {
  std::string variant;
  double value = 0.0;
  double ceiling = 0.0;
  int runs = 0;
  bool pass = false;  // finite and <= ceiling
};

// Ensemble-and-time Monte-Carlo estimate of the integrability integrand that
// the weak-solution definitions require to be finite.
AuditReport fpe_integrability_audit(const EnsembleLaw& ens, double ceiling);

// Richardson-style allowance: rerun the same residuals on a 'factor'-times
// coarser grid with shared driver randomness; the residual shift estimates
// the O(dt) bias, giving C = max |shift| / (dt (factor-1)) and the allowance
// C dt at the fine resolution.
struct Calibration {
  double C = 0.0;
  double allowance = 0.0;
};
Calibration calibrate_allowance(const std::vector<ResidualReport>& fine,
                                const std::vector<ResidualReport>& coarse,
                                double dt_fine, int factor);

}  // namespace zakailab::verify

#endif  // ZAKAILAB_VERIFY_HPP_
