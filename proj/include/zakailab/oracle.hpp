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

#include "zakailab/calculus.hpp"
#include "zakailab/measure.hpp"
#include "zakailab/model.hpp"
#include "zakailab/paths.hpp"
#include "zakailab/sde.hpp"
#include "zakailab/zakai.hpp"

// Closed-form and low-tech reference computations the particle machinery is
// checked against.  Everything here deliberately avoids the solver code
// paths: plain LU solves, explicit Runge-Kutta, finite differences.
namespace zakailab::oracle {

// Linear-Gaussian model dX = A X dt + noise, dY = C X dt + noise, reduced to
// the three covariance blocks the filter formulas consume.
struct LinearGaussianSpec {
  Mat A;    // n x n
  Mat C;    // m x n
  Mat Qx;   // n x n  signal noise covariance rate
  Mat Qy;   // m x m  observation noise covariance rate (invertible)
  Mat Qxy;  // n x m  cross rate between signal and observation noise

  void check() const;
  int n() const { return int(A.rows()); }
  int m() const { return int(C.rows()); }

  // dX = A X dt + sigma0 dB + sigma1 dW, dY = C X dt + sigma2 dW
  static LinearGaussianSpec from_coefficients(const Mat& A, const Mat& C,
                                              const Mat& sigma0,
                                              const Mat& sigma1,
                                              const Mat& sigma2);
  // dX = A X dt + sigma1c dW, dY = C X dt + sigma2c dW + sigma3c dB
  static LinearGaussianSpec from_sensor(const Mat& A, const Mat& C,
                                        const Mat& sigma1c, const Mat& sigma2c,
                                        const Mat& sigma3c);
};

// Conditional mean/covariance recursion with the noise-correlation gain
//   K = (P C^T + Qxy) Qy^{-1}
//   dm = A m dt + K (dy - C m dt)
//   dP = (A P + P A^T + Qx - K Qy K^T) dt        (symmetrized each step)
struct KalmanResult {
  paths::TimeGrid grid;
  Mat means;              // (J+1) x n
  std::vector<Mat> covs;  // J+1 entries
};

KalmanResult kalman_bucy(const LinearGaussianSpec& spec,
                         const paths::TimeGrid& grid, const Mat& dy,
                         const Vec& mean0, const Mat& cov0);

// Observation increments dy_j = y_{j+1} - y_j from a stacked path.
Mat increments_from_path(const Mat& y);

// Unconditional first/second moments of the linear signal by classic RK4:
//   dm/dt = A m,   dP/dt = A P + P A^T + Qx
struct MomentCurve {
  paths::TimeGrid grid;
  Mat means;
  std::vector<Mat> covs;
};

MomentCurve moment_ode_oracle(const Mat& A, const Mat& Qx,
                              const paths::TimeGrid& grid, const Vec& mean0,
                              const Mat& cov0);

// Forward difference quotient of a cylindrical functional along the
// pushforward of mu under x -> x + eps v(x); the probe the analytic measure
// derivative is validated against:
//   (G(mu o (id + eps v)^{-1}) - G(mu)) / eps  ->  <mu, lderiv G . v>
double lderiv_fd(const calculus::CylindricalFunctional& G,
                 const measure::WeightedCloud& mu,
                 const std::function<Vec(const Vec&)>& v, double eps);

// The pairing the quotient converges to, assembled from the analytic
// derivative.
double lderiv_pairing(const calculus::CylindricalFunctional& G,
                      const measure::WeightedCloud& mu,
                      const std::function<Vec(const Vec&)>& v);

// Plain-Euler weighted filters for the decoupled special cases, written
// without the solver's step engines.  They follow the same per-particle
// stream lineage as the solver, so runs with shared seeds are comparable
// pairing-by-pairing.
//
// Correlated-noise family with sigma1 = 0: particle moves on its own noise
// only, the driver enters through the weight.  Throws UnsupportedInput if
// sigma1 is not identically zero (probed on a small lattice).
zakai::ZakaiPath reference_filter_cn(const model::SystemCorrelatedNoise& sys,
                                     const paths::TimeGrid& grid,
                                     const sde::DriverPath& wtilde,
                                     const zakai::InitialLaw& init,
                                     const zakai::SolverOptions& opt);
// Sensor family with sigma2c = 0 (orthogonal sensor noise).
zakai::ZakaiPath reference_filter_cs(const model::SystemCorrelatedSensor& sys,
                                     const paths::TimeGrid& grid,
                                     const sde::DriverPath& vtilde,
                                     const zakai::InitialLaw& init,
                                     const zakai::SolverOptions& opt);

}  // namespace zakailab::oracle
