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

#include "zakailab/model.hpp"
#include "zakailab/paths.hpp"

namespace zakailab::sde {

// One Euler path of a signal/observation pair, with the noises that drove it
// (kept so drivers and weights can be reconstructed exactly).
struct TruthTrajectory {
  paths::TimeGrid grid;
  Mat x;  // (J+1) x n, left-endpoint Euler states
  Mat y;  // (J+1) x m, y.row(0) = 0
  paths::BrownianPath b;  // idiosyncratic noise, d columns
  paths::BrownianPath w;  // noise shared with the observation, m columns
};

// Increments of the driver the filter consumes: the observation path after
// the reference-measure change of variables (an m-dim Brownian motion under
// the reference measure).
struct DriverPath {
  paths::TimeGrid grid;
  Mat increments;  // J x m
};

// key spawns child streams ("B", 0) and ("W", 0).
TruthTrajectory simulate_truth_cn(const model::SystemCorrelatedNoise& sys,
                                  const paths::TimeGrid& grid, const Vec& x0,
                                  const paths::StreamKey& key);
TruthTrajectory simulate_truth_cs(const model::SystemCorrelatedSensor& sys,
                                  const paths::TimeGrid& grid, const Vec& x0,
                                  const paths::StreamKey& key);

// dWtilde_j = sigma2(t_j)^{-1} dY_j; on the Euler grid this equals
// h(t_j, X_j) dt + dW_j exactly.
DriverPath extract_wtilde(const model::SystemCorrelatedNoise& sys,
                          const TruthTrajectory& truth);
// dVtilde_j = dY_j (the sensor system's driver is the observation itself).
DriverPath extract_vtilde(const model::SystemCorrelatedSensor& sys,
                          const TruthTrajectory& truth);

// Fresh reference-measure driver: plain Brownian increments.  Used when the
// law of the filter path, not a particular observation record, is the object
// under study.
DriverPath synthetic_driver(const paths::TimeGrid& grid, int m,
                            const paths::StreamKey& key);

// log-increment of the exponential likelihood weight:
//   h . dDriver - |h|^2 dt / 2
double log_weight_increment(const Vec& h, const Eigen::Ref<const Vec>& d_driver,
                            double dt);

// One Euler step of a particle under the reference measure (coefficients at
// the left endpoint):
//   x + (b1 - sigma1 h) dt + sigma0 dB + sigma1 dWtilde
Vec propagate_particle_cn(const model::SystemCorrelatedNoise& sys, double t,
                          const Vec& x, const Eigen::Ref<const Vec>& d_wtilde,
                          const Eigen::Ref<const Vec>& d_b, double dt);

// Sensor analogue.  d_r must have covariance (I - sigma2c^T sigma2c) dt (see
// CsStepper, which generates it from the residual noise factor):
//   x + (b1c - sigma1c sigma2c^T b2c) dt + sigma1c sigma2c^T dVtilde + sigma1c dR
Vec propagate_particle_cs(const model::SystemCorrelatedSensor& sys, double t,
                          const Vec& x, const Eigen::Ref<const Vec>& d_vtilde,
                          const Eigen::Ref<const Vec>& d_r, double dt);

// Allocation-free step engines for the particle loops.  step() advances x in
// place and returns the log-weight increment, evaluating every coefficient at
// the pre-move state.
class CnStepper {
 public:
  explicit CnStepper(const model::SystemCorrelatedNoise& sys);
  // Refresh the cached sigma2(t)^{-1}; call once per grid step, before the
  // particle sweep.  step() itself never factorizes.
  void set_time(double t);
  double step(double t, Vec& x, const Eigen::Ref<const Vec>& d_wtilde,
              const Eigen::Ref<const Vec>& d_b, double dt);
  const Vec& last_h() const { return h_; }
  const Mat& sigma2_inv() const { return s2inv_; }

 private:
  const model::SystemCorrelatedNoise& sys_;
  Mat s2inv_;
  bool s2_constant_;
  double t_cached_ = 0.0;
  Vec b1_, b2_, h_;
  Mat s0_, s1_;
};

class CsStepper {
 public:
  explicit CsStepper(const model::SystemCorrelatedSensor& sys);
  // xi must be d-independent N(0, dt I_m) increments; the stepper applies the
  // residual factor internally.
  double step(double t, Vec& x, const Eigen::Ref<const Vec>& d_vtilde,
              const Eigen::Ref<const Vec>& xi, double dt);
  const Mat& residual_factor() const { return factor_; }

 private:
  const model::SystemCorrelatedSensor& sys_;
  Mat factor_;  // PSD sqrt of I - sigma2c^T sigma2c
  Vec b1_, b2_, r_;
  Mat s1_, s1s2t_;
};

}  // namespace zakailab::sde
