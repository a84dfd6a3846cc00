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
#include "zakailab/sde.hpp"

#include <cmath>
#include <string>

namespace zakailab::sde {

using model::SystemCorrelatedNoise;
using model::SystemCorrelatedSensor;

namespace {

void check_finite(const Vec& x, int step, double t, const char* what) {
  if (!x.allFinite())
    throw DivergenceError(std::string(what) + " non-finite at step " +
                          std::to_string(step) + " (t=" + fmt_double(t) + ")");
}

}  // namespace

TruthTrajectory simulate_truth_cn(const SystemCorrelatedNoise& sys,
                                  const paths::TimeGrid& grid, const Vec& x0,
                                  const paths::StreamKey& key) {
  sys.check_dims();
  if (x0.size() != sys.n) throw ConfigError("simulate_truth_cn: x0 must be n-dim");
  TruthTrajectory tr;
  tr.grid = grid;
  tr.b = paths::sample_brownian(grid, sys.d, key.child("B", 0));
  tr.w = paths::sample_brownian(grid, sys.m, key.child("W", 0));
  tr.x = Mat(grid.steps + 1, sys.n);
  tr.y = Mat::Zero(grid.steps + 1, sys.m);
  const double dt = grid.dt();

  Vec x = x0, y = Vec::Zero(sys.m), b1(sys.n), b2(sys.m);
  Mat s0(sys.n, sys.d), s1(sys.n, sys.m), s2(sys.m, sys.m);
  tr.x.row(0) = x;
  for (int j = 0; j < grid.steps; ++j) {
    const double t = grid.time(j);
    sys.b1.eval(t, x, b1);
    sys.b2.eval(t, x, b2);
    sys.sigma0.eval(t, x, s0);
    sys.sigma1.eval(t, x, s1);
    sys.sigma2.eval(t, s2);
    y += b2 * dt + s2 * tr.w.increments.row(j).transpose();
    x += b1 * dt + s0 * tr.b.increments.row(j).transpose() +
         s1 * tr.w.increments.row(j).transpose();
    check_finite(x, j + 1, grid.time(j + 1), "signal state");
    tr.x.row(j + 1) = x;
    tr.y.row(j + 1) = y;
  }
  return tr;
}

TruthTrajectory simulate_truth_cs(const SystemCorrelatedSensor& sys,
                                  const paths::TimeGrid& grid, const Vec& x0,
                                  const paths::StreamKey& key) {
  sys.check_dims();
  if (x0.size() != sys.n) throw ConfigError("simulate_truth_cs: x0 must be n-dim");
  TruthTrajectory tr;
  tr.grid = grid;
  tr.b = paths::sample_brownian(grid, sys.d, key.child("B", 0));
  tr.w = paths::sample_brownian(grid, sys.m, key.child("W", 0));
  tr.x = Mat(grid.steps + 1, sys.n);
  tr.y = Mat::Zero(grid.steps + 1, sys.m);
  const double dt = grid.dt();

  Vec x = x0, y = Vec::Zero(sys.m), b1(sys.n), b2(sys.m);
  Mat s1(sys.n, sys.m);
  tr.x.row(0) = x;
  for (int j = 0; j < grid.steps; ++j) {
    const double t = grid.time(j);
    sys.b1c.eval(t, x, b1);
    sys.b2c.eval(t, x, b2);
    sys.sigma1c.eval(t, x, s1);
    y += b2 * dt + sys.sigma2c * tr.w.increments.row(j).transpose() +
         sys.sigma3c * tr.b.increments.row(j).transpose();
    x += b1 * dt + s1 * tr.w.increments.row(j).transpose();
    check_finite(x, j + 1, grid.time(j + 1), "signal state");
    tr.x.row(j + 1) = x;
    tr.y.row(j + 1) = y;
  }
  return tr;
}

DriverPath extract_wtilde(const SystemCorrelatedNoise& sys,
                          const TruthTrajectory& truth) {
  DriverPath drv{truth.grid, Mat(truth.grid.steps, sys.m)};
  Mat s2inv;
  const bool constant = [&] {
    // probe two times: cheap constant detection for the common case
    return (sys.sigma2.at(0.0) - sys.sigma2.at(truth.grid.horizon)).norm() == 0.0;
  }();
  if (constant) s2inv = model::sigma2_inverse(sys, 0.0);
  for (int j = 0; j < truth.grid.steps; ++j) {
    if (!constant) s2inv = model::sigma2_inverse(sys, truth.grid.time(j));
    drv.increments.row(j) =
        (s2inv * (truth.y.row(j + 1) - truth.y.row(j)).transpose()).transpose();
  }
  return drv;
}

DriverPath extract_vtilde(const SystemCorrelatedSensor& sys,
                          const TruthTrajectory& truth) {
  DriverPath drv{truth.grid, Mat(truth.grid.steps, sys.m)};
  for (int j = 0; j < truth.grid.steps; ++j)
    drv.increments.row(j) = truth.y.row(j + 1) - truth.y.row(j);
  return drv;
}

DriverPath synthetic_driver(const paths::TimeGrid& grid, int m,
                            const paths::StreamKey& key) {
  const auto bm = paths::sample_brownian(grid, m, key);
  return DriverPath{grid, bm.increments};
}

double log_weight_increment(const Vec& h, const Eigen::Ref<const Vec>& d_driver,
                            double dt) {
  return h.dot(d_driver) - 0.5 * h.squaredNorm() * dt;
}

Vec propagate_particle_cn(const SystemCorrelatedNoise& sys, double t, const Vec& x,
                          const Eigen::Ref<const Vec>& d_wtilde,
                          const Eigen::Ref<const Vec>& d_b, double dt) {
  const Vec h = model::h_map(sys, t, x);
  return x + (sys.b1(t, x) - sys.sigma1(t, x) * h) * dt +
         sys.sigma0(t, x) * d_b + sys.sigma1(t, x) * d_wtilde;
}

Vec propagate_particle_cs(const SystemCorrelatedSensor& sys, double t, const Vec& x,
                          const Eigen::Ref<const Vec>& d_vtilde,
                          const Eigen::Ref<const Vec>& d_r, double dt) {
  const Vec b2 = sys.b2c(t, x);
  const Mat s1 = sys.sigma1c(t, x);
  const Mat s1s2t = s1 * sys.sigma2c.transpose();
  return x + (sys.b1c(t, x) - s1s2t * b2) * dt + s1s2t * d_vtilde + s1 * d_r;
}

CnStepper::CnStepper(const SystemCorrelatedNoise& sys) : sys_(sys) {
  sys.check_dims();
  b1_ = Vec(sys.n);
  b2_ = Vec(sys.m);
  h_ = Vec(sys.m);
  s0_ = Mat(sys.n, sys.d);
  s1_ = Mat(sys.n, sys.m);
  s2_constant_ = sys.sigma2.is_constant();
  s2inv_ = model::sigma2_inverse(sys, 0.0);
  t_cached_ = 0.0;
}

void CnStepper::set_time(double t) {
  if (!s2_constant_ && t != t_cached_) {
    s2inv_ = model::sigma2_inverse(sys_, t);
    t_cached_ = t;
  }
}

double CnStepper::step(double t, Vec& x, const Eigen::Ref<const Vec>& d_wtilde,
                       const Eigen::Ref<const Vec>& d_b, double dt) {
  sys_.b1.eval(t, x, b1_);
  sys_.b2.eval(t, x, b2_);
  sys_.sigma0.eval(t, x, s0_);
  sys_.sigma1.eval(t, x, s1_);
  h_.noalias() = s2inv_ * b2_;
  const double logw = h_.dot(d_wtilde) - 0.5 * h_.squaredNorm() * dt;
  b1_.noalias() -= s1_ * h_;
  x += b1_ * dt;
  x.noalias() += s0_ * d_b;
  x.noalias() += s1_ * d_wtilde;
  return logw;
}

CsStepper::CsStepper(const SystemCorrelatedSensor& sys)
    : sys_(sys), factor_(sys.residual_noise_factor()) {
  sys.check_dims();
  b1_ = Vec(sys.n);
  b2_ = Vec(sys.m);
  r_ = Vec(sys.m);
  s1_ = Mat(sys.n, sys.m);
  s1s2t_ = Mat(sys.n, sys.m);
}

double CsStepper::step(double t, Vec& x, const Eigen::Ref<const Vec>& d_vtilde,
                       const Eigen::Ref<const Vec>& xi, double dt) {
  sys_.b1c.eval(t, x, b1_);
  sys_.b2c.eval(t, x, b2_);
  sys_.sigma1c.eval(t, x, s1_);
  const double logw = b2_.dot(d_vtilde) - 0.5 * b2_.squaredNorm() * dt;
  s1s2t_.noalias() = s1_ * sys_.sigma2c.transpose();
  r_.noalias() = factor_ * xi;
  x += (b1_ - s1s2t_ * b2_) * dt + s1s2t_ * d_vtilde + s1_ * r_;
  return logw;
}

}  // namespace zakailab::sde
