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
#include "zakailab/oracle.hpp"

#include <cmath>
#include <vector>

namespace zakailab::oracle {

void LinearGaussianSpec::check() const {
  const int nn = int(A.rows());
  const int mm = int(C.rows());
  if (A.cols() != nn) throw ConfigError("LinearGaussianSpec: A must be square");
  if (C.cols() != nn) throw ConfigError("LinearGaussianSpec: C column mismatch");
  if (Qx.rows() != nn || Qx.cols() != nn)
    throw ConfigError("LinearGaussianSpec: Qx shape mismatch");
  if (Qy.rows() != mm || Qy.cols() != mm)
    throw ConfigError("LinearGaussianSpec: Qy shape mismatch");
  if (Qxy.rows() != nn || Qxy.cols() != mm)
    throw ConfigError("LinearGaussianSpec: Qxy shape mismatch");
  Eigen::LLT<Mat> llt(Qy);
  if (llt.info() != Eigen::Success)
    throw SingularCoefficient(
        "LinearGaussianSpec: Qy is not symmetric positive definite");
}

LinearGaussianSpec LinearGaussianSpec::from_coefficients(const Mat& A,
                                                         const Mat& C,
                                                         const Mat& sigma0,
                                                         const Mat& sigma1,
                                                         const Mat& sigma2) {
  LinearGaussianSpec spec;
  spec.A = A;
  spec.C = C;
  spec.Qx = sigma0 * sigma0.transpose() + sigma1 * sigma1.transpose();
  spec.Qy = sigma2 * sigma2.transpose();
  spec.Qxy = sigma1 * sigma2.transpose();
  spec.check();
  return spec;
}

LinearGaussianSpec LinearGaussianSpec::from_sensor(const Mat& A, const Mat& C,
                                                   const Mat& sigma1c,
                                                   const Mat& sigma2c,
                                                   const Mat& sigma3c) {
  LinearGaussianSpec spec;
  spec.A = A;
  spec.C = C;
  spec.Qx = sigma1c * sigma1c.transpose();
  spec.Qy = sigma2c * sigma2c.transpose() + sigma3c * sigma3c.transpose();
  spec.Qxy = sigma1c * sigma2c.transpose();
  spec.check();
  return spec;
}

Mat increments_from_path(const Mat& y) {
  if (y.rows() < 2) throw UnsupportedInput("increments_from_path: too short");
  return y.bottomRows(y.rows() - 1) - y.topRows(y.rows() - 1);
}

KalmanResult kalman_bucy(const LinearGaussianSpec& spec,
                         const paths::TimeGrid& grid, const Mat& dy,
                         const Vec& mean0, const Mat& cov0) {
  spec.check();
  const int n = spec.n();
  const int m = spec.m();
  if (int(dy.rows()) != grid.steps || int(dy.cols()) != m)
    throw ConfigError("kalman_bucy: observation increment shape mismatch");
  if (int(mean0.size()) != n || cov0.rows() != n || cov0.cols() != n)
    throw ConfigError("kalman_bucy: initial moment shape mismatch");

  const double dt = grid.dt();
  KalmanResult out;
  out.grid = grid;
  out.means.resize(grid.steps + 1, n);
  out.covs.reserve(size_t(grid.steps) + 1);

  Eigen::LLT<Mat> qy_llt(spec.Qy);
  Vec mean = mean0;
  Mat P = 0.5 * (cov0 + cov0.transpose());
  out.means.row(0) = mean;
  out.covs.push_back(P);

  Vec innov(m);
  Mat K(n, m), Pdot(n, n);
  for (int j = 0; j < grid.steps; ++j) {
    K = qy_llt.solve((P * spec.C.transpose() + spec.Qxy).transpose()).transpose();
    innov = dy.row(j).transpose() - spec.C * mean * dt;
    mean += spec.A * mean * dt + K * innov;
    Pdot = spec.A * P + P * spec.A.transpose() + spec.Qx -
           K * spec.Qy * K.transpose();
    P += Pdot * dt;
    P = 0.5 * (P + P.transpose()).eval();
    out.means.row(j + 1) = mean;
    out.covs.push_back(P);
  }
  return out;
}

MomentCurve moment_ode_oracle(const Mat& A, const Mat& Qx,
                              const paths::TimeGrid& grid, const Vec& mean0,
                              const Mat& cov0) {
  const int n = int(A.rows());
  if (A.cols() != n || Qx.rows() != n || Qx.cols() != n ||
      int(mean0.size()) != n || cov0.rows() != n || cov0.cols() != n)
    throw ConfigError("moment_ode_oracle: shape mismatch");

  const double dt = grid.dt();
  MomentCurve out;
  out.grid = grid;
  out.means.resize(grid.steps + 1, n);
  out.covs.reserve(size_t(grid.steps) + 1);

  auto mdot = [&](const Vec& m) -> Vec { return A * m; };
  auto pdot = [&](const Mat& P) -> Mat {
    return A * P + P * A.transpose() + Qx;
  };

  Vec m = mean0;
  Mat P = 0.5 * (cov0 + cov0.transpose());
  out.means.row(0) = m;
  out.covs.push_back(P);
  for (int j = 0; j < grid.steps; ++j) {
    const Vec k1 = mdot(m);
    const Vec k2 = mdot(m + 0.5 * dt * k1);
    const Vec k3 = mdot(m + 0.5 * dt * k2);
    const Vec k4 = mdot(m + dt * k3);
    m += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const Mat K1 = pdot(P);
    const Mat K2 = pdot(P + 0.5 * dt * K1);
    const Mat K3 = pdot(P + 0.5 * dt * K2);
    const Mat K4 = pdot(P + dt * K3);
    P += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    P = 0.5 * (P + P.transpose()).eval();

    out.means.row(j + 1) = m;
    out.covs.push_back(P);
  }
  return out;
}

double lderiv_fd(const calculus::CylindricalFunctional& G,
                 const measure::WeightedCloud& mu,
                 const std::function<Vec(const Vec&)>& v, double eps) {
  if (!(eps > 0.0)) throw ConfigError("lderiv_fd: eps must be positive");
  mu.check();
  measure::WeightedCloud shifted = mu;
  Vec x(mu.dim());
  for (int i = 0; i < mu.size(); ++i) {
    x = mu.atoms.row(i);
    shifted.atoms.row(i) += (eps * v(x)).transpose();
  }
  return (calculus::eval_G(G, shifted) - calculus::eval_G(G, mu)) / eps;
}

double lderiv_pairing(const calculus::CylindricalFunctional& G,
                      const measure::WeightedCloud& mu,
                      const std::function<Vec(const Vec&)>& v) {
  mu.check();
  std::vector<double> vals(static_cast<size_t>(mu.size()));
  Vec x(mu.dim());
  for (int i = 0; i < mu.size(); ++i) {
    x = mu.atoms.row(i);
    vals[static_cast<size_t>(i)] = calculus::lderiv(G, mu, x).dot(v(x));
  }
  return measure::pair_values(mu, vals);
}

namespace {

// Probe a matrix coefficient on a small time/state lattice; the reference
// filters only exist for coefficient layouts where a channel vanishes.
bool probed_zero(const model::MatrixField& field, double horizon, int n) {
  Mat out(field.rows(), field.cols());
  Vec x(n);
  for (double t : {0.0, 0.5 * horizon, horizon}) {
    for (double c : {0.0, 1.0, -2.5}) {
      x.setConstant(c);
      field.eval(t, x, out);
      if (out.norm() != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

zakai::ZakaiPath reference_filter_cn(const model::SystemCorrelatedNoise& sys,
                                     const paths::TimeGrid& grid,
                                     const sde::DriverPath& wtilde,
                                     const zakai::InitialLaw& init,
                                     const zakai::SolverOptions& opt) {
  sys.check_dims();
  if (!probed_zero(sys.sigma1, grid.horizon, sys.n))
    throw UnsupportedInput(
        "reference_filter_cn: sigma1 must vanish (decoupled-noise case)");
  if (wtilde.grid.steps != grid.steps || int(wtilde.increments.cols()) != sys.m)
    throw ConfigError("reference_filter_cn: driver mismatch");
  if (init.dim() != sys.n)
    throw ConfigError("reference_filter_cn: initial law dimension mismatch");
  if (opt.particles < 1 || opt.snapshot_stride < 1)
    throw ConfigError("reference_filter_cn: bad options");

  const int N = opt.particles;
  const int J = grid.steps;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const paths::StreamKey base =
      paths::StreamKey(opt.seed).child("run", opt.run_index);

  Mat atoms(N, sys.n);
  Vec logw = Vec::Zero(N);
  std::vector<paths::NormalStream> noise;
  noise.reserve(size_t(N));
  for (int i = 0; i < N; ++i) {
    const auto pkey = base.child("particle", std::uint64_t(i));
    atoms.row(i) = init.sample(pkey.child("init", 0));
    noise.emplace_back(pkey.child("B", 0));
  }

  zakai::ZakaiPath out;
  out.grid = grid;
  auto snapshot = [&](int step) {
    measure::WeightedCloud cloud;
    cloud.atoms = atoms;
    cloud.weights = logw.array().exp();
    out.snapshot_steps.push_back(step);
    out.clouds.push_back(std::move(cloud));
  };
  snapshot(0);

  Vec x(sys.n), b1(sys.n), b2(sys.m), h(sys.m), db(sys.d), dwt(sys.m);
  Mat s0(sys.n, sys.d), s2(sys.m, sys.m);
  for (int j = 0; j < J; ++j) {
    const double t = j * dt;
    sys.sigma2.eval(t, s2);
    Eigen::PartialPivLU<Mat> lu(s2);
    dwt = wtilde.increments.row(j);
    for (int i = 0; i < N; ++i) {
      x = atoms.row(i);
      sys.b1.eval(t, x, b1);
      sys.b2.eval(t, x, b2);
      sys.sigma0.eval(t, x, s0);
      h = lu.solve(b2);
      logw[i] += h.dot(dwt) - 0.5 * h.squaredNorm() * dt;
      for (int k = 0; k < sys.d; ++k)
        db[k] = sqdt * noise[size_t(i)].at(std::uint64_t(j) * sys.d + k);
      x += b1 * dt + s0 * db;
      atoms.row(i) = x;
    }
    if ((j + 1) % opt.snapshot_stride == 0 || j + 1 == J) snapshot(j + 1);
  }
  out.min_ess = measure::effective_sample_size(out.clouds.back());
  return out;
}

zakai::ZakaiPath reference_filter_cs(const model::SystemCorrelatedSensor& sys,
                                     const paths::TimeGrid& grid,
                                     const sde::DriverPath& vtilde,
                                     const zakai::InitialLaw& init,
                                     const zakai::SolverOptions& opt) {
  sys.check_dims();
  if (sys.sigma2c.norm() != 0.0)
    throw UnsupportedInput(
        "reference_filter_cs: sigma2c must vanish (orthogonal-sensor case)");
  if (vtilde.grid.steps != grid.steps || int(vtilde.increments.cols()) != sys.m)
    throw ConfigError("reference_filter_cs: driver mismatch");
  if (init.dim() != sys.n)
    throw ConfigError("reference_filter_cs: initial law dimension mismatch");
  if (opt.particles < 1 || opt.snapshot_stride < 1)
    throw ConfigError("reference_filter_cs: bad options");

  const int N = opt.particles;
  const int J = grid.steps;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const paths::StreamKey base =
      paths::StreamKey(opt.seed).child("run", opt.run_index);

  Mat atoms(N, sys.n);
  Vec logw = Vec::Zero(N);
  std::vector<paths::NormalStream> noise;
  noise.reserve(size_t(N));
  for (int i = 0; i < N; ++i) {
    const auto pkey = base.child("particle", std::uint64_t(i));
    atoms.row(i) = init.sample(pkey.child("init", 0));
    noise.emplace_back(pkey.child("R", 0));
  }

  zakai::ZakaiPath out;
  out.grid = grid;
  auto snapshot = [&](int step) {
    measure::WeightedCloud cloud;
    cloud.atoms = atoms;
    cloud.weights = logw.array().exp();
    out.snapshot_steps.push_back(step);
    out.clouds.push_back(std::move(cloud));
  };
  snapshot(0);

  Vec x(sys.n), b1(sys.n), b2(sys.m), xi(sys.m), dvt(sys.m);
  Mat s1(sys.n, sys.m);
  for (int j = 0; j < J; ++j) {
    const double t = j * dt;
    dvt = vtilde.increments.row(j);
    for (int i = 0; i < N; ++i) {
      x = atoms.row(i);
      sys.b1c.eval(t, x, b1);
      sys.b2c.eval(t, x, b2);
      sys.sigma1c.eval(t, x, s1);
      logw[i] += b2.dot(dvt) - 0.5 * b2.squaredNorm() * dt;
      for (int k = 0; k < sys.m; ++k)
        xi[k] = sqdt * noise[size_t(i)].at(std::uint64_t(j) * sys.m + k);
      x += b1 * dt + s1 * xi;
      atoms.row(i) = x;
    }
    if ((j + 1) % opt.snapshot_stride == 0 || j + 1 == J) snapshot(j + 1);
  }
  out.min_ess = measure::effective_sample_size(out.clouds.back());
  return out;
}

}  // namespace zakailab::oracle
