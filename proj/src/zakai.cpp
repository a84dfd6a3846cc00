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
#include "zakailab/zakai.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

namespace zakailab::zakai {

InitialLaw InitialLaw::dirac(const Vec& point) {
  if (point.size() < 1) throw ConfigError("InitialLaw: empty point");
  InitialLaw law;
  law.kind_ = Kind::Dirac;
  law.center_ = point;
  return law;
}

InitialLaw InitialLaw::gaussian(const Vec& mean, const Mat& cov) {
  if (mean.size() < 1) throw ConfigError("InitialLaw: empty mean");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ConfigError("InitialLaw: covariance shape mismatch");
  if ((cov - cov.transpose()).norm() > 1e-12 * (1.0 + cov.norm()))
    throw ConfigError("InitialLaw: covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw FactorizationError("InitialLaw: covariance is not positive semidefinite");
  const Vec clamped = es.eigenvalues().cwiseMax(0.0);
  InitialLaw law;
  law.kind_ = Kind::Gaussian;
  law.center_ = mean;
  law.factor_ = es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
  return law;
}

InitialLaw InitialLaw::uniform_box(const Vec& center, const Vec& halfwidth) {
  if (center.size() < 1) throw ConfigError("InitialLaw: empty center");
  if (halfwidth.size() != center.size())
    throw ConfigError("InitialLaw: halfwidth shape mismatch");
  if ((halfwidth.array() < 0.0).any())
    throw ConfigError("InitialLaw: halfwidth must be nonnegative");
  InitialLaw law;
  law.kind_ = Kind::UniformBox;
  law.center_ = center;
  law.halfwidth_ = halfwidth;
  return law;
}

Vec InitialLaw::sample(const paths::StreamKey& key) const {
  const int n = dim();
  switch (kind_) {
    case Kind::Dirac:
      return center_;
    case Kind::Gaussian: {
      paths::NormalStream ns(key);
      Vec z(n);
      for (int k = 0; k < n; ++k) z[k] = ns.at(k);
      return center_ + factor_ * z;
    }
    case Kind::UniformBox: {
      paths::UniformStream us(key);
      Vec x(n);
      for (int k = 0; k < n; ++k)
        x[k] = center_[k] + halfwidth_[k] * (2.0 * us.at(k) - 1.0);
      return x;
    }
  }
  return center_;
}

bool ZakaiPath::dense() const {
  return int(snapshot_steps.size()) == grid.steps + 1;
}

const measure::WeightedCloud& ZakaiPath::at_step(int j) const {
  auto it = std::lower_bound(snapshot_steps.begin(), snapshot_steps.end(), j);
  if (it == snapshot_steps.end() || *it != j) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "ZakaiPath: no cloud stored at step %d", j);
    throw UnsupportedInput(buf);
  }
  return clouds[size_t(it - snapshot_steps.begin())];
}

namespace {

void validate_driver(const paths::TimeGrid& grid, const sde::DriverPath& driver,
                     int m, const char* who) {
  if (driver.grid.steps != grid.steps ||
      std::abs(driver.grid.horizon - grid.horizon) >
          1e-12 * std::max(1.0, grid.horizon))
    throw ConfigError(std::string(who) + ": driver grid does not match");
  if (int(driver.increments.cols()) != m)
    throw ConfigError(std::string(who) + ": driver channel count mismatch");
}

void validate_options(const SolverOptions& opt, const char* who) {
  if (opt.particles < 1)
    throw ConfigError(std::string(who) + ": need at least one particle");
  if (opt.snapshot_stride < 1)
    throw ConfigError(std::string(who) + ": snapshot stride must be >= 1");
  if (!(opt.max_coord > 0.0))
    throw ConfigError(std::string(who) + ": max_coord must be positive");
}

[[noreturn]] void throw_diverged(const char* who, int particle, int step,
                                 double t) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: particle %d diverged at step %d (t=%s)",
                who, particle, step, fmt_double(t).c_str());
  throw DivergenceError(buf);
}

struct SnapshotSink {
  ZakaiPath* out;
  double min_ess = std::numeric_limits<double>::infinity();

  void take(int step, const Mat& atoms, const Vec& logw) {
    measure::WeightedCloud cloud;
    cloud.atoms = atoms;
    cloud.weights = logw.array().exp();
    min_ess = std::min(min_ess, measure::effective_sample_size(cloud));
    out->snapshot_steps.push_back(step);
    out->clouds.push_back(std::move(cloud));
    out->min_ess = min_ess;
  }
};

}  // namespace

ZakaiPath solve_zakai_cn(const model::SystemCorrelatedNoise& sys,
                         const paths::TimeGrid& grid,
                         const sde::DriverPath& wtilde, const InitialLaw& init,
                         const SolverOptions& opt) {
  sys.check_dims();
  validate_driver(grid, wtilde, sys.m, "solve_zakai_cn");
  validate_options(opt, "solve_zakai_cn");
  if (init.dim() != sys.n)
    throw ConfigError("solve_zakai_cn: initial law dimension mismatch");

  const int N = opt.particles;
  const int J = grid.steps;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const double max_sq = opt.max_coord * opt.max_coord;

  const paths::StreamKey base =
      paths::StreamKey(opt.seed).child("run", opt.run_index);
  Mat atoms(N, sys.n);
  Vec logw = Vec::Zero(N);
  std::vector<paths::NormalStream> noise;
  noise.reserve(size_t(N));
  for (int i = 0; i < N; ++i) {
    const paths::StreamKey pkey = base.child("particle", std::uint64_t(i));
    atoms.row(i) = init.sample(pkey.child("init", 0));
    noise.emplace_back(pkey.child("B", 0));
  }

  ZakaiPath out;
  out.grid = grid;
  SnapshotSink sink{&out};
  sink.take(0, atoms, logw);

  sde::CnStepper stepper(sys);
  Vec x(sys.n), db(sys.d), dwt(sys.m);
  for (int j = 0; j < J; ++j) {
    const double t = j * dt;
    stepper.set_time(t);
    dwt = wtilde.increments.row(j);
    for (int i = 0; i < N; ++i) {
      x = atoms.row(i);
      for (int k = 0; k < sys.d; ++k)
        db[k] = sqdt * noise[size_t(i)].at(j * sys.d + k);
      logw[i] += stepper.step(t, x, dwt, db, dt);
      if (!(x.squaredNorm() <= max_sq))
        throw_diverged("solve_zakai_cn", i, j + 1, t + dt);
      atoms.row(i) = x;
    }
    if ((j + 1) % opt.snapshot_stride == 0 || j + 1 == J)
      sink.take(j + 1, atoms, logw);
  }
  return out;
}

ZakaiPath solve_zakai_cs(const model::SystemCorrelatedSensor& sys,
                         const paths::TimeGrid& grid,
                         const sde::DriverPath& vtilde, const InitialLaw& init,
                         const SolverOptions& opt) {
  sys.check_dims();
  validate_driver(grid, vtilde, sys.m, "solve_zakai_cs");
  validate_options(opt, "solve_zakai_cs");
  if (init.dim() != sys.n)
    throw ConfigError("solve_zakai_cs: initial law dimension mismatch");

  const int N = opt.particles;
  const int J = grid.steps;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const double max_sq = opt.max_coord * opt.max_coord;

  const paths::StreamKey base =
      paths::StreamKey(opt.seed).child("run", opt.run_index);
  Mat atoms(N, sys.n);
  Vec logw = Vec::Zero(N);
  std::vector<paths::NormalStream> noise;
  noise.reserve(size_t(N));
  for (int i = 0; i < N; ++i) {
    const paths::StreamKey pkey = base.child("particle", std::uint64_t(i));
    atoms.row(i) = init.sample(pkey.child("init", 0));
    noise.emplace_back(pkey.child("R", 0));
  }

  ZakaiPath out;
  out.grid = grid;
  SnapshotSink sink{&out};
  sink.take(0, atoms, logw);

  sde::CsStepper stepper(sys);
  Vec x(sys.n), xi(sys.m), dvt(sys.m);
  for (int j = 0; j < J; ++j) {
    const double t = j * dt;
    dvt = vtilde.increments.row(j);
    for (int i = 0; i < N; ++i) {
      x = atoms.row(i);
      for (int k = 0; k < sys.m; ++k)
        xi[k] = sqdt * noise[size_t(i)].at(j * sys.m + k);
      logw[i] += stepper.step(t, x, dvt, xi, dt);
      if (!(x.squaredNorm() <= max_sq))
        throw_diverged("solve_zakai_cs", i, j + 1, t + dt);
      atoms.row(i) = x;
    }
    if ((j + 1) % opt.snapshot_stride == 0 || j + 1 == J)
      sink.take(j + 1, atoms, logw);
  }
  return out;
}

namespace {

template <typename LiftFn>
ItoResidual ito_residual(const calculus::CylindricalFunctional& G,
                         const ZakaiPath& path, const sde::DriverPath& driver,
                         LiftFn&& lift_at) {
  if (!path.dense())
    throw UnsupportedInput(
        "pathwise_ito_residual: needs a dense path (snapshot_stride 1)");
  if (driver.grid.steps != path.grid.steps)
    throw ConfigError("pathwise_ito_residual: driver grid mismatch");
  const int J = path.grid.steps;
  const double dt = path.grid.dt();

  ItoResidual out;
  Vec dwt(driver.increments.cols());
  for (int j = 0; j < J; ++j) {
    const calculus::LiftEvaluation ev =
        lift_at(j * dt, path.clouds[size_t(j)]);
    if (j == 0) out.g_initial = G.g.value(ev.z);
    out.drift_integral += ev.value * dt;
    dwt = driver.increments.row(j);
    out.driver_integral += ev.loading.dot(dwt);
  }
  out.g_final = calculus::eval_G(G, path.clouds.back());
  out.value =
      out.g_final - out.g_initial - out.drift_integral - out.driver_integral;
  return out;
}

// trapezoid over the stored snapshot times of per-snapshot pairings
template <typename PairingFn>
double snapshot_trapezoid(const ZakaiPath& path, PairingFn&& pairing) {
  const int K = path.snapshots();
  if (K < 2) throw UnsupportedInput("audit: need at least two snapshots");
  std::vector<double> vals(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k)
    vals[size_t(k)] = pairing(path.time_of(k), path.clouds[size_t(k)]);
  double acc = 0.0;
  for (int k = 0; k + 1 < K; ++k)
    acc += 0.5 * (vals[size_t(k)] + vals[size_t(k + 1)]) *
           (path.time_of(k + 1) - path.time_of(k));
  return acc;
}

}  // namespace

ItoResidual pathwise_ito_residual_cn(const model::SystemCorrelatedNoise& sys,
                                     const calculus::CylindricalFunctional& G,
                                     const ZakaiPath& path,
                                     const sde::DriverPath& wtilde) {
  return ito_residual(G, path, wtilde,
                      [&](double t, const measure::WeightedCloud& mu) {
                        return calculus::lift_eval_cn(sys, t, G, mu);
                      });
}

ItoResidual pathwise_ito_residual_cs(const model::SystemCorrelatedSensor& sys,
                                     const calculus::CylindricalFunctional& G,
                                     const ZakaiPath& path,
                                     const sde::DriverPath& vtilde) {
  return ito_residual(G, path, vtilde,
                      [&](double t, const measure::WeightedCloud& mu) {
                        return calculus::lift_eval_cs(sys, t, G, mu);
                      });
}

double integrability_audit_cn(const model::SystemCorrelatedNoise& sys,
                              const ZakaiPath& path) {
  Vec b1(sys.n), b2(sys.m), h(sys.m);
  Mat s0(sys.n, sys.d), s1(sys.n, sys.m), s2inv(sys.m, sys.m);
  return snapshot_trapezoid(
      path, [&](double t, const measure::WeightedCloud& mu) {
        s2inv = model::sigma2_inverse(sys, t);
        const int N = mu.size();
        std::vector<double> vals(static_cast<size_t>(N));
        Vec x(mu.dim());
        for (int i = 0; i < N; ++i) {
          x = mu.atoms.row(i);
          sys.b1.eval(t, x, b1);
          sys.b2.eval(t, x, b2);
          h.noalias() = s2inv * b2;
          sys.sigma0.eval(t, x, s0);
          sys.sigma1.eval(t, x, s1);
          vals[static_cast<size_t>(i)] = b1.norm() + h.squaredNorm() +
                                         s1.squaredNorm() +
                                         (s0 * s0.transpose()).norm();
        }
        return measure::pair_values(mu, vals);
      });
}

double integrability_audit_cs(const model::SystemCorrelatedSensor& sys,
                              const ZakaiPath& path) {
  Vec b1(sys.n), b2(sys.m);
  Mat s1(sys.n, sys.m);
  return snapshot_trapezoid(
      path, [&](double t, const measure::WeightedCloud& mu) {
        const int N = mu.size();
        std::vector<double> vals(static_cast<size_t>(N));
        Vec x(mu.dim());
        for (int i = 0; i < N; ++i) {
          x = mu.atoms.row(i);
          sys.b1c.eval(t, x, b1);
          sys.b2c.eval(t, x, b2);
          sys.sigma1c.eval(t, x, s1);
          vals[static_cast<size_t>(i)] =
              b1.norm() + s1.squaredNorm() + b2.squaredNorm();
        }
        return measure::pair_values(mu, vals);
      });
}

}  // namespace zakailab::zakai
