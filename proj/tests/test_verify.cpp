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
#include <doctest.h>

#include <cmath>

#include "zakailab/oracle.hpp"
#include "zakailab/sde.hpp"
#include "zakailab/verify.hpp"

using namespace zakailab;
using calculus::CylinderFunctionRInf;
using calculus::Dictionary;
using calculus::OuterFunction;
using verify::BatteryItem;
using verify::EnsembleLaw;
using verify::EnsembleOptions;
using verify::TestMartFunctional;

namespace {

// 1-D signal with bounded observation drift: the workhorse benchmark.
model::SystemCorrelatedNoise bounded_h_system() {
  model::SystemCorrelatedNoise sys;
  sys.n = 1;
  sys.m = 1;
  sys.d = 1;
  sys.b1 = model::VectorField::affine(Mat::Constant(1, 1, -1.0), Vec::Zero(1));
  sys.sigma0 = model::MatrixField::constant(Mat::Constant(1, 1, 0.5), 1);
  sys.sigma1 = model::MatrixField::constant(Mat::Constant(1, 1, 0.3), 1);
  sys.b2 = model::VectorField::affine_tanh(Mat::Zero(1, 1), Vec::Zero(1),
                                           Mat::Constant(1, 1, 0.8));
  sys.sigma2 = model::TimeMatrix::constant(Mat::Identity(1, 1));
  sys.check_dims();
  return sys;
}

model::SystemCorrelatedSensor bounded_sensor_system() {
  model::SystemCorrelatedSensor sys;
  sys.n = 1;
  sys.m = 1;
  sys.d = 1;
  sys.b1c = model::VectorField::affine(Mat::Constant(1, 1, -1.0), Vec::Zero(1));
  sys.sigma1c = model::MatrixField::constant(Mat::Constant(1, 1, 0.4), 1);
  sys.b2c = model::VectorField::affine_tanh(Mat::Zero(1, 1), Vec::Zero(1),
                                            Mat::Constant(1, 1, 0.7));
  sys.sigma2c = Mat::Constant(1, 1, 0.6);
  sys.sigma3c = Mat::Constant(1, 1, 0.8);
  sys.check_dims();
  return sys;
}

model::SystemCorrelatedNoise frozen_system() {
  model::SystemCorrelatedNoise sys;
  sys.n = 1;
  sys.m = 1;
  sys.d = 1;
  sys.b1 = model::VectorField::zero(1, 1);
  sys.sigma0 = model::MatrixField::zero(1, 1, 1);
  sys.sigma1 = model::MatrixField::zero(1, 1, 1);
  sys.b2 = model::VectorField::zero(1, 1);
  sys.sigma2 = model::TimeMatrix::constant(Mat::Identity(1, 1));
  sys.check_dims();
  return sys;
}

Dictionary dict1d(double R = 8.0) { return Dictionary::standard(1, {R}, 3); }

bool same_runs(const EnsembleLaw& a, const EnsembleLaw& b) {
  if (a.size() != b.size() || a.eval_count() != b.eval_count()) return false;
  for (int r = 0; r < a.size(); ++r) {
    const auto& x = a.runs[size_t(r)];
    const auto& y = b.runs[size_t(r)];
    if (x.z != y.z || x.beta != y.beta || x.mass != y.mass ||
        x.audit != y.audit)
      return false;
    for (size_t k = 0; k < x.alpha.size(); ++k)
      if (x.alpha[k] != y.alpha[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("ensemble builder: schedule, determinism, thread independence") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  paths::TimeGrid grid{0.5, 40};
  EnsembleOptions opt;
  opt.runs = 6;
  opt.particles = 32;
  opt.seed = 31;
  opt.eval_stride = 4;

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);
  CHECK(ens.size() == 6);
  CHECK(ens.variant == "cn");
  CHECK(ens.eval_count() == 11);
  CHECK(ens.eval_steps.front() == 0);
  CHECK(ens.eval_steps.back() == 40);
  CHECK(ens.times[1] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(ens.eval_index(0.5) == 10);
  CHECK_THROWS_AS(ens.eval_index(0.512), UnsupportedInput);

  auto again = verify::build_ensemble_cn(sys, grid, dict, init, opt);
  CHECK(same_runs(ens, again));

  EnsembleOptions threaded = opt;
  threaded.threads = 3;
  auto par = verify::build_ensemble_cn(sys, grid, dict, init, threaded);
  CHECK(same_runs(ens, par));

  EnsembleOptions reseeded = opt;
  reseeded.seed = 32;
  auto other = verify::build_ensemble_cn(sys, grid, dict, init, reseeded);
  CHECK_FALSE(same_runs(ens, other));

  EnsembleOptions bad = opt;
  bad.runs = 1;
  CHECK_THROWS_AS(verify::build_ensemble_cn(sys, grid, dict, init, bad),
                  ConfigError);
  bad = opt;
  bad.coarsen = 3;  // does not divide eval_stride = 4
  CHECK_THROWS_AS(verify::build_ensemble_cn(sys, grid, dict, init, bad),
                  ConfigError);
}

TEST_CASE("stored observables agree with the coefficient code paths") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  paths::TimeGrid grid{0.4, 20};
  EnsembleOptions opt;
  opt.runs = 3;
  opt.particles = 24;
  opt.seed = 77;
  opt.eval_stride = 5;

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);

  // replay run 1 through the solver and compare against the generic
  // coefficient evaluators from the functional-calculus layer
  auto driver = sde::synthetic_driver(grid, sys.m,
                                      paths::StreamKey(77).child("driver", 1));
  zakai::SolverOptions sopt;
  sopt.particles = 24;
  sopt.seed = 77;
  sopt.run_index = 1;
  sopt.snapshot_stride = 5;
  auto path = zakai::solve_zakai_cn(sys, grid, driver, init, sopt);

  const auto& run = ens.runs[1];
  REQUIRE(path.snapshots() == ens.eval_count());
  for (int k = 0; k < path.snapshots(); ++k) {
    const double t = path.time_of(k);
    const auto& mu = path.clouds[size_t(k)];
    for (int u = 0; u < dict.size(); ++u) {
      const double zu =
          measure::pair(mu, [&](const Vec& x) { return dict[u].value(x); });
      CHECK(run.z(k, u) == doctest::Approx(zu).epsilon(1e-14));
      CHECK(run.beta(k, u) ==
            doctest::Approx(calculus::coeff_beta(sys, t, mu, dict, u))
                .epsilon(1e-13));
    }
    const Mat alpha = calculus::coeff_alpha_matrix(sys, t, mu, dict, 3);
    CHECK((run.alpha[size_t(k)] - alpha).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(run.mass[k] == doctest::Approx(measure::mass(mu)).epsilon(1e-15));
  }

  // the ensemble audit is the run-average of the per-path audit
  double acc = 0.0;
  for (int r = 0; r < 3; ++r) {
    auto d = sde::synthetic_driver(
        grid, sys.m, paths::StreamKey(77).child("driver", std::uint64_t(r)));
    zakai::SolverOptions so = sopt;
    so.run_index = r;
    acc += zakai::integrability_audit_cn(sys,
                                         zakai::solve_zakai_cn(sys, grid, d,
                                                               init, so));
  }
  auto audit = verify::fpe_integrability_audit(ens, 100.0);
  CHECK(audit.value == doctest::Approx(acc / 3.0).epsilon(1e-12));
  CHECK(audit.value <= 2.0 * (acc / 3.0));
  CHECK(audit.value >= 0.5 * (acc / 3.0));
  CHECK(audit.pass);
  CHECK_FALSE(verify::fpe_integrability_audit(ens, audit.value * 0.5).pass);
}

TEST_CASE("sensor observables agree with the sensor coefficient evaluators") {
  auto sys = bounded_sensor_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::uniform_box(Vec::Zero(1), Vec::Constant(1, 1.0));
  paths::TimeGrid grid{0.3, 12};
  EnsembleOptions opt;
  opt.runs = 2;
  opt.particles = 20;
  opt.seed = 5;
  opt.eval_stride = 3;

  auto ens = verify::build_ensemble_cs(sys, grid, dict, init, opt);
  CHECK(ens.variant == "cs");

  auto driver = sde::synthetic_driver(grid, sys.m,
                                      paths::StreamKey(5).child("driver", 0));
  zakai::SolverOptions sopt;
  sopt.particles = 20;
  sopt.seed = 5;
  sopt.run_index = 0;
  sopt.snapshot_stride = 3;
  auto path = zakai::solve_zakai_cs(sys, grid, driver, init, sopt);

  const auto& run = ens.runs[0];
  for (int k = 0; k < path.snapshots(); ++k) {
    const double t = path.time_of(k);
    const auto& mu = path.clouds[size_t(k)];
    for (int u = 0; u < dict.size(); ++u)
      CHECK(run.beta(k, u) ==
            doctest::Approx(calculus::coeff_beta_sensor(sys, t, mu, dict, u))
                .epsilon(1e-13));
    const Mat alpha = calculus::coeff_alpha_matrix_sensor(sys, t, mu, dict, 3);
    CHECK((run.alpha[size_t(k)] - alpha).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("frozen ensemble: all residuals vanish identically") {
  auto sys = frozen_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::uniform_box(Vec::Zero(1), Vec::Constant(1, 1.0));
  paths::TimeGrid grid{1.0, 20};
  EnsembleOptions opt;
  opt.runs = 4;
  opt.particles = 16;
  opt.seed = 9;
  opt.eval_stride = 5;

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);
  for (const auto& item : verify::standard_battery(dict)) {
    auto rep = verify::fpe_residual(ens, item, 1.0, 0.0);
    CHECK(rep.residual == 0.0);
    CHECK(rep.std_error == 0.0);
    CHECK(rep.pass);
  }

  CylinderFunctionRInf Phi{2, OuterFunction::bilinear(2, 0, 1)};
  auto mrep = verify::martingale_residual(ens, Phi, TestMartFunctional::one(),
                                          0.25, 1.0, 0.0);
  CHECK(mrep.residual == 0.0);
  CHECK(mrep.pass);
  CHECK(mrep.gram_min_eig == 0.0);  // alpha == 0 for zero coefficients

  auto mass = verify::mass_check(ens, 1.0);
  CHECK(mass.residual == 0.0);
  CHECK(mass.std_error == 0.0);
  CHECK(mass.pass);

  auto audit = verify::fpe_integrability_audit(ens, 1e-12);
  CHECK(audit.value == 0.0);
  CHECK(audit.pass);
}

TEST_CASE("linear coordinate: fpe and martingale residuals coincide exactly") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.2));
  paths::TimeGrid grid{0.5, 50};
  EnsembleOptions opt;
  opt.runs = 8;
  opt.particles = 40;
  opt.seed = 1234;
  opt.eval_stride = 5;

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);
  for (int u = 0; u < 3; ++u) {
    BatteryItem item{OuterFunction::linear(1, 0), {u}, "lin"};
    auto fpe = verify::fpe_residual(ens, item, 0.5, 0.0);

    CylinderFunctionRInf Phi{u + 1, OuterFunction::linear(u + 1, u)};
    auto mart = verify::martingale_residual(
        ens, Phi, TestMartFunctional::one(), 0.0, 0.5, 0.0);

    CHECK(std::abs(fpe.residual - mart.residual) <= 1e-12);
    CHECK(std::abs(fpe.std_error - mart.std_error) <= 1e-12);
    CHECK(fpe.residual != 0.0);  // non-vacuous
  }
}

TEST_CASE("classical linear case: weak form and moment oracle agree") {
  // no observation coupling (h = 0, sigma1 = 0): the filter ensemble is a
  // plain signal Monte Carlo and <mu_t, x chi> tracks the moment equation
  model::SystemCorrelatedNoise sys;
  sys.n = 1;
  sys.m = 1;
  sys.d = 1;
  sys.b1 = model::VectorField::affine(Mat::Constant(1, 1, -1.0), Vec::Zero(1));
  sys.sigma0 = model::MatrixField::constant(Mat::Constant(1, 1, 0.4), 1);
  sys.sigma1 = model::MatrixField::zero(1, 1, 1);
  sys.b2 = model::VectorField::zero(1, 1);
  sys.sigma2 = model::TimeMatrix::constant(Mat::Identity(1, 1));
  sys.check_dims();

  auto dict = dict1d(12.0);
  auto init = zakai::InitialLaw::dirac(Vec::Constant(1, 0.3));
  paths::TimeGrid grid{0.5, 100};
  EnsembleOptions opt;
  opt.runs = 48;
  opt.particles = 64;
  opt.seed = 2024;
  opt.eval_stride = 5;

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);

  BatteryItem first{OuterFunction::linear(1, 0), {1}, "lin x"};
  auto rep = verify::fpe_residual(ens, first, 0.5, 1.0 * grid.dt());
  CHECK(rep.pass);

  auto mc = oracle::moment_ode_oracle(Mat::Constant(1, 1, -1.0),
                                      Mat::Constant(1, 1, 0.16), grid,
                                      Vec::Constant(1, 0.3), Mat::Zero(1, 1));
  const int it = ens.eval_index(0.5);
  Vec z1(ens.size());
  for (int r = 0; r < ens.size(); ++r) z1[r] = ens.runs[size_t(r)].z(it, 1);
  const double mean = z1.mean();
  double var = 0.0;
  for (int r = 0; r < ens.size(); ++r) var += (z1[r] - mean) * (z1[r] - mean);
  const double se = std::sqrt(var / (ens.size() - 1)) / std::sqrt(double(ens.size()));
  CHECK(std::abs(mean - mc.means(100, 0)) <= 4.0 * se + 2e-3);
}

TEST_CASE("bounded-h benchmark: mass martingale and generic residuals pass") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  paths::TimeGrid grid{0.5, 100};
  EnsembleOptions opt;
  opt.runs = 64;
  opt.particles = 64;
  opt.seed = 7;
  opt.eval_stride = 5;

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);

  auto mass = verify::mass_check(ens, 0.5);
  CHECK(mass.std_error > 0.0);
  CHECK(mass.pass);

  // h == 0 makes the mass exactly one with zero spread
  auto zero_obs = sys;
  zero_obs.b2 = model::VectorField::zero(1, 1);
  auto flat = verify::build_ensemble_cn(zero_obs, grid, dict, init, opt);
  auto fmass = verify::mass_check(flat, 0.5);
  CHECK(fmass.residual == 0.0);
  CHECK(fmass.std_error == 0.0);

  // martingale residual with a bona fide conditioning functional
  CylinderFunctionRInf Phi{3, OuterFunction::tanh_affine(
                                  (Vec(3) << 0.5, -0.8, 0.4).finished(), 0.0)};
  TestMartFunctional chi{{0.1, 0.25}, {1, 2}};
  auto mrep = verify::martingale_residual(ens, Phi, chi, 0.25, 0.5,
                                          2.0 * grid.dt());
  CHECK(mrep.gram_min_eig >= -1e-10);
  CHECK(mrep.pass);
  for (int r = 0; r < ens.size(); ++r) {
    const double cv = chi.value(ens, ens.runs[size_t(r)]);
    CHECK(cv >= -1.0);
    CHECK(cv <= 1.0);
  }

  // conditioning on the future is a filtration violation
  TestMartFunctional late{{0.3}, {1}};
  CHECK_THROWS_AS(
      verify::martingale_residual(ens, Phi, late, 0.25, 0.5, 0.0), ConfigError);
  CHECK_THROWS_AS(
      verify::martingale_residual(ens, Phi, chi, 0.5, 0.25, 0.0), ConfigError);
}

TEST_CASE("standard battery and the 95 percent rule on a generic scenario") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  paths::TimeGrid grid{0.5, 50};
  EnsembleOptions opt;
  opt.runs = 48;
  opt.particles = 48;
  opt.seed = 99;
  opt.eval_stride = 5;

  auto battery = verify::standard_battery(dict);
  CHECK(battery.size() == 8);

  auto ens = verify::build_ensemble_cn(sys, grid, dict, init, opt);
  int passed = 0, total = 0;
  for (const auto& item : battery)
    for (double t : {0.25, 0.5}) {
      auto rep = verify::fpe_residual(ens, item, t, 4.0 * grid.dt());
      passed += rep.pass ? 1 : 0;
      ++total;
    }
  CHECK(total == 16);
  CHECK(double(passed) >= 0.95 * double(total));

  CHECK_THROWS_AS(verify::standard_battery(Dictionary::standard(1, {4.0}, 2)),
                  ConfigError);
}

TEST_CASE("standard error shrinks like the square root of the run count") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  paths::TimeGrid grid{0.4, 32};
  BatteryItem item{OuterFunction::bilinear(1, 0, 0), {1}, "quad"};

  EnsembleOptions small;
  small.runs = 24;
  small.particles = 32;
  small.seed = 555;
  small.eval_stride = 4;
  EnsembleOptions big = small;
  big.runs = 96;

  auto se_of = [&](const EnsembleOptions& o) {
    auto ens = verify::build_ensemble_cn(sys, grid, dict, init, o);
    return verify::fpe_residual(ens, item, 0.4, 0.0).std_error;
  };
  const double ratio = se_of(small) / se_of(big);
  CHECK(ratio > 2.0 / 1.5);
  CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("refinement calibration couples the randomness across resolutions") {
  auto sys = bounded_h_system();
  auto dict = dict1d();
  auto init = zakai::InitialLaw::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  paths::TimeGrid grid{0.5, 64};
  EnsembleOptions opt;
  opt.runs = 16;
  opt.particles = 32;
  opt.seed = 404;
  opt.eval_stride = 8;

  auto fine = verify::build_ensemble_cn(sys, grid, dict, init, opt);
  EnsembleOptions copt = opt;
  copt.coarsen = 2;
  auto coarse = verify::build_ensemble_cn(sys, grid, dict, init, copt);

  CHECK(coarse.grid.steps == 32);
  REQUIRE(coarse.eval_count() == fine.eval_count());
  CHECK((coarse.times - fine.times).cwiseAbs().maxCoeff() <= 1e-12);

  std::vector<verify::ResidualReport> rf, rc;
  for (const auto& item : verify::standard_battery(dict)) {
    rf.push_back(verify::fpe_residual(fine, item, 0.5, 0.0));
    rc.push_back(verify::fpe_residual(coarse, item, 0.5, 0.0));
  }
  auto cal = verify::calibrate_allowance(rf, rc, grid.dt(), 2);
  CHECK(cal.C >= 0.0);
  CHECK(cal.allowance == doctest::Approx(cal.C * grid.dt()).epsilon(1e-15));

  // shared drivers: residual shift is far below the residual spread, so the
  // allowance stays comparable to (not orders above) the statistical error
  double worst_scale = 0.0;
  for (const auto& rep : rf) worst_scale = std::max(worst_scale, 3.0 * rep.std_error);
  CHECK(cal.allowance <= 5.0 * worst_scale);

  rc.pop_back();
  CHECK_THROWS_AS(verify::calibrate_allowance(rf, rc, grid.dt(), 2), ConfigError);
  rc = rf;
  CHECK_THROWS_AS(verify::calibrate_allowance(rf, rc, grid.dt(), 1), ConfigError);
}
