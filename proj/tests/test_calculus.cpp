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
#include <vector>

#include "zakailab/calculus.hpp"
#include "zakailab/measure.hpp"
#include "zakailab/model.hpp"
#include "zakailab/paths.hpp"

using namespace zakailab;
using calculus::CylindricalFunctional;
using calculus::Dictionary;
using calculus::OuterFunction;
using calculus::TestFunction;
using measure::WeightedCloud;

namespace {

Vec fd_gradient(const TestFunction& phi, const Vec& x, double h) {
  Vec g(x.size());
  for (int k = 0; k < int(x.size()); ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (phi.value(xp) - phi.value(xm)) / (2.0 * h);
  }
  return g;
}

Mat fd_hessian(const TestFunction& phi, const Vec& x, double h) {
  const int n = int(x.size());
  Mat H(n, n);
  for (int k = 0; k < n; ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    H.col(k) = (phi.gradient(xp) - phi.gradient(xm)) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

// deterministic point at radius rho along a pseudo-random direction
Vec point_at_radius(int n, double rho, paths::NormalStream& ns, int& idx) {
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = ns.at(idx++);
  if (v.norm() < 1e-12) v.setOnes();
  return rho * v / v.norm();
}

WeightedCloud cloud_from(const std::vector<Vec>& pts) {
  const int n = int(pts.front().size());
  Mat atoms(int(pts.size()), n);
  for (int i = 0; i < int(pts.size()); ++i) atoms.row(i) = pts[size_t(i)];
  return WeightedCloud::uniform(atoms);
}

WeightedCloud random_cloud(int N, int n, double scale, std::uint64_t seed,
                           int run) {
  paths::StreamKey key(seed);
  paths::NormalStream ns(key.child("cloud", std::uint64_t(run)));
  Mat atoms(N, n);
  int idx = 0;
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < n; ++k) atoms(i, k) = scale * ns.at(idx++);
  return WeightedCloud::uniform(atoms);
}

model::SystemCorrelatedNoise zero_system_with_flat_sensor(double level) {
  model::SystemCorrelatedNoise sys;
  sys.n = 1;
  sys.m = 1;
  sys.d = 1;
  sys.b1 = model::VectorField::zero(1, 1);
  sys.sigma0 = model::MatrixField::zero(1, 1, 1);
  sys.sigma1 = model::MatrixField::zero(1, 1, 1);
  sys.b2 = model::VectorField::constant(Vec::Constant(1, level), 1);
  sys.sigma2 = model::TimeMatrix::constant(Mat::Identity(1, 1));
  sys.check_dims();
  return sys;
}

// two-dimensional signal, two observation channels, nontrivial everything
model::SystemCorrelatedNoise rich_cn_system(bool with_b2) {
  model::SystemCorrelatedNoise sys;
  sys.n = 2;
  sys.m = 2;
  sys.d = 1;
  Mat A(2, 2);
  A << -0.5, 0.2, -0.1, -0.7;
  Mat P(2, 2);
  P << 0.3, 0.0, -0.2, 0.1;
  sys.b1 = model::VectorField::affine_tanh(A, Vec::Zero(2), P);
  Mat S0(2, 1), S0b(2, 1);
  S0 << 0.4, 0.1;
  S0b << 0.1, -0.05;
  Vec dir(2);
  dir << 0.6, -0.3;
  sys.sigma0 = model::MatrixField::tanh_scaled(S0, S0b, dir);
  Mat S1(2, 2);
  S1 << 0.3, 0.05, -0.1, 0.25;
  sys.sigma1 = model::MatrixField::constant(S1, 2);
  if (with_b2) {
    Mat C(2, 2);
    C << 0.8, 0.0, 0.3, 0.5;
    sys.b2 = model::VectorField::affine(C, Vec::Zero(2));
  } else {
    sys.b2 = model::VectorField::zero(2, 2);
  }
  Mat S2(2, 2);
  S2 << 1.2, 0.1, 0.0, 0.9;
  sys.sigma2 = model::TimeMatrix::constant(S2);
  sys.check_dims();
  return sys;
}

model::SystemCorrelatedSensor rich_cs_system(bool with_b2) {
  model::SystemCorrelatedSensor sys;
  sys.n = 2;
  sys.m = 1;
  sys.d = 1;
  Mat A(2, 2);
  A << -0.6, 0.1, 0.0, -0.4;
  sys.b1c = model::VectorField::affine(A, Vec::Zero(2));
  Mat S1(2, 1);
  S1 << 0.35, -0.2;
  sys.sigma1c = model::MatrixField::constant(S1, 2);
  if (with_b2) {
    Mat C(1, 2);
    C << 0.7, -0.4;
    sys.b2c = model::VectorField::affine(C, Vec::Zero(1));
  } else {
    sys.b2c = model::VectorField::zero(1, 2);
  }
  sys.sigma2c = Mat::Constant(1, 1, 0.6);
  sys.sigma3c = Mat::Constant(1, 1, 0.8);
  sys.check_dims();
  return sys;
}

}  // namespace

TEST_CASE("plateau bump: plateau, support, seams") {
  const double R = 2.0;
  auto chi = TestFunction::constant(3, R);

  Vec x = Vec::Zero(3);
  CHECK(chi.value(x) == 1.0);
  x << 0.5, -0.3, 0.4;  // |x| < R/2
  CHECK(chi.value(x) == 1.0);
  CHECK(chi.gradient(x).norm() == 0.0);
  CHECK(chi.hessian(x).norm() == 0.0);

  // exactly on the inner seam and just past it
  x << 1.0, 0.0, 0.0;
  CHECK(chi.value(x) == 1.0);
  x[0] = 1.0 + 1e-12;
  CHECK(chi.value(x) == 1.0);  // transition weight underflows to the plateau
  CHECK(std::abs(chi.gradient(x)[0]) <= 1e-12);

  // transition is strictly decreasing in radius
  auto radial = [&](double r) {
    Vec p = Vec::Zero(3);
    p[0] = r;
    return chi.value(p);
  };
  CHECK(radial(1.2) > radial(1.5));
  CHECK(radial(1.5) > radial(1.8));
  CHECK(radial(1.5) == doctest::Approx(0.5).epsilon(1e-12));  // symmetry point

  // outside: identically zero including derivatives
  x << 2.0, 0.0, 0.0;
  CHECK(chi.value(x) == 0.0);
  x << 1.5, 1.5, 0.0;
  CHECK(chi.value(x) == 0.0);
  CHECK(chi.gradient(x).norm() == 0.0);
  CHECK(chi.hessian(x).norm() == 0.0);
  x << 2.0 - 1e-12, 0.0, 0.0;
  CHECK(chi.value(x) <= 1e-12);

  // radial symmetry
  Vec a(3), b(3);
  a << 1.3, 0.2, -0.4;
  b << -0.2, 1.3, 0.4;
  CHECK(chi.value(a) == doctest::Approx(chi.value(b)).epsilon(1e-15));
}

TEST_CASE("plateau bump: analytic derivatives match finite differences") {
  const double R = 2.0;
  const int n = 3;
  paths::StreamKey key(2026);
  paths::NormalStream ns(key.child("fd-points", 0));
  int idx = 0;

  std::vector<TestFunction> phis = {
      TestFunction::constant(n, R), TestFunction::coordinate(n, 1, R),
      TestFunction::pair_product(n, 0, 2, R),
      TestFunction::pair_product(n, 1, 1, R)};

  const double h = 1e-5;
  for (const auto& phi : phis) {
    for (double rho : {0.3, 0.55, 0.62, 0.75, 0.83, 0.95, 0.99, 1.3}) {
      Vec x = point_at_radius(n, rho * R, ns, idx);
      const Vec g = phi.gradient(x);
      const Mat H = phi.hessian(x);
      const Vec g_fd = fd_gradient(phi, x, h);
      const Mat H_fd = fd_hessian(phi, x, h);
      for (int k = 0; k < n; ++k)
        CHECK(g[k] == doctest::Approx(g_fd[k]).epsilon(5e-6).scale(1.0));
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          CHECK(H(r, c) == doctest::Approx(H_fd(r, c)).epsilon(5e-6).scale(1.0));
    }
  }
}

TEST_CASE("plateau bump: polynomial parts are exact on the plateau") {
  const double R = 10.0;  // plateau covers |x| <= 5
  const int n = 2;
  Vec x(2);
  x << 1.5, -2.0;

  auto xi = TestFunction::coordinate(n, 0, R);
  CHECK(xi.value(x) == 1.5);
  CHECK(xi.gradient(x)[0] == 1.0);
  CHECK(xi.gradient(x)[1] == 0.0);
  CHECK(xi.hessian(x).norm() == 0.0);

  auto xij = TestFunction::pair_product(n, 0, 1, R);
  CHECK(xij.value(x) == doctest::Approx(-3.0).epsilon(1e-15));
  CHECK(xij.gradient(x)[0] == -2.0);
  CHECK(xij.gradient(x)[1] == 1.5);
  CHECK(xij.hessian(x)(0, 1) == 1.0);
  CHECK(xij.hessian(x)(1, 0) == 1.0);
  CHECK(xij.hessian(x)(0, 0) == 0.0);

  auto xii = TestFunction::pair_product(n, 1, 1, R);
  CHECK(xii.value(x) == 4.0);
  CHECK(xii.gradient(x)[1] == -4.0);
  CHECK(xii.hessian(x)(1, 1) == 2.0);
}

TEST_CASE("test function validation") {
  CHECK_THROWS_AS(TestFunction::constant(0, 1.0), ConfigError);
  CHECK_THROWS_AS(TestFunction::constant(2, 0.0), ConfigError);
  CHECK_THROWS_AS(TestFunction::constant(2, -1.0), ConfigError);
  CHECK_THROWS_AS(TestFunction::coordinate(2, 2, 1.0), ConfigError);
  CHECK_THROWS_AS(TestFunction::pair_product(2, 0, 5, 1.0), ConfigError);
  auto phi = TestFunction::coordinate(2, 0, 1.0);
  Vec bad(3);
  bad.setZero();
  CHECK_THROWS_AS(phi.value(bad), UnsupportedInput);
}

TEST_CASE("dictionary: stable order, truncation, labels") {
  auto dict = Dictionary::standard(2, {4.0}, 32);
  REQUIRE(dict.size() == 6);
  CHECK(dict[0].label() == "1@R4");
  CHECK(dict[1].label() == "x0@R4");
  CHECK(dict[2].label() == "x1@R4");
  CHECK(dict[3].label() == "x0*x0@R4");
  CHECK(dict[4].label() == "x0*x1@R4");
  CHECK(dict[5].label() == "x1*x1@R4");

  auto two = Dictionary::standard(2, {4.0, 6.0}, 9);
  REQUIRE(two.size() == 9);
  CHECK(two[6].label() == "1@R6");
  CHECK(two[7].label() == "x0@R6");
  CHECK(two[8].label() == "x1@R6");

  CHECK_THROWS_AS(Dictionary::standard(2, {}, 4), ConfigError);
  CHECK_THROWS_AS(Dictionary::standard(2, {4.0}, 0), ConfigError);
}

TEST_CASE("outer functions: values, derivatives, bounds") {
  Vec z(3);
  z << 0.4, -1.2, 2.0;

  auto lin = OuterFunction::linear(3, 1);
  CHECK(lin.value(z) == -1.2);
  CHECK(lin.grad(z)[1] == 1.0);
  CHECK(lin.grad(z)[0] == 0.0);
  CHECK(lin.hess(z).norm() == 0.0);

  auto bil = OuterFunction::bilinear(3, 0, 2);
  CHECK(bil.value(z) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(bil.grad(z)[0] == 2.0);
  CHECK(bil.grad(z)[2] == 0.4);
  CHECK(bil.hess(z)(0, 2) == 1.0);
  CHECK(bil.hess(z)(2, 0) == 1.0);
  CHECK(bil.hess(z)(0, 0) == 0.0);

  auto sq = OuterFunction::bilinear(3, 1, 1);
  CHECK(sq.value(z) == doctest::Approx(1.44).epsilon(1e-15));
  CHECK(sq.grad(z)[1] == -2.4);
  CHECK(sq.hess(z)(1, 1) == 2.0);

  Vec w(3);
  w << 0.5, -0.25, 1.0;
  auto th = OuterFunction::tanh_affine(w, 0.3);
  CHECK(std::abs(th.value(z)) < 1.0);
  // finite-difference check of grad and hess
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vec zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    const double fd = (th.value(zp) - th.value(zm)) / (2.0 * h);
    CHECK(th.grad(z)[k] == doctest::Approx(fd).epsilon(1e-7).scale(1.0));
    const Vec gd = (th.grad(zp) - th.grad(zm)) / (2.0 * h);
    for (int l = 0; l < 3; ++l)
      CHECK(th.hess(z)(k, l) == doctest::Approx(gd[l]).epsilon(1e-6).scale(1.0));
  }

  CHECK_THROWS_AS(OuterFunction::linear(2, 2), ConfigError);
  CHECK_THROWS_AS(OuterFunction::bilinear(2, 0, -1), ConfigError);
  CHECK_THROWS_AS(OuterFunction::tanh_affine(Vec(), 0.0), ConfigError);
  Vec short_z(2);
  short_z.setZero();
  CHECK_THROWS_AS(lin.value(short_z), UnsupportedInput);
}

TEST_CASE("cylindrical functionals: projections and values") {
  // atoms inside the plateau of R = 8, so pairings are exact polynomials
  std::vector<Vec> pts(2, Vec(2));
  pts[0] << 1.0, 0.0;
  pts[1] << 3.0, 0.0;
  auto mu = cloud_from(pts);

  CylindricalFunctional G{OuterFunction::bilinear(2, 0, 1),
                          {TestFunction::coordinate(2, 0, 8.0),
                           TestFunction::constant(2, 8.0)}};
  const Vec z = G.projections(mu);
  CHECK(z[0] == 2.0);  // mean of 1 and 3
  CHECK(z[1] == 1.0);  // total mass
  CHECK(calculus::eval_G(G, mu) == 2.0);

  // weighted: <mu, x0> = (1/2)(2*1 + 0.5*3) = 1.75
  mu.weights << 2.0, 0.5;
  CHECK(G.projections(mu)[0] == doctest::Approx(1.75).epsilon(1e-15));

  CylindricalFunctional bad{OuterFunction::linear(2, 0),
                            {TestFunction::constant(2, 8.0)}};
  CHECK_THROWS_AS(bad.check(), ConfigError);
  CylindricalFunctional mixed{OuterFunction::linear(2, 0),
                              {TestFunction::constant(2, 8.0),
                               TestFunction::constant(3, 8.0)}};
  CHECK_THROWS_AS(mixed.check(), ConfigError);
}

TEST_CASE("measure derivatives: chain rule, symmetry, pushforward quotient") {
  auto mu = random_cloud(24, 2, 1.0, 99, 0);
  CylindricalFunctional G{
      OuterFunction::tanh_affine((Vec(2) << 0.8, -0.5).finished(), 0.2),
      {TestFunction::coordinate(2, 0, 6.0), TestFunction::pair_product(2, 0, 1, 6.0)}};

  const Vec z = G.projections(mu);
  const Vec gz = G.g.grad(z);
  Vec y(2);
  y << 0.7, -0.4;

  // hand-assembled chain rule
  Vec expect = gz[0] * G.phis[0].gradient(y) + gz[1] * G.phis[1].gradient(y);
  const Vec got = calculus::lderiv(G, mu, y);
  CHECK((got - expect).norm() <= 1e-15);

  Mat expect_y = gz[0] * G.phis[0].hessian(y) + gz[1] * G.phis[1].hessian(y);
  CHECK((calculus::lderiv_y(G, mu, y) - expect_y).norm() <= 1e-15);

  // second derivative kernel: transpose-exchange symmetry
  Vec yp(2);
  yp << -1.1, 0.3;
  const Mat K = calculus::lderiv2(G, mu, y, yp);
  const Mat Kt = calculus::lderiv2(G, mu, yp, y);
  CHECK((K - Kt.transpose()).norm() <= 1e-14);

  // directional pushforward quotient: d/de G(mu o (x + e v)^-1) at 0
  // equals <mu, lderiv . v> for a constant direction v
  Vec v(2);
  v << 0.6, -0.9;
  const double eps = 1e-6;
  auto shifted = [&](double e) {
    WeightedCloud nu = mu;
    nu.atoms.rowwise() += (e * v).transpose();
    return calculus::eval_G(G, nu);
  };
  const double fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
  std::vector<double> dir(size_t(mu.size()));
  for (int i = 0; i < mu.size(); ++i) {
    Vec xi = mu.atoms.row(i);
    dir[size_t(i)] = calculus::lderiv(G, mu, xi).dot(v);
  }
  const double paired = measure::pair_values(mu, dir);
  CHECK(fd == doctest::Approx(paired).epsilon(1e-7).scale(1.0));

  // derivative of a locally constant functional vanishes
  CylindricalFunctional Gc{OuterFunction::linear(1, 0),
                           {TestFunction::constant(2, 20.0)}};
  CHECK(calculus::lderiv(Gc, mu, y).norm() == 0.0);
}

TEST_CASE("signal generators on test functions") {
  // diffusion only: L(x^2 bump) = sigma^2 on the plateau
  model::SystemCorrelatedNoise sys;
  sys.n = 1;
  sys.m = 1;
  sys.d = 1;
  sys.b1 = model::VectorField::zero(1, 1);
  sys.sigma0 = model::MatrixField::constant(Mat::Identity(1, 1), 1);
  sys.sigma1 = model::MatrixField::zero(1, 1, 1);
  sys.b2 = model::VectorField::zero(1, 1);
  sys.sigma2 = model::TimeMatrix::constant(Mat::Identity(1, 1));

  auto xsq = TestFunction::pair_product(1, 0, 0, 10.0);
  Vec x(1);
  x << 0.0;
  CHECK(calculus::generator_L(sys, 0.0, xsq, x) == doctest::Approx(1.0));
  x << 2.0;
  CHECK(calculus::generator_L(sys, 0.3, xsq, x) == doctest::Approx(1.0));

  // both noises: L(x^2) = sigma0^2 + sigma1^2 = 2
  sys.sigma1 = model::MatrixField::constant(Mat::Identity(1, 1), 1);
  x << 0.0;
  CHECK(calculus::generator_L(sys, 0.0, xsq, x) == doctest::Approx(2.0));

  // pure drift: L(x bump) = b1(x) = -x on the plateau
  sys.sigma0 = model::MatrixField::zero(1, 1, 1);
  sys.sigma1 = model::MatrixField::zero(1, 1, 1);
  sys.b1 = model::VectorField::affine(-Mat::Identity(1, 1), Vec::Zero(1));
  auto xphi = TestFunction::coordinate(1, 0, 10.0);
  x << 0.3;
  CHECK(calculus::generator_L(sys, 0.0, xphi, x) == doctest::Approx(-0.3));
  x << -1.2;
  CHECK(calculus::generator_L(sys, 0.0, xphi, x) == doctest::Approx(1.2));

  // cross term: n = 2, sigma0 sigma0^T has unit off-diagonals,
  // Hess(x0 x1) = [[0,1],[1,0]] so L = 1
  model::SystemCorrelatedNoise sys2;
  sys2.n = 2;
  sys2.m = 1;
  sys2.d = 1;
  sys2.b1 = model::VectorField::zero(2, 2);
  sys2.sigma0 = model::MatrixField::constant(Mat::Ones(2, 1), 2);
  sys2.sigma1 = model::MatrixField::zero(2, 1, 2);
  sys2.b2 = model::VectorField::zero(1, 2);
  sys2.sigma2 = model::TimeMatrix::constant(Mat::Identity(1, 1));
  auto cross = TestFunction::pair_product(2, 0, 1, 10.0);
  Vec x2 = Vec::Zero(2);
  CHECK(calculus::generator_L(sys2, 0.0, cross, x2) == doctest::Approx(1.0));

  // sensor variant: Lcheck(x^2) = sigma1c^2
  auto cs = rich_cs_system(false);
  auto xsq2 = TestFunction::pair_product(2, 0, 0, 20.0);
  Vec xc = Vec::Zero(2);
  // sigma1c = (0.35, -0.2)^T: (sigma1c sigma1c^T)_{00} = 0.1225
  CHECK(calculus::generator_Lcheck(cs, 0.0, xsq2, xc) ==
        doctest::Approx(0.1225).epsilon(1e-14));
}

TEST_CASE("lifted operator: flat-sensor square functional") {
  // zero signal coefficients, unit sensor gain h = 0.7, G = <mu,chi>^2 with
  // every atom on the plateau: lift = (1/2) * 2 * (0.7 * mass)^2 = 0.49
  auto sys = zero_system_with_flat_sensor(0.7);
  std::vector<Vec> pts;
  for (double v : {-1.0, -0.5, 0.0, 0.5, 1.0}) pts.push_back(Vec::Constant(1, v));
  auto mu = cloud_from(pts);

  CylindricalFunctional G{OuterFunction::bilinear(1, 0, 0),
                          {TestFunction::constant(1, 4.0)}};
  CHECK(calculus::lift_L(sys, 0.0, G, mu) == doctest::Approx(0.49).epsilon(1e-14));

  // mass scales quadratically through the loading
  mu.weights *= 2.0;
  CHECK(calculus::lift_L(sys, 0.0, G, mu) ==
        doctest::Approx(4.0 * 0.49).epsilon(1e-14));

  // linear outer function kills the quadratic term; beta vanishes here
  CylindricalFunctional Glin{OuterFunction::linear(1, 0),
                             {TestFunction::constant(1, 4.0)}};
  CHECK(calculus::lift_L(sys, 0.0, Glin, mu) == 0.0);
}

TEST_CASE("lifted operator: pairing route and derivative route agree without "
          "observation drift") {
  auto sys = rich_cn_system(false);
  CylindricalFunctional G{
      OuterFunction::tanh_affine((Vec(3) << 0.9, -0.4, 0.3).finished(), -0.1),
      {TestFunction::constant(2, 5.0), TestFunction::coordinate(2, 1, 5.0),
       TestFunction::pair_product(2, 0, 1, 7.0)}};

  for (int trial = 0; trial < 12; ++trial) {
    auto mu = random_cloud(40, 2, 1.2, 4242, trial);
    const double via_pairing = calculus::lift_L(sys, 0.35, G, mu);
    const double via_lderiv = calculus::lift_L_lderiv_form(sys, 0.35, G, mu);
    CHECK(std::abs(via_pairing - via_lderiv) <= 1e-11);
  }

  // with observation drift the routes measure different things; the
  // agreement test above is not vacuous
  auto sys_b2 = rich_cn_system(true);
  auto mu = random_cloud(40, 2, 1.2, 4242, 0);
  const double via_pairing = calculus::lift_L(sys_b2, 0.35, G, mu);
  const double via_lderiv = calculus::lift_L_lderiv_form(sys_b2, 0.35, G, mu);
  CHECK(std::abs(via_pairing - via_lderiv) > 1e-4);
}

TEST_CASE("lifted operator: sensor analogue dual route") {
  auto sys = rich_cs_system(false);
  CylindricalFunctional G{
      OuterFunction::tanh_affine((Vec(2) << 0.7, 0.5).finished(), 0.05),
      {TestFunction::coordinate(2, 0, 5.0), TestFunction::pair_product(2, 1, 1, 5.0)}};

  for (int trial = 0; trial < 12; ++trial) {
    auto mu = random_cloud(40, 2, 1.1, 777, trial);
    const double via_pairing = calculus::lift_Lcheck(sys, 0.2, G, mu);
    const double via_lderiv = calculus::lift_Lcheck_lderiv_form(sys, 0.2, G, mu);
    CHECK(std::abs(via_pairing - via_lderiv) <= 1e-11);
  }

  auto sys_b2 = rich_cs_system(true);
  auto mu = random_cloud(40, 2, 1.1, 777, 3);
  CHECK(std::abs(calculus::lift_Lcheck(sys_b2, 0.2, G, mu) -
                 calculus::lift_Lcheck_lderiv_form(sys_b2, 0.2, G, mu)) > 1e-4);
}

TEST_CASE("projection and projected coefficients") {
  auto dict = Dictionary::standard(1, {8.0}, 3);  // 1, x, x^2 on plateau |x|<=4
  std::vector<Vec> pts;
  for (double v : {-1.0, 0.0, 2.0}) pts.push_back(Vec::Constant(1, v));
  auto mu = cloud_from(pts);

  const Vec z = calculus::project_T(mu, dict, 3);
  CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(z[2] == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(calculus::project_T(mu, dict, 4), ConfigError);
  CHECK_THROWS_AS(calculus::project_T(mu, dict, 0), ConfigError);

  // single atom at the origin, constant slot: alpha = |h(0)|^2, beta = 0
  model::SystemCorrelatedNoise sys;
  sys.n = 1;
  sys.m = 2;
  sys.d = 1;
  sys.b1 = model::VectorField::zero(1, 1);
  sys.sigma0 = model::MatrixField::zero(1, 1, 1);
  sys.sigma1 = model::MatrixField::zero(1, 2, 1);
  sys.b2 = model::VectorField::constant((Vec(2) << 0.3, -0.1).finished(), 1);
  sys.sigma2 = model::TimeMatrix::constant(Mat::Identity(2, 2));
  auto origin = cloud_from({Vec::Zero(1)});
  CHECK(calculus::coeff_alpha(sys, 0.0, origin, dict, 0, 0) ==
        doctest::Approx(0.1).epsilon(1e-14));
  CHECK(calculus::coeff_beta(sys, 0.0, origin, dict, 0) == 0.0);

  // drift slot of the coordinate function: beta^1 = <mu, b1> for pure drift
  sys.b1 = model::VectorField::affine(-Mat::Identity(1, 1), Vec::Zero(1));
  CHECK(calculus::coeff_beta(sys, 0.0, mu, dict, 1) ==
        doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("projected diffusion matrix is a PSD Gram matrix") {
  auto dict = Dictionary::standard(2, {6.0}, 6);
  auto cn = rich_cn_system(true);
  auto cs = rich_cs_system(true);
  for (int trial = 0; trial < 5; ++trial) {
    auto mu = random_cloud(30, 2, 1.0, 31337, trial);
    const Mat alpha = calculus::coeff_alpha_matrix(cn, 0.1, mu, dict, 6);
    CHECK((alpha - alpha.transpose()).norm() <= 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es(alpha);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    // scalar accessor agrees with the assembled matrix
    CHECK(calculus::coeff_alpha(cn, 0.1, mu, dict, 1, 4) ==
          doctest::Approx(alpha(1, 4)).epsilon(1e-13));

    const Mat alpha_cs = calculus::coeff_alpha_matrix_sensor(cs, 0.1, mu, dict, 6);
    CHECK((alpha_cs - alpha_cs.transpose()).norm() <= 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es2(alpha_cs);
    CHECK(es2.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("sequence-space cylinder functions ignore coordinates beyond k") {
  calculus::CylinderFunctionRInf Phi{2, OuterFunction::bilinear(2, 0, 1)};
  Vec w(5);
  w << 2.0, -3.0, 100.0, 7.0, -9.0;
  CHECK(Phi.value(w) == -6.0);
  CHECK(Phi.partial(0, w) == -3.0);
  CHECK(Phi.partial(1, w) == 2.0);
  CHECK(Phi.partial(2, w) == 0.0);
  CHECK(Phi.partial(4, w) == 0.0);
  CHECK(Phi.partial2(0, 1, w) == 1.0);
  CHECK(Phi.partial2(1, 1, w) == 0.0);
  CHECK(Phi.partial2(0, 3, w) == 0.0);
  CHECK(Phi.partial2(4, 4, w) == 0.0);

  // changing ignored coordinates changes nothing
  Vec w2 = w;
  w2[3] = 1e6;
  CHECK(Phi.value(w2) == Phi.value(w));

  Vec too_short(1);
  too_short << 1.0;
  CHECK_THROWS_AS(Phi.value(too_short), UnsupportedInput);
  CHECK_THROWS_AS(Phi.partial(-1, w), ConfigError);
}
