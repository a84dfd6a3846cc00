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
#include "zakailab/calculus.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

namespace zakailab::calculus {

namespace {

// f(v) = exp(-1/v) on (0,1] with first two derivatives.  Below the knee where
// exp(-1/v) underflows, all three vanish to machine zero; returning exact
// zeros there avoids 0 * inf in the derivative factors.
void transition_f(double v, double& f, double& f1, double& f2) {
  if (v < 1.0 / 700.0) {
    f = f1 = f2 = 0.0;
    return;
  }
  const double iv = 1.0 / v;
  f = std::exp(-iv);
  f1 = f * iv * iv;
  f2 = f * (iv * iv * iv * iv - 2.0 * iv * iv * iv);
}

}  // namespace

TestFunction::TestFunction(int n, Part part, int i, int j, double R)
    : n_(n), part_(part), i_(i), j_(j), R_(R) {
  if (n < 1) throw ConfigError("TestFunction: dimension must be >= 1");
  if (!(R > 0.0) || !std::isfinite(R))
    throw ConfigError("TestFunction: radius must be finite and positive");
  if (part != Part::One) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw ConfigError("TestFunction: coordinate index out of range");
  }
}

TestFunction TestFunction::constant(int n, double R) {
  return TestFunction(n, Part::One, 0, 0, R);
}

TestFunction TestFunction::coordinate(int n, int i, double R) {
  return TestFunction(n, Part::Coord, i, i, R);
}

TestFunction TestFunction::pair_product(int n, int i, int j, double R) {
  if (i > j) std::swap(i, j);
  return TestFunction(n, Part::Product, i, j, R);
}

std::string TestFunction::label() const {
  char buf[64];
  switch (part_) {
    case Part::One:
      std::snprintf(buf, sizeof buf, "1@R%s", fmt_double(R_).c_str());
      break;
    case Part::Coord:
      std::snprintf(buf, sizeof buf, "x%d@R%s", i_, fmt_double(R_).c_str());
      break;
    case Part::Product:
      std::snprintf(buf, sizeof buf, "x%d*x%d@R%s", i_, j_,
                    fmt_double(R_).c_str());
      break;
  }
  return buf;
}

void TestFunction::profile(double r, double& q, double& qr, double& qrr) const {
  const double half = 0.5 * R_;
  if (r <= half) {
    q = 1.0;
    qr = qrr = 0.0;
    return;
  }
  if (r >= R_) {
    q = qr = qrr = 0.0;
    return;
  }
  // transition variable u in (0,1); q = a / (a + b), a = f(1-u), b = f(u)
  const double s = 1.0 / half;  // du/dr
  const double u = (r - half) * s;
  double a, a1, a2, b, b1, b2;
  transition_f(1.0 - u, a, a1, a2);
  transition_f(u, b, b1, b2);
  a1 = -a1;  // d/du f(1-u)
  const double D = a + b;
  const double D1 = a1 + b1;
  const double D2 = a2 + b2;
  q = a / D;
  const double qu = a1 / D - a * D1 / (D * D);
  const double quu = a2 / D - 2.0 * a1 * D1 / (D * D) - a * D2 / (D * D) +
                     2.0 * a * D1 * D1 / (D * D * D);
  qr = qu * s;
  qrr = quu * s * s;
}

double TestFunction::value(const Vec& x) const {
  if (int(x.size()) != n_)
    throw UnsupportedInput("TestFunction: point dimension mismatch");
  const double r = x.norm();
  if (r >= R_) return 0.0;
  double q, qr, qrr;
  profile(r, q, qr, qrr);
  switch (part_) {
    case Part::One:
      return q;
    case Part::Coord:
      return x[i_] * q;
    case Part::Product:
      return x[i_] * x[j_] * q;
  }
  return 0.0;
}

void TestFunction::gradient(const Vec& x, Vec& out) const {
  if (int(x.size()) != n_)
    throw UnsupportedInput("TestFunction: point dimension mismatch");
  out.setZero(n_);
  const double r = x.norm();
  if (r >= R_) return;
  double q, qr, qrr;
  profile(r, q, qr, qrr);
  // grad(p q) = q grad p + p (qr/r) x   (qr = 0 on the plateau keeps r = 0 safe)
  double p = 1.0;
  switch (part_) {
    case Part::One:
      break;
    case Part::Coord:
      p = x[i_];
      out[i_] += q;
      break;
    case Part::Product:
      p = x[i_] * x[j_];
      out[i_] += x[j_] * q;
      out[j_] += x[i_] * q;
      break;
  }
  if (qr != 0.0) out += (p * qr / r) * x;
}

void TestFunction::hessian(const Vec& x, Mat& out) const {
  if (int(x.size()) != n_)
    throw UnsupportedInput("TestFunction: point dimension mismatch");
  out.setZero(n_, n_);
  const double r = x.norm();
  if (r >= R_) return;
  double q, qr, qrr;
  profile(r, q, qr, qrr);

  double p = 1.0;
  Vec gp = Vec::Zero(n_);
  switch (part_) {
    case Part::One:
      break;
    case Part::Coord:
      p = x[i_];
      gp[i_] = 1.0;
      break;
    case Part::Product:
      p = x[i_] * x[j_];
      gp[i_] += x[j_];
      gp[j_] += x[i_];  // i == j accumulates to 2 x_i
      out(i_, j_) += q;
      out(j_, i_) += q;
      break;
  }
  if (qr == 0.0 && qrr == 0.0) return;  // plateau: only q * Hess p survives

  const Vec gq = (qr / r) * x;
  out.noalias() += gp * gq.transpose();
  out.noalias() += gq * gp.transpose();
  // Hess q = qrr x x^T / r^2 + qr (I / r - x x^T / r^3)
  out.noalias() += (p * (qrr - qr / r) / (r * r)) * (x * x.transpose());
  out.diagonal().array() += p * qr / r;
}

Vec TestFunction::gradient(const Vec& x) const {
  Vec out;
  gradient(x, out);
  return out;
}

Mat TestFunction::hessian(const Vec& x) const {
  Mat out;
  hessian(x, out);
  return out;
}

Dictionary Dictionary::standard(int n, const std::vector<double>& radii,
                                int max_size) {
  if (n < 1) throw ConfigError("Dictionary: dimension must be >= 1");
  if (radii.empty()) throw ConfigError("Dictionary: need at least one radius");
  if (max_size < 1) throw ConfigError("Dictionary: max_size must be >= 1");
  Dictionary dict;
  for (double R : radii) {
    if (int(dict.entries.size()) >= max_size) break;
    dict.entries.push_back(TestFunction::constant(n, R));
    for (int i = 0; i < n && int(dict.entries.size()) < max_size; ++i)
      dict.entries.push_back(TestFunction::coordinate(n, i, R));
    for (int i = 0; i < n && int(dict.entries.size()) < max_size; ++i)
      for (int j = i; j < n && int(dict.entries.size()) < max_size; ++j)
        dict.entries.push_back(TestFunction::pair_product(n, i, j, R));
  }
  return dict;
}

OuterFunction OuterFunction::linear(int k, int u) {
  if (k < 1 || u < 0 || u >= k)
    throw ConfigError("OuterFunction::linear: index out of range");
  OuterFunction g(Form::Linear, k);
  g.u_ = u;
  return g;
}

OuterFunction OuterFunction::bilinear(int k, int u, int v) {
  if (k < 1 || u < 0 || u >= k || v < 0 || v >= k)
    throw ConfigError("OuterFunction::bilinear: index out of range");
  OuterFunction g(Form::Bilinear, k);
  g.u_ = u;
  g.v_ = v;
  return g;
}

OuterFunction OuterFunction::tanh_affine(const Vec& w, double offset) {
  if (w.size() < 1) throw ConfigError("OuterFunction::tanh_affine: empty weight");
  OuterFunction g(Form::TanhAffine, int(w.size()));
  g.w_ = w;
  g.offset_ = offset;
  return g;
}

std::string OuterFunction::label() const {
  char buf[48];
  switch (form_) {
    case Form::Linear:
      std::snprintf(buf, sizeof buf, "z%d", u_);
      break;
    case Form::Bilinear:
      std::snprintf(buf, sizeof buf, "z%d*z%d", u_, v_);
      break;
    case Form::TanhAffine:
      std::snprintf(buf, sizeof buf, "tanh(w.z+c)[k=%d]", k_);
      break;
  }
  return buf;
}

double OuterFunction::value(const Vec& z) const {
  if (int(z.size()) != k_)
    throw UnsupportedInput("OuterFunction: argument arity mismatch");
  switch (form_) {
    case Form::Linear:
      return z[u_];
    case Form::Bilinear:
      return z[u_] * z[v_];
    case Form::TanhAffine:
      return std::tanh(w_.dot(z) + offset_);
  }
  return 0.0;
}

Vec OuterFunction::grad(const Vec& z) const {
  if (int(z.size()) != k_)
    throw UnsupportedInput("OuterFunction: argument arity mismatch");
  Vec g = Vec::Zero(k_);
  switch (form_) {
    case Form::Linear:
      g[u_] = 1.0;
      break;
    case Form::Bilinear:
      g[u_] += z[v_];
      g[v_] += z[u_];
      break;
    case Form::TanhAffine: {
      const double T = std::tanh(w_.dot(z) + offset_);
      g = (1.0 - T * T) * w_;
      break;
    }
  }
  return g;
}

Mat OuterFunction::hess(const Vec& z) const {
  if (int(z.size()) != k_)
    throw UnsupportedInput("OuterFunction: argument arity mismatch");
  Mat H = Mat::Zero(k_, k_);
  switch (form_) {
    case Form::Linear:
      break;
    case Form::Bilinear:
      H(u_, v_) += 1.0;
      H(v_, u_) += 1.0;
      break;
    case Form::TanhAffine: {
      const double T = std::tanh(w_.dot(z) + offset_);
      H = (-2.0 * T * (1.0 - T * T)) * (w_ * w_.transpose());
      break;
    }
  }
  return H;
}

void CylindricalFunctional::check() const {
  if (phis.empty()) throw ConfigError("CylindricalFunctional: no test functions");
  if (int(phis.size()) != g.arity())
    throw ConfigError("CylindricalFunctional: arity/test-function count mismatch");
  const int n = phis.front().dim();
  for (const auto& phi : phis)
    if (phi.dim() != n)
      throw ConfigError("CylindricalFunctional: mixed test-function dimensions");
}

Vec CylindricalFunctional::projections(const measure::WeightedCloud& mu) const {
  check();
  const int k = int(phis.size());
  const int N = mu.size();
  Vec z(k);
  std::vector<double> vals(static_cast<size_t>(N));
  Vec x(mu.dim());
  for (int u = 0; u < k; ++u) {
    for (int i = 0; i < N; ++i) {
      x = mu.atoms.row(i);
      vals[size_t(i)] = phis[size_t(u)].value(x);
    }
    z[u] = measure::pair_values(mu, vals);
  }
  return z;
}

double eval_G(const CylindricalFunctional& G, const measure::WeightedCloud& mu) {
  return G.g.value(G.projections(mu));
}

namespace {

Vec lderiv_at(const CylindricalFunctional& G, const Vec& gz, const Vec& y) {
  const int n = G.phis.front().dim();
  Vec out = Vec::Zero(n);
  Vec gphi(n);
  for (int u = 0; u < int(G.phis.size()); ++u) {
    if (gz[u] == 0.0) continue;
    G.phis[size_t(u)].gradient(y, gphi);
    out += gz[u] * gphi;
  }
  return out;
}

Mat lderiv_y_at(const CylindricalFunctional& G, const Vec& gz, const Vec& y) {
  const int n = G.phis.front().dim();
  Mat out = Mat::Zero(n, n);
  Mat hphi(n, n);
  for (int u = 0; u < int(G.phis.size()); ++u) {
    if (gz[u] == 0.0) continue;
    G.phis[size_t(u)].hessian(y, hphi);
    out += gz[u] * hphi;
  }
  return out;
}

Mat lderiv2_at(const CylindricalFunctional& G, const Mat& Hz, const Vec& y,
               const Vec& yp) {
  const int n = G.phis.front().dim();
  const int k = int(G.phis.size());
  Mat Gy(k, n), Gyp(k, n);
  Vec gphi(n);
  for (int u = 0; u < k; ++u) {
    G.phis[size_t(u)].gradient(y, gphi);
    Gy.row(u) = gphi;
    G.phis[size_t(u)].gradient(yp, gphi);
    Gyp.row(u) = gphi;
  }
  return Gy.transpose() * Hz * Gyp;
}

}  // namespace

Vec lderiv(const CylindricalFunctional& G, const measure::WeightedCloud& mu,
           const Vec& y) {
  return lderiv_at(G, G.g.grad(G.projections(mu)), y);
}

Mat lderiv_y(const CylindricalFunctional& G, const measure::WeightedCloud& mu,
             const Vec& y) {
  return lderiv_y_at(G, G.g.grad(G.projections(mu)), y);
}

Mat lderiv2(const CylindricalFunctional& G, const measure::WeightedCloud& mu,
            const Vec& y, const Vec& yp) {
  return lderiv2_at(G, G.g.hess(G.projections(mu)), y, yp);
}

double generator_L(const model::SystemCorrelatedNoise& sys, double t,
                   const TestFunction& phi, const Vec& x) {
  Vec b(sys.n), g(sys.n);
  Mat s0(sys.n, sys.d), s1(sys.n, sys.m), H(sys.n, sys.n);
  sys.b1.eval(t, x, b);
  sys.sigma0.eval(t, x, s0);
  sys.sigma1.eval(t, x, s1);
  phi.gradient(x, g);
  phi.hessian(x, H);
  const Mat a = s0 * s0.transpose() + s1 * s1.transpose();
  return b.dot(g) + 0.5 * a.cwiseProduct(H).sum();
}

double generator_Lcheck(const model::SystemCorrelatedSensor& sys, double t,
                        const TestFunction& phi, const Vec& x) {
  Vec b(sys.n), g(sys.n);
  Mat s1(sys.n, sys.m), H(sys.n, sys.n);
  sys.b1c.eval(t, x, b);
  sys.sigma1c.eval(t, x, s1);
  phi.gradient(x, g);
  phi.hessian(x, H);
  const Mat a = s1 * s1.transpose();
  return b.dot(g) + 0.5 * a.cwiseProduct(H).sum();
}

namespace {

// Shared pairing-route assembly.  loading(i) must fill h-like (m) and
// sigma-like (n x m) ingredients for atom i; drift(i) returns L phi-style
// scalars per dictionary slot.
struct LiftIngredients {
  Vec z;     // k projections
  Mat A;     // k x m driver loadings
  Vec beta;  // k drifts
};

template <typename CoeffFn>
LiftIngredients lift_ingredients(const CylindricalFunctional& G,
                                 const measure::WeightedCloud& mu, int m,
                                 CoeffFn&& coeffs) {
  G.check();
  mu.check();
  const int k = int(G.phis.size());
  const int n = G.phis.front().dim();
  const int N = mu.size();
  if (mu.dim() != n)
    throw UnsupportedInput("lift: cloud/test-function dimension mismatch");

  std::vector<double> phi_vals(static_cast<size_t>(N));
  std::vector<double> lphi_vals(static_cast<size_t>(N));
  std::vector<std::vector<double>> load_vals(
      static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(N)));
  LiftIngredients out;
  out.z.resize(k);
  out.A.resize(k, m);
  out.beta.resize(k);

  Vec x(n), g(n), hvec(m), bdrift(n);
  Mat H(n, n), sig(n, m), diff(n, n);
  for (int u = 0; u < k; ++u) {
    const TestFunction& phi = G.phis[size_t(u)];
    for (int i = 0; i < N; ++i) {
      x = mu.atoms.row(i);
      coeffs(i, x, hvec, sig, bdrift, diff);
      const double pv = phi.value(x);
      phi.gradient(x, g);
      phi.hessian(x, H);
      phi_vals[size_t(i)] = pv;
      lphi_vals[size_t(i)] = bdrift.dot(g) + 0.5 * diff.cwiseProduct(H).sum();
      for (int l = 0; l < m; ++l)
        load_vals[size_t(l)][size_t(i)] = pv * hvec[l] + g.dot(sig.col(l));
    }
    out.z[u] = measure::pair_values(mu, phi_vals);
    out.beta[u] = measure::pair_values(mu, lphi_vals);
    for (int l = 0; l < m; ++l)
      out.A(u, l) = measure::pair_values(mu, load_vals[size_t(l)]);
  }
  return out;
}

LiftEvaluation lift_from_ingredients(const CylindricalFunctional& G,
                                     LiftIngredients&& ing) {
  LiftEvaluation out;
  out.z = std::move(ing.z);
  out.beta = std::move(ing.beta);
  out.A = std::move(ing.A);
  out.gz = G.g.grad(out.z);
  out.Hz = G.g.hess(out.z);
  const Mat gram = out.A * out.A.transpose();
  out.value = 0.5 * out.Hz.cwiseProduct(gram).sum() + out.gz.dot(out.beta);
  out.loading = out.A.transpose() * out.gz;
  return out;
}

}  // namespace

LiftEvaluation lift_eval_cn(const model::SystemCorrelatedNoise& sys, double t,
                            const CylindricalFunctional& G,
                            const measure::WeightedCloud& mu) {
  const Mat s2inv = sigma2_inverse(sys, t);
  Vec b2(sys.m);
  Mat s0(sys.n, sys.d);
  auto coeffs = [&](int, const Vec& x, Vec& hvec, Mat& sig, Vec& bdrift,
                    Mat& diff) {
    sys.b2.eval(t, x, b2);
    hvec.noalias() = s2inv * b2;
    sys.sigma1.eval(t, x, sig);
    sys.b1.eval(t, x, bdrift);
    sys.sigma0.eval(t, x, s0);
    diff.noalias() = s0 * s0.transpose();
    diff.noalias() += sig * sig.transpose();
  };
  return lift_from_ingredients(G, lift_ingredients(G, mu, sys.m, coeffs));
}

LiftEvaluation lift_eval_cs(const model::SystemCorrelatedSensor& sys, double t,
                            const CylindricalFunctional& G,
                            const measure::WeightedCloud& mu) {
  Mat s1(sys.n, sys.m);
  auto coeffs = [&](int, const Vec& x, Vec& hvec, Mat& sig, Vec& bdrift,
                    Mat& diff) {
    sys.b2c.eval(t, x, hvec);
    sys.sigma1c.eval(t, x, s1);
    sig.noalias() = s1 * sys.sigma2c.transpose();
    sys.b1c.eval(t, x, bdrift);
    diff.noalias() = s1 * s1.transpose();
  };
  return lift_from_ingredients(G, lift_ingredients(G, mu, sys.m, coeffs));
}

double lift_L(const model::SystemCorrelatedNoise& sys, double t,
              const CylindricalFunctional& G, const measure::WeightedCloud& mu) {
  return lift_eval_cn(sys, t, G, mu).value;
}

double lift_Lcheck(const model::SystemCorrelatedSensor& sys, double t,
                   const CylindricalFunctional& G,
                   const measure::WeightedCloud& mu) {
  return lift_eval_cs(sys, t, G, mu).value;
}

namespace {

// Measure-derivative route: double integral of the second-derivative kernel
// against the driver columns plus single integrals of d_y d_mu and d_mu
// against the signal coefficients.  Coincides with the pairing route exactly
// when the observation drift vanishes.
double lift_derivative_route(const CylindricalFunctional& G,
                             const measure::WeightedCloud& mu,
                             const std::function<void(const Vec&, Mat&)>& sigma_of,
                             const std::function<void(const Vec&, Vec&, Mat&)>& drift_diff_of,
                             int m) {
  G.check();
  mu.check();
  const int n = G.phis.front().dim();
  const int N = mu.size();
  if (mu.dim() != n)
    throw UnsupportedInput("lift: cloud/test-function dimension mismatch");

  const Vec z = G.projections(mu);
  const Vec gz = G.g.grad(z);
  const Mat Hz = G.g.hess(z);

  std::vector<Mat> sig(static_cast<size_t>(N), Mat(n, m));
  Vec x(n);
  for (int i = 0; i < N; ++i) {
    x = mu.atoms.row(i);
    sigma_of(x, sig[size_t(i)]);
  }

  // (1/2) int int tr(sigma(y)^T d2_mu G(y,y') sigma(y')) mu(dy) mu(dy')
  const double invN = 1.0 / double(N);
  double quad = 0.0;
  Vec xj(n);
  for (int i = 0; i < N; ++i) {
    x = mu.atoms.row(i);
    for (int j = 0; j < N; ++j) {
      xj = mu.atoms.row(j);
      const Mat K = lderiv2_at(G, Hz, x, xj);
      const Mat contracted = sig[size_t(i)].transpose() * K * sig[size_t(j)];
      quad += mu.weights[i] * mu.weights[j] * contracted.trace();
    }
  }
  quad *= 0.5 * invN * invN;

  // int [ tr(d_y d_mu G(y) a(y)) / 2 + d_mu G(y) . b(y) ] mu(dy)
  std::vector<double> first(static_cast<size_t>(N));
  Vec b(n);
  Mat a(n, n);
  for (int i = 0; i < N; ++i) {
    x = mu.atoms.row(i);
    drift_diff_of(x, b, a);
    const Mat Dy = lderiv_y_at(G, gz, x);
    const Vec Dmu = lderiv_at(G, gz, x);
    first[size_t(i)] = 0.5 * Dy.cwiseProduct(a).sum() + Dmu.dot(b);
  }
  return quad + measure::pair_values(mu, first);
}

}  // namespace

double lift_L_lderiv_form(const model::SystemCorrelatedNoise& sys, double t,
                          const CylindricalFunctional& G,
                          const measure::WeightedCloud& mu) {
  Mat s0(sys.n, sys.d);
  auto sigma_of = [&](const Vec& x, Mat& sig) { sys.sigma1.eval(t, x, sig); };
  auto drift_diff_of = [&](const Vec& x, Vec& b, Mat& a) {
    sys.b1.eval(t, x, b);
    sys.sigma0.eval(t, x, s0);
    Mat s1(sys.n, sys.m);
    sys.sigma1.eval(t, x, s1);
    a.noalias() = s0 * s0.transpose();
    a.noalias() += s1 * s1.transpose();
  };
  return lift_derivative_route(G, mu, sigma_of, drift_diff_of, sys.m);
}

double lift_Lcheck_lderiv_form(const model::SystemCorrelatedSensor& sys, double t,
                               const CylindricalFunctional& G,
                               const measure::WeightedCloud& mu) {
  auto sigma_of = [&](const Vec& x, Mat& sig) {
    Mat s1(sys.n, sys.m);
    sys.sigma1c.eval(t, x, s1);
    sig.noalias() = s1 * sys.sigma2c.transpose();
  };
  auto drift_diff_of = [&](const Vec& x, Vec& b, Mat& a) {
    sys.b1c.eval(t, x, b);
    Mat s1(sys.n, sys.m);
    sys.sigma1c.eval(t, x, s1);
    a.noalias() = s1 * s1.transpose();
  };
  return lift_derivative_route(G, mu, sigma_of, drift_diff_of, sys.m);
}

Vec project_T(const measure::WeightedCloud& mu, const Dictionary& dict, int k) {
  if (k < 1 || k > dict.size())
    throw ConfigError("project_T: slot count out of range");
  mu.check();
  const int N = mu.size();
  Vec z(k);
  std::vector<double> vals(static_cast<size_t>(N));
  Vec x(mu.dim());
  for (int u = 0; u < k; ++u) {
    for (int i = 0; i < N; ++i) {
      x = mu.atoms.row(i);
      vals[size_t(i)] = dict[u].value(x);
    }
    z[u] = measure::pair_values(mu, vals);
  }
  return z;
}

double coeff_beta(const model::SystemCorrelatedNoise& sys, double t,
                  const measure::WeightedCloud& mu, const Dictionary& dict,
                  int u) {
  mu.check();
  const int N = mu.size();
  std::vector<double> vals(static_cast<size_t>(N));
  Vec x(mu.dim());
  for (int i = 0; i < N; ++i) {
    x = mu.atoms.row(i);
    vals[size_t(i)] = generator_L(sys, t, dict[u], x);
  }
  return measure::pair_values(mu, vals);
}

double coeff_beta_sensor(const model::SystemCorrelatedSensor& sys, double t,
                         const measure::WeightedCloud& mu,
                         const Dictionary& dict, int u) {
  mu.check();
  const int N = mu.size();
  std::vector<double> vals(static_cast<size_t>(N));
  Vec x(mu.dim());
  for (int i = 0; i < N; ++i) {
    x = mu.atoms.row(i);
    vals[size_t(i)] = generator_Lcheck(sys, t, dict[u], x);
  }
  return measure::pair_values(mu, vals);
}

namespace {

// Row u of the driver-loading matrix: <mu, phi_u h^l + d_i phi_u sigma^{il}>.
template <typename LoadFn>
Vec loading_row(const measure::WeightedCloud& mu, const TestFunction& phi,
                int m, LoadFn&& load) {
  const int N = mu.size();
  const int n = mu.dim();
  std::vector<std::vector<double>> vals(
      static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(N)));
  Vec x(n), g(n), hvec(m);
  Mat sig(n, m);
  for (int i = 0; i < N; ++i) {
    x = mu.atoms.row(i);
    load(x, hvec, sig);
    const double pv = phi.value(x);
    phi.gradient(x, g);
    for (int l = 0; l < m; ++l)
      vals[size_t(l)][size_t(i)] = pv * hvec[l] + g.dot(sig.col(l));
  }
  Vec row(m);
  for (int l = 0; l < m; ++l)
    row[l] = measure::pair_values(mu, vals[size_t(l)]);
  return row;
}

}  // namespace

double coeff_alpha(const model::SystemCorrelatedNoise& sys, double t,
                   const measure::WeightedCloud& mu, const Dictionary& dict,
                   int u, int v) {
  mu.check();
  const Mat s2inv = sigma2_inverse(sys, t);
  Vec b2(sys.m);
  auto load = [&](const Vec& x, Vec& hvec, Mat& sig) {
    sys.b2.eval(t, x, b2);
    hvec.noalias() = s2inv * b2;
    sys.sigma1.eval(t, x, sig);
  };
  const Vec Au = loading_row(mu, dict[u], sys.m, load);
  if (u == v) return Au.squaredNorm();
  const Vec Av = loading_row(mu, dict[v], sys.m, load);
  return Au.dot(Av);
}

Mat coeff_alpha_matrix(const model::SystemCorrelatedNoise& sys, double t,
                       const measure::WeightedCloud& mu, const Dictionary& dict,
                       int k) {
  if (k < 1 || k > dict.size())
    throw ConfigError("coeff_alpha_matrix: slot count out of range");
  mu.check();
  const Mat s2inv = sigma2_inverse(sys, t);
  Vec b2(sys.m);
  auto load = [&](const Vec& x, Vec& hvec, Mat& sig) {
    sys.b2.eval(t, x, b2);
    hvec.noalias() = s2inv * b2;
    sys.sigma1.eval(t, x, sig);
  };
  Mat A(k, sys.m);
  for (int u = 0; u < k; ++u)
    A.row(u) = loading_row(mu, dict[u], sys.m, load);
  return A * A.transpose();
}

Mat coeff_alpha_matrix_sensor(const model::SystemCorrelatedSensor& sys, double t,
                              const measure::WeightedCloud& mu,
                              const Dictionary& dict, int k) {
  if (k < 1 || k > dict.size())
    throw ConfigError("coeff_alpha_matrix: slot count out of range");
  mu.check();
  Mat s1(sys.n, sys.m);
  auto load = [&](const Vec& x, Vec& hvec, Mat& sig) {
    sys.b2c.eval(t, x, hvec);
    sys.sigma1c.eval(t, x, s1);
    sig.noalias() = s1 * sys.sigma2c.transpose();
  };
  Mat A(k, sys.m);
  for (int u = 0; u < k; ++u)
    A.row(u) = loading_row(mu, dict[u], sys.m, load);
  return A * A.transpose();
}

double CylinderFunctionRInf::value(const Vec& w) const {
  if (int(w.size()) < k)
    throw UnsupportedInput("CylinderFunctionRInf: need at least k coordinates");
  if (base.arity() != k)
    throw ConfigError("CylinderFunctionRInf: base arity mismatch");
  return base.value(w.head(k));
}

double CylinderFunctionRInf::partial(int u, const Vec& w) const {
  if (u < 0) throw ConfigError("CylinderFunctionRInf: negative index");
  if (u >= k) return 0.0;
  if (int(w.size()) < k)
    throw UnsupportedInput("CylinderFunctionRInf: need at least k coordinates");
  return base.grad(w.head(k))[u];
}

double CylinderFunctionRInf::partial2(int u, int v, const Vec& w) const {
  if (u < 0 || v < 0) throw ConfigError("CylinderFunctionRInf: negative index");
  if (u >= k || v >= k) return 0.0;
  if (int(w.size()) < k)
    throw UnsupportedInput("CylinderFunctionRInf: need at least k coordinates");
  return base.hess(w.head(k))(u, v);
}

}  // namespace zakailab::calculus
