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

#include <string>
#include <vector>

#include "zakailab/measure.hpp"
#include "zakailab/model.hpp"

namespace zakailab::calculus {

// Compactly supported smooth test function
//   phi(x) = p(x) * chi_R(x),   p in {1, x_i, x_i x_j}
// where chi_R is a C^infty plateau bump: identically 1 on |x| <= R/2, 0 on
// |x| >= R, glued with the exp(-1/u) transition, so phi and both derivative
// levels vanish outside the R-ball.  Value, gradient and Hessian are analytic.
class TestFunction {
 public:
  enum class Part { One, Coord, Product };

  static TestFunction constant(int n, double R);
  static TestFunction coordinate(int n, int i, double R);
  static TestFunction pair_product(int n, int i, int j, double R);

  int dim() const { return n_; }
  double radius() const { return R_; }
  std::string label() const;

  double value(const Vec& x) const;
  void gradient(const Vec& x, Vec& out) const;
  void hessian(const Vec& x, Mat& out) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;

 private:
  TestFunction(int n, Part part, int i, int j, double R);
  // radial plateau profile: q(r), q'(r), q''(r)
  void profile(double r, double& q, double& qr, double& qrr) const;

  int n_;
  Part part_;
  int i_, j_;
  double R_;
};

// Ordered family of test functions the projection map and the coefficient
// maps index into.
struct Dictionary {
  std::vector<TestFunction> entries;

  int size() const { return int(entries.size()); }
  const TestFunction& operator[](int u) const { return entries.at(u); }
  // For each radius: constant, coordinates, then pairwise products (i <= j),
  // truncated to max_size entries.
  static Dictionary standard(int n, const std::vector<double>& radii,
                             int max_size);
};

// Outer composer g on R^k with analytic gradient/Hessian.  The linear and
// bilinear forms are polynomial (bounded on any range box); tanh-affine is
// globally bounded with bounded derivatives.
class OuterFunction {
 public:
  enum class Form { Linear, Bilinear, TanhAffine };

  static OuterFunction linear(int k, int u);
  static OuterFunction bilinear(int k, int u, int v);
  static OuterFunction tanh_affine(const Vec& w, double offset);

  int arity() const { return k_; }
  Form form() const { return form_; }
  std::string label() const;

  double value(const Vec& z) const;
  Vec grad(const Vec& z) const;
  Mat hess(const Vec& z) const;

 private:
  OuterFunction(Form f, int k) : form_(f), k_(k) {}
  Form form_;
  int k_;
  int u_ = 0, v_ = 0;
  Vec w_;
  double offset_ = 0.0;
};

// Cylindrical functional on measures: G(mu) = g(<mu,phi_1>, ..., <mu,phi_k>).
struct CylindricalFunctional {
  OuterFunction g;
  std::vector<TestFunction> phis;

  void check() const;  // arity/dimension agreement
  Vec projections(const measure::WeightedCloud& mu) const;
};

double eval_G(const CylindricalFunctional& G, const measure::WeightedCloud& mu);

// Measure derivative of a cylindrical functional, evaluated at atom
// locations:
//   lderiv   : y  -> sum_u d_u g(z) grad phi_u(y)                 (n)
//   lderiv_y : y  -> sum_u d_u g(z) Hess phi_u(y)                 (n x n)
//   lderiv2  : y,y' -> sum_uv d_uv g(z) grad phi_u(y) grad phi_v(y')^T
Vec lderiv(const CylindricalFunctional& G, const measure::WeightedCloud& mu,
           const Vec& y);
Mat lderiv_y(const CylindricalFunctional& G, const measure::WeightedCloud& mu,
             const Vec& y);
Mat lderiv2(const CylindricalFunctional& G, const measure::WeightedCloud& mu,
            const Vec& y, const Vec& yp);

// Signal generators applied to a test function at a point:
//   L     = b1 . grad + (sigma0 sigma0^T + sigma1 sigma1^T) : Hess / 2
//   Lcheck= b1c . grad + sigma1c sigma1c^T : Hess / 2
double generator_L(const model::SystemCorrelatedNoise& sys, double t,
                   const TestFunction& phi, const Vec& x);
double generator_Lcheck(const model::SystemCorrelatedSensor& sys, double t,
                        const TestFunction& phi, const Vec& x);

// Lifted second-order operator on cylindrical functionals over measures, in
// its pairing form:
//   L G(mu) = (1/2) sum_uv d_uv g <mu, phi_u h^l + d_i phi_u sigma1^{il}>
//                            <mu, phi_v h^l + d_i phi_v sigma1^{il}>
//           +        sum_u  d_u g <mu, L phi_u>
double lift_L(const model::SystemCorrelatedNoise& sys, double t,
              const CylindricalFunctional& G, const measure::WeightedCloud& mu);

// Same operator assembled through the measure derivatives (double integral
// against lderiv2, single integrals against lderiv_y / lderiv).  Agrees with
// lift_L whenever b2 vanishes; kept as an independent evaluation route.
double lift_L_lderiv_form(const model::SystemCorrelatedNoise& sys, double t,
                          const CylindricalFunctional& G,
                          const measure::WeightedCloud& mu);

// Sensor-system analogues; the driver loading is phi_u b2c^l +
// d_i phi_u (sigma1c sigma2c^T)^{il} and the cross kernel is
// sigma1c sigma2c sigma2c^T sigma1c^T.
double lift_Lcheck(const model::SystemCorrelatedSensor& sys, double t,
                   const CylindricalFunctional& G,
                   const measure::WeightedCloud& mu);
double lift_Lcheck_lderiv_form(const model::SystemCorrelatedSensor& sys, double t,
                               const CylindricalFunctional& G,
                               const measure::WeightedCloud& mu);

// Everything the pairing route produces in one sweep.  Itô expansions and
// ensemble statistics need the pieces, not just the assembled value:
//   dG(mu_t) = value dt + loading . dDriver + fluctuation terms.
struct LiftEvaluation {
  Vec z;        // k projections <mu, phi_u>
  Vec beta;     // k drift pairings <mu, L phi_u>
  Mat A;        // k x m driver loadings
  Vec gz;       // grad g(z)
  Mat Hz;       // hess g(z)
  double value; // lifted operator at mu
  Vec loading;  // m, gz^T A
};

LiftEvaluation lift_eval_cn(const model::SystemCorrelatedNoise& sys, double t,
                            const CylindricalFunctional& G,
                            const measure::WeightedCloud& mu);
LiftEvaluation lift_eval_cs(const model::SystemCorrelatedSensor& sys, double t,
                            const CylindricalFunctional& G,
                            const measure::WeightedCloud& mu);

// Projection onto the first k dictionary pairings.  The projection is used
// only forward; nothing ever inverts it.
Vec project_T(const measure::WeightedCloud& mu, const Dictionary& dict, int k);

// Drift and diffusion coefficients of the projected dynamics:
//   beta^u      = <mu, L phi_u>
//   alpha^{uv}  = sum_l <mu, phi_u h^l + d_i phi_u sigma1^{il}>
//                       <mu, phi_v h^l + d_i phi_v sigma1^{il}>
double coeff_beta(const model::SystemCorrelatedNoise& sys, double t,
                  const measure::WeightedCloud& mu, const Dictionary& dict, int u);
double coeff_alpha(const model::SystemCorrelatedNoise& sys, double t,
                   const measure::WeightedCloud& mu, const Dictionary& dict,
                   int u, int v);
// Gram matrix [alpha^{uv}]_{u,v < k}; positive semidefinite by construction.
Mat coeff_alpha_matrix(const model::SystemCorrelatedNoise& sys, double t,
                       const measure::WeightedCloud& mu, const Dictionary& dict,
                       int k);

double coeff_beta_sensor(const model::SystemCorrelatedSensor& sys, double t,
                         const measure::WeightedCloud& mu, const Dictionary& dict,
                         int u);
Mat coeff_alpha_matrix_sensor(const model::SystemCorrelatedSensor& sys, double t,
                              const measure::WeightedCloud& mu,
                              const Dictionary& dict, int k);

// Cylinder function on sequence space: Phi(w) = g(w_1, ..., w_k).  Partials
// in coordinates beyond k vanish identically.
struct CylinderFunctionRInf {
  int k;
  OuterFunction base;

  double value(const Vec& w) const;
  double partial(int u, const Vec& w) const;
  double partial2(int u, int v, const Vec& w) const;
};

}  // namespace zakailab::calculus
