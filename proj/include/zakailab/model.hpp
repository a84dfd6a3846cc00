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

#include <optional>
#include <string>
#include <vector>

#include "zakailab/common.hpp"

namespace zakailab::model {

// Scalar time profile: constant, or a piecewise-linear table clamped outside
// its node range.  Tables are how time-dependent coefficients enter configs.
class TimeProfile {
 public:
  TimeProfile() : value_(1.0) {}
  explicit TimeProfile(double c) : value_(c) {}
  static TimeProfile table(std::vector<double> times, std::vector<double> values);

  double at(double t) const;
  bool is_constant() const { return times_.empty(); }
  bool nondecreasing() const;

 private:
  double value_;
  std::vector<double> times_, values_;
};

// Modulus r -> kappa(r), r > 0: constant (plain Lipschitz) or the slowly
// exploding c0 + c1*log(1 + 1/r) shape.
struct Modulus {
  double c0 = 1.0;
  double c1 = 0.0;  // coefficient on log(1 + 1/r)
  double at(double r) const;
};

// Vector-valued coefficient on R^n with values in R^p:
//   f(t, x) = tau(t) * (A x + c + P tanh(x) + q .* (x .* x))
// tanh acts elementwise.  The tanh term is the bounded smooth perturbation;
// the diagonal quadratic term (requires p == n) exists so growth-violating
// fixtures can be expressed and caught by the validator.
class VectorField {
 public:
  VectorField() = default;
  static VectorField zero(int p, int n);
  static VectorField constant(const Vec& c, int n);
  static VectorField affine(const Mat& A, const Vec& c);
  static VectorField affine_tanh(const Mat& A, const Vec& c, const Mat& P);
  static VectorField quadratic_diag(const Mat& A, const Vec& c, const Vec& q);

  VectorField with_time_profile(TimeProfile tau) const;

  int rows() const { return int(A_.rows()); }
  int cols() const { return int(A_.cols()); }
  void eval(double t, const Vec& x, Vec& out) const;
  Vec operator()(double t, const Vec& x) const;

 private:
  Mat A_;            // p x n
  Vec c_;            // p
  Mat P_;            // p x n, empty if unused
  Vec q_;            // p, empty if unused
  TimeProfile tau_;
};

// Matrix-valued coefficient on R^n with values in R^{p x q}:
//   S(t, x) = tau(t) * (M0 + M1 * tanh(v . x))
class MatrixField {
 public:
  MatrixField() = default;
  static MatrixField zero(int p, int q, int n);
  static MatrixField constant(const Mat& M0, int n);
  static MatrixField tanh_scaled(const Mat& M0, const Mat& M1, const Vec& v);

  MatrixField with_time_profile(TimeProfile tau) const;

  int rows() const { return int(M0_.rows()); }
  int cols() const { return int(M0_.cols()); }
  int state_dim() const { return n_; }
  bool state_dependent() const { return state_dep_; }
  void eval(double t, const Vec& x, Mat& out) const;
  Mat operator()(double t, const Vec& x) const;

 private:
  Mat M0_, M1_;
  Vec v_;
  int n_ = 0;
  bool state_dep_ = false;
  TimeProfile tau_;
};

// Square matrix-valued function of time alone: constant or a table of
// matrices interpolated entrywise (linear, clamped).
class TimeMatrix {
 public:
  TimeMatrix() = default;
  static TimeMatrix constant(const Mat& M);
  static TimeMatrix table(std::vector<double> times, std::vector<Mat> values);

  int dim() const { return dim_; }
  bool is_constant() const { return times_.empty(); }
  void eval(double t, Mat& out) const;
  Mat at(double t) const;

 private:
  int dim_ = 0;
  Mat M_;
  std::vector<double> times_;
  std::vector<Mat> values_;
};

// Signal/observation pair driven by independent B (d-dim) and W (m-dim),
// with W feeding both the signal and the observation:
//   dX = b1(t,X) dt + sigma0(t,X) dB + sigma1(t,X) dW      (signal, R^n)
//   dY = b2(t,X) dt + sigma2(t) dW                         (observation, R^m)
struct SystemCorrelatedNoise {
  int n = 1, m = 1, d = 1;
  VectorField b1;      // R^n
  MatrixField sigma0;  // n x d
  MatrixField sigma1;  // n x m
  VectorField b2;      // R^m
  TimeMatrix sigma2;   // m x m, invertible
  double cond_bound = 1e8;

  void check_dims() const;  // throws ConfigError naming the field
};

// Sensor-noise pair: the observation noise V = sigma2c W + sigma3c B mixes
// the signal's W with an independent B, under sigma2c sigma2c^T +
// sigma3c sigma3c^T = I_m:
//   dX = b1c(t,X) dt + sigma1c(t,X) dW                     (signal, R^n)
//   dY = b2c(t,X) dt + sigma2c dW + sigma3c dB             (observation, R^m)
struct SystemCorrelatedSensor {
  int n = 1, m = 1, d = 1;
  VectorField b1c;      // R^n
  MatrixField sigma1c;  // n x m
  VectorField b2c;      // R^m
  Mat sigma2c;          // m x m
  Mat sigma3c;          // m x d

  void check_dims() const;
  // PSD square root of I_m - sigma2c^T sigma2c: the covariance factor of the
  // signal-noise component not recoverable from the observation.  Eigenvalues
  // in [-1e-12, 0) clamp to 0; anything lower throws FactorizationError.
  Mat residual_noise_factor() const;
};

// h(t,x) solves sigma2(t) h = b2(t,x).  Throws SingularCoefficient naming t
// when the condition number of sigma2(t) exceeds sys.cond_bound.
Vec h_map(const SystemCorrelatedNoise& sys, double t, const Vec& x);
Mat sigma2_inverse(const SystemCorrelatedNoise& sys, double t);

// Quantitative regularity profile the validators test against:
//   |b1(t,x)-b1(t,y)|        <= L1(t) |x-y| kappa1(|x-y|)
//   |sigma0(t,x)-sigma0(t,y)|_F^2 <= L1(t) |x-y|^2 kappa2(|x-y|)
//   |sigma1(t,x)-sigma1(t,y)|_F^2 <= L1(t) |x-y|^2 kappa3(|x-y|)
//   |b1|^2 + |sigma0|_F^2 + |sigma1|_F^2 <= K1(t) (1+|x|)^2
//   |h(t,x)| <= K2
struct AssumptionProfile {
  TimeProfile L1{1.0};
  TimeProfile K1{4.0};
  double K2 = 1.0;
  Modulus kappa1, kappa2, kappa3;
};

struct ValidationSample {
  double t;
  Vec x1, x2;
};

struct ValidationCheck {
  std::string name;
  double worst = 0.0;      // largest observed lhs/rhs ratio (or raw defect)
  double bound = 1.0;      // pass iff worst <= bound (+1e-12 slack)
  bool pass = true;
  std::string where;       // sample at which `worst` was attained
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_pass() const;
  std::string summary() const;
};

// Deterministic sample plan: lattice points in [lo, hi] paired with both a
// neighbour and a far partner, crossed with the given times.
std::vector<ValidationSample> make_validation_samples(const Vec& lo, const Vec& hi,
                                                      const std::vector<double>& times,
                                                      int per_dim);

ValidationReport validate_correlated_noise(const SystemCorrelatedNoise& sys,
                                           const AssumptionProfile& profile,
                                           const std::vector<ValidationSample>& samples);

// Checks the sensor-noise identity to 1e-12 (Frobenius defect) and, when
// samples are given, |b2c| <= ceiling on them.
ValidationReport validate_correlated_sensor(const SystemCorrelatedSensor& sys,
                                            const std::vector<ValidationSample>& samples = {},
                                            double b2_ceiling = 1.0);

}  // namespace zakailab::model
