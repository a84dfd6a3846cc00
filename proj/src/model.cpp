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
#include "zakailab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace zakailab::model {

TimeProfile TimeProfile::table(std::vector<double> times, std::vector<double> values) {
  if (times.size() < 2 || times.size() != values.size())
    throw ConfigError("TimeProfile.table: need >= 2 nodes, same count of values");
  if (!std::is_sorted(times.begin(), times.end()))
    throw ConfigError("TimeProfile.table: times must be sorted");
  TimeProfile p;
  p.times_ = std::move(times);
  p.values_ = std::move(values);
  p.value_ = p.values_.front();
  return p;
}

double TimeProfile::at(double t) const {
  if (times_.empty()) return value_;
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = it - times_.begin();
  const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
  return values_[i - 1] + w * (values_[i] - values_[i - 1]);
}

bool TimeProfile::nondecreasing() const {
  return times_.empty() || std::is_sorted(values_.begin(), values_.end());
}

double Modulus::at(double r) const {
  if (!(r > 0.0)) throw UnsupportedInput("Modulus: r must be positive");
  return c0 + (c1 != 0.0 ? c1 * std::log1p(1.0 / r) : 0.0);
}

VectorField VectorField::zero(int p, int n) {
  return affine(Mat::Zero(p, n), Vec::Zero(p));
}

VectorField VectorField::constant(const Vec& c, int n) {
  return affine(Mat::Zero(c.size(), n), c);
}

VectorField VectorField::affine(const Mat& A, const Vec& c) {
  if (A.rows() != c.size())
    throw ConfigError("VectorField.affine: A rows must match c length");
  VectorField f;
  f.A_ = A;
  f.c_ = c;
  return f;
}

VectorField VectorField::affine_tanh(const Mat& A, const Vec& c, const Mat& P) {
  VectorField f = affine(A, c);
  if (P.rows() != A.rows() || P.cols() != A.cols())
    throw ConfigError("VectorField.affine_tanh: P must have A's shape");
  f.P_ = P;
  return f;
}

VectorField VectorField::quadratic_diag(const Mat& A, const Vec& c, const Vec& q) {
  VectorField f = affine(A, c);
  if (A.rows() != A.cols() || q.size() != A.rows())
    throw ConfigError("VectorField.quadratic_diag: needs p == n == len(q)");
  f.q_ = q;
  return f;
}

VectorField VectorField::with_time_profile(TimeProfile tau) const {
  VectorField f = *this;
  f.tau_ = std::move(tau);
  return f;
}

void VectorField::eval(double t, const Vec& x, Vec& out) const {
  out.noalias() = A_ * x;
  out += c_;
  if (P_.size() > 0) out.noalias() += P_ * x.array().tanh().matrix();
  if (q_.size() > 0) out.array() += q_.array() * x.array().square();
  if (!tau_.is_constant() || tau_.at(t) != 1.0) out *= tau_.at(t);
}

Vec VectorField::operator()(double t, const Vec& x) const {
  Vec out(rows());
  eval(t, x, out);
  return out;
}

MatrixField MatrixField::zero(int p, int q, int n) {
  return constant(Mat::Zero(p, q), n);
}

MatrixField MatrixField::constant(const Mat& M0, int n) {
  MatrixField s;
  s.M0_ = M0;
  s.n_ = n;
  return s;
}

MatrixField MatrixField::tanh_scaled(const Mat& M0, const Mat& M1, const Vec& v) {
  if (M1.rows() != M0.rows() || M1.cols() != M0.cols())
    throw ConfigError("MatrixField.tanh_scaled: M1 must have M0's shape");
  MatrixField s;
  s.M0_ = M0;
  s.M1_ = M1;
  s.v_ = v;
  s.n_ = int(v.size());
  s.state_dep_ = true;
  return s;
}

MatrixField MatrixField::with_time_profile(TimeProfile tau) const {
  MatrixField s = *this;
  s.tau_ = std::move(tau);
  return s;
}

void MatrixField::eval(double t, const Vec& x, Mat& out) const {
  out = M0_;
  if (state_dep_) out += std::tanh(v_.dot(x)) * M1_;
  const double f = tau_.at(t);
  if (f != 1.0) out *= f;
}

Mat MatrixField::operator()(double t, const Vec& x) const {
  Mat out(rows(), cols());
  eval(t, x, out);
  return out;
}

TimeMatrix TimeMatrix::constant(const Mat& M) {
  if (M.rows() != M.cols()) throw ConfigError("TimeMatrix: must be square");
  TimeMatrix s;
  s.M_ = M;
  s.dim_ = int(M.rows());
  return s;
}

TimeMatrix TimeMatrix::table(std::vector<double> times, std::vector<Mat> values) {
  if (times.size() < 2 || times.size() != values.size())
    throw ConfigError("TimeMatrix.table: need >= 2 nodes, same count of values");
  if (!std::is_sorted(times.begin(), times.end()))
    throw ConfigError("TimeMatrix.table: times must be sorted");
  for (const Mat& M : values)
    if (M.rows() != M.cols() || M.rows() != values.front().rows())
      throw ConfigError("TimeMatrix.table: entries must be square, same dim");
  TimeMatrix s;
  s.dim_ = int(values.front().rows());
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

void TimeMatrix::eval(double t, Mat& out) const {
  if (times_.empty()) {
    out = M_;
    return;
  }
  if (t <= times_.front()) {
    out = values_.front();
    return;
  }
  if (t >= times_.back()) {
    out = values_.back();
    return;
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = it - times_.begin();
  const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
  out = (1.0 - w) * values_[i - 1] + w * values_[i];
}

Mat TimeMatrix::at(double t) const {
  Mat out(dim_, dim_);
  eval(t, out);
  return out;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void SystemCorrelatedNoise::check_dims() const {
  require(n >= 1 && m >= 1 && d >= 1, "system dims must be >= 1");
  require(b1.rows() == n && b1.cols() == n, "b1 must map R^n -> R^n");
  require(sigma0.rows() == n && sigma0.cols() == d && sigma0.state_dim() == n,
          "sigma0 must be n x d over R^n");
  require(sigma1.rows() == n && sigma1.cols() == m && sigma1.state_dim() == n,
          "sigma1 must be n x m over R^n");
  require(b2.rows() == m && b2.cols() == n, "b2 must map R^n -> R^m");
  require(sigma2.dim() == m, "sigma2 must be m x m");
}

void SystemCorrelatedSensor::check_dims() const {
  require(n >= 1 && m >= 1 && d >= 1, "system dims must be >= 1");
  require(b1c.rows() == n && b1c.cols() == n, "b1c must map R^n -> R^n");
  require(sigma1c.rows() == n && sigma1c.cols() == m && sigma1c.state_dim() == n,
          "sigma1c must be n x m over R^n");
  require(b2c.rows() == m && b2c.cols() == n, "b2c must map R^n -> R^m");
  require(sigma2c.rows() == m && sigma2c.cols() == m, "sigma2c must be m x m");
  require(sigma3c.rows() == m && sigma3c.cols() == d, "sigma3c must be m x d");
}

Mat SystemCorrelatedSensor::residual_noise_factor() const {
  const Mat S = Mat::Identity(m, m) - sigma2c.transpose() * sigma2c;
  if (S.isIdentity(0.0)) return Mat::Identity(m, m);
  Eigen::SelfAdjointEigenSolver<Mat> eig(S);
  if (eig.info() != Eigen::Success)
    throw FactorizationError("residual_noise_factor: eigensolver failed");
  Vec lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-12)
      throw FactorizationError(
          "residual_noise_factor: I - sigma2c^T sigma2c has eigenvalue " +
          std::to_string(lam[i]) + " < -1e-12");
    lam[i] = std::max(lam[i], 0.0);
  }
  return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

Mat sigma2_inverse(const SystemCorrelatedNoise& sys, double t) {
  const Mat S = sys.sigma2.at(t);
  Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > sys.cond_bound)
    throw SingularCoefficient("sigma2 is singular/ill-conditioned at t=" +
                              fmt_double(t));
  return svd.solve(Mat::Identity(sys.m, sys.m));
}

Vec h_map(const SystemCorrelatedNoise& sys, double t, const Vec& x) {
  return sigma2_inverse(sys, t) * sys.b2(t, x);
}

bool ValidationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const ValidationCheck& c) { return c.pass; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks)
    os << (c.pass ? "pass " : "FAIL ") << c.name << " worst=" << c.worst
       << " bound=" << c.bound << (c.where.empty() ? "" : " at " + c.where)
       << "\n";
  return os.str();
}

namespace {

std::string describe(const ValidationSample& s) {
  std::ostringstream os;
  os << "t=" << s.t << " x1=[" << s.x1.transpose() << "] x2=[" << s.x2.transpose()
     << "]";
  return os.str();
}

// Records lhs <= rhs as the ratio lhs/rhs; rhs == 0 passes only if lhs == 0.
void score(ValidationCheck& c, double lhs, double rhs, const ValidationSample& s) {
  const double ratio =
      rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  if (ratio > c.worst) {
    c.worst = ratio;
    c.where = describe(s);
  }
}

}  // namespace

std::vector<ValidationSample> make_validation_samples(const Vec& lo, const Vec& hi,
                                                      const std::vector<double>& times,
                                                      int per_dim) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw ConfigError("make_validation_samples: box dims mismatch");
  if (per_dim < 2) throw ConfigError("make_validation_samples: per_dim >= 2");
  const int n = int(lo.size());
  long total = 1;
  for (int i = 0; i < n; ++i) {
    total *= per_dim;
    if (total > 4096) throw ConfigError("make_validation_samples: lattice too large");
  }
  std::vector<Vec> pts;
  pts.reserve(total);
  for (long idx = 0; idx < total; ++idx) {
    Vec x(n);
    long rem = idx;
    for (int i = 0; i < n; ++i) {
      const int k = int(rem % per_dim);
      rem /= per_dim;
      x[i] = lo[i] + (hi[i] - lo[i]) * k / (per_dim - 1);
    }
    pts.push_back(std::move(x));
  }
  std::vector<ValidationSample> samples;
  for (double t : times)
    for (std::size_t i = 0; i < pts.size(); ++i) {
      samples.push_back({t, pts[i], pts[(i + 1) % pts.size()]});
      samples.push_back({t, pts[i], pts[(i + pts.size() / 2) % pts.size()]});
    }
  return samples;
}

ValidationReport validate_correlated_noise(const SystemCorrelatedNoise& sys,
                                           const AssumptionProfile& profile,
                                           const std::vector<ValidationSample>& samples) {
  sys.check_dims();
  ValidationReport rep;
  ValidationCheck mod_b1, mod_s0, mod_s1, growth, hbound;
  mod_b1.name = "b1 modulus";
  mod_s0.name = "sigma0 modulus";
  mod_s1.name = "sigma1 modulus";
  growth.name = "linear growth";
  hbound.name = "h bound";

  for (const auto& s : samples) {
    const double r = (s.x1 - s.x2).norm();
    const double L = profile.L1.at(s.t);
    if (r > 0.0) {
      score(mod_b1, (sys.b1(s.t, s.x1) - sys.b1(s.t, s.x2)).norm(),
            L * r * profile.kappa1.at(r), s);
      score(mod_s0, (sys.sigma0(s.t, s.x1) - sys.sigma0(s.t, s.x2)).squaredNorm(),
            L * r * r * profile.kappa2.at(r), s);
      score(mod_s1, (sys.sigma1(s.t, s.x1) - sys.sigma1(s.t, s.x2)).squaredNorm(),
            L * r * r * profile.kappa3.at(r), s);
    }
    for (const Vec* x : {&s.x1, &s.x2}) {
      const double lhs = sys.b1(s.t, *x).squaredNorm() +
                         sys.sigma0(s.t, *x).squaredNorm() +
                         sys.sigma1(s.t, *x).squaredNorm();
      const double nx = 1.0 + x->norm();
      score(growth, lhs, profile.K1.at(s.t) * nx * nx, s);
      score(hbound, h_map(sys, s.t, *x).norm(), profile.K2, s);
    }
  }
  for (ValidationCheck* c : {&mod_b1, &mod_s0, &mod_s1, &growth, &hbound}) {
    c->pass = c->worst <= c->bound + 1e-12;
    rep.checks.push_back(*c);
  }
  return rep;
}

ValidationReport validate_correlated_sensor(const SystemCorrelatedSensor& sys,
                                            const std::vector<ValidationSample>& samples,
                                            double b2_ceiling) {
  sys.check_dims();
  ValidationReport rep;
  ValidationCheck ident;
  ident.name = "sensor noise identity";
  ident.bound = 1e-12;
  ident.worst = (sys.sigma2c * sys.sigma2c.transpose() +
                 sys.sigma3c * sys.sigma3c.transpose() - Mat::Identity(sys.m, sys.m))
                    .norm();
  ident.pass = ident.worst <= ident.bound;
  rep.checks.push_back(ident);

  if (!samples.empty()) {
    ValidationCheck bound;
    bound.name = "b2c bound";
    for (const auto& s : samples)
      for (const Vec* x : {&s.x1, &s.x2})
        score(bound, sys.b2c(s.t, *x).norm(), b2_ceiling, s);
    bound.pass = bound.worst <= bound.bound + 1e-12;
    rep.checks.push_back(bound);
  }
  return rep;
}

}  // namespace zakailab::model
