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
#include "zakailab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "zakailab/measure.hpp"
#include "zakailab/sde.hpp"

namespace zakailab::verify {

namespace {

double trapezoid(const Vec& times, const Vec& f) {
  double acc = 0.0;
  for (int i = 0; i + 1 < int(times.size()); ++i)
    acc += 0.5 * (times[i + 1] - times[i]) * (f[i] + f[i + 1]);
  return acc;
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats mean_and_error(const Vec& s) {
  const int M = int(s.size());
  Stats st;
  st.mean = s.mean();
  double acc = 0.0;
  for (int r = 0; r < M; ++r) {
    const double d = s[r] - st.mean;
    acc += d * d;
  }
  st.se = std::sqrt(acc / (M - 1)) / std::sqrt(double(M));
  return st;
}

sde::DriverPath coarsen_driver(const sde::DriverPath& fine, int factor) {
  const int J = fine.grid.steps / factor;
  sde::DriverPath out;
  out.grid = paths::TimeGrid(fine.grid.horizon, J);
  out.increments = Mat::Zero(J, fine.increments.cols());
  for (int j = 0; j < J; ++j)
    for (int a = 0; a < factor; ++a)
      out.increments.row(j) += fine.increments.row(j * factor + a);
  return out;
}

// One-step-at-a-time coefficient evaluation; `at` fills the generator drift
// b, the generator diffusion a, the level loading hvec and the gradient
// loading sig, and returns the integrability-audit integrand at x.
struct CnCoeffs {
  const model::SystemCorrelatedNoise& sys;
  Mat s2inv, s0;
  Vec b2;

  explicit CnCoeffs(const model::SystemCorrelatedNoise& s)
      : sys(s), s2inv(s.m, s.m), s0(s.n, s.d), b2(s.m) {}

  void set_time(double t) { s2inv = model::sigma2_inverse(sys, t); }

  double at(double t, const Vec& x, Vec& b, Mat& a, Vec& hvec, Mat& sig) {
    sys.b1.eval(t, x, b);
    sys.sigma0.eval(t, x, s0);
    sys.sigma1.eval(t, x, sig);
    a.noalias() = s0 * s0.transpose();
    const double s0term = a.norm();
    a.noalias() += sig * sig.transpose();
    sys.b2.eval(t, x, b2);
    hvec.noalias() = s2inv * b2;
    return b.norm() + hvec.squaredNorm() + sig.squaredNorm() + s0term;
  }
};

struct CsCoeffs {
  const model::SystemCorrelatedSensor& sys;
  Mat s1;

  explicit CsCoeffs(const model::SystemCorrelatedSensor& s)
      : sys(s), s1(s.n, s.m) {}

  void set_time(double) {}

  double at(double t, const Vec& x, Vec& b, Mat& a, Vec& hvec, Mat& sig) {
    sys.b1c.eval(t, x, b);
    sys.sigma1c.eval(t, x, s1);
    a.noalias() = s1 * s1.transpose();
    sys.b2c.eval(t, x, hvec);
    sig.noalias() = s1 * sys.sigma2c.transpose();
    return b.norm() + s1.squaredNorm() + hvec.squaredNorm();
  }
};

template <typename Coeffs>
RunObservables extract_observables(const zakai::ZakaiPath& path,
                                   const calculus::Dictionary& dict, int m,
                                   Coeffs& cf) {
  const int K = path.snapshots();
  const int U = dict.size();
  const int n = path.clouds.front().dim();

  RunObservables out;
  out.z = Mat::Zero(K, U);
  out.beta = Mat::Zero(K, U);
  out.alpha.assign(size_t(K), Mat());
  out.mass = Vec::Zero(K);
  out.audit = Vec::Zero(K);

  std::vector<std::vector<double>> zvals(static_cast<size_t>(U));
  std::vector<std::vector<double>> bvals(static_cast<size_t>(U));
  std::vector<std::vector<double>> avals(static_cast<size_t>(U) *
                                         static_cast<size_t>(m));
  std::vector<double> audvals;
  Vec x(n), g(n), b(n), hvec(m);
  Mat H(n, n), a(n, n), sig(n, m), A(U, m);

  for (int kk = 0; kk < K; ++kk) {
    const double t = path.time_of(kk);
    const auto& mu = path.clouds[size_t(kk)];
    const int N = mu.size();
    cf.set_time(t);

    for (auto& v : zvals) v.assign(size_t(N), 0.0);
    for (auto& v : bvals) v.assign(size_t(N), 0.0);
    for (auto& v : avals) v.assign(size_t(N), 0.0);
    audvals.assign(size_t(N), 0.0);

    for (int i = 0; i < N; ++i) {
      x = mu.atoms.row(i);
      audvals[size_t(i)] = cf.at(t, x, b, a, hvec, sig);
      for (int u = 0; u < U; ++u) {
        const auto& phi = dict[u];
        const double pv = phi.value(x);
        phi.gradient(x, g);
        phi.hessian(x, H);
        zvals[size_t(u)][size_t(i)] = pv;
        bvals[size_t(u)][size_t(i)] = b.dot(g) + 0.5 * a.cwiseProduct(H).sum();
        for (int l = 0; l < m; ++l)
          avals[size_t(u) * size_t(m) + size_t(l)][size_t(i)] =
              pv * hvec[l] + g.dot(sig.col(l));
      }
    }
    for (int u = 0; u < U; ++u) {
      out.z(kk, u) = measure::pair_values(mu, zvals[size_t(u)]);
      out.beta(kk, u) = measure::pair_values(mu, bvals[size_t(u)]);
      for (int l = 0; l < m; ++l)
        A(u, l) =
            measure::pair_values(mu, avals[size_t(u) * size_t(m) + size_t(l)]);
    }
    out.alpha[size_t(kk)] = A * A.transpose();
    out.mass[kk] = measure::mass(mu);
    out.audit[kk] = measure::pair_values(mu, audvals);
  }
  return out;
}

void validate_ensemble(const paths::TimeGrid& grid,
                       const calculus::Dictionary& dict, int n,
                       const EnsembleOptions& opt) {
  if (opt.runs < 2) throw ConfigError("ensemble: need at least two runs");
  if (opt.particles < 1) throw ConfigError("ensemble: need particles >= 1");
  if (opt.eval_stride < 1)
    throw ConfigError("ensemble: evaluation stride must be >= 1");
  if (opt.threads < 1) throw ConfigError("ensemble: thread count must be >= 1");
  if (opt.coarsen < 1)
    throw ConfigError("ensemble: coarsening factor must be >= 1");
  if (grid.steps % opt.coarsen != 0)
    throw ConfigError("ensemble: coarsening factor must divide the step count");
  if (opt.eval_stride % opt.coarsen != 0)
    throw ConfigError(
        "ensemble: coarsening factor must divide the evaluation stride");
  if (dict.size() < 1) throw ConfigError("ensemble: empty dictionary");
  if (dict[0].dim() != n)
    throw ConfigError("ensemble: dictionary dimension mismatch");
}

// Fixed run-to-slot assignment: run r's work and destination depend only on
// r, so the result is byte-identical for any thread count.
void run_parallel(int runs, int threads, const std::function<void(int)>& work) {
  threads = std::min(threads, runs);
  if (threads <= 1) {
    for (int r = 0; r < runs; ++r) work(r);
    return;
  }
  std::exception_ptr first_error;
  std::mutex guard;
  std::vector<std::thread> pool;
  pool.reserve(size_t(threads));
  for (int tid = 0; tid < threads; ++tid) {
    pool.emplace_back([&, tid] {
      try {
        for (int r = tid; r < runs; r += threads) work(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

int EnsembleLaw::eval_index(double t) const {
  const double tol = 1e-9 * std::max(1.0, grid.horizon);
  for (int i = 0; i < eval_count(); ++i)
    if (std::abs(times[i] - t) <= tol) return i;
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "ensemble: t=%g is not an evaluation time", t);
  throw UnsupportedInput(buf);
}

EnsembleLaw build_ensemble_cn(const model::SystemCorrelatedNoise& sys,
                              const paths::TimeGrid& grid,
                              const calculus::Dictionary& dict,
                              const zakai::InitialLaw& init,
                              const EnsembleOptions& opt) {
  sys.check_dims();
  validate_ensemble(grid, dict, sys.n, opt);

  EnsembleLaw ens;
  ens.grid = paths::TimeGrid(grid.horizon, grid.steps / opt.coarsen);
  ens.dict = dict;
  ens.particles = opt.particles;
  ens.seed = opt.seed;
  ens.variant = "cn";
  ens.runs.resize(size_t(opt.runs));

  const int stride = opt.eval_stride / opt.coarsen;
  std::vector<int> steps0;

  run_parallel(opt.runs, opt.threads, [&](int r) {
    auto driver = sde::synthetic_driver(
        grid, sys.m, paths::StreamKey(opt.seed).child("driver", std::uint64_t(r)));
    if (opt.coarsen > 1) driver = coarsen_driver(driver, opt.coarsen);

    zakai::SolverOptions sopt;
    sopt.particles = opt.particles;
    sopt.seed = opt.seed;
    sopt.run_index = r;
    sopt.snapshot_stride = stride;

    auto path = zakai::solve_zakai_cn(sys, ens.grid, driver, init, sopt);
    if (r == 0) steps0 = path.snapshot_steps;
    CnCoeffs cf(sys);
    ens.runs[size_t(r)] = extract_observables(path, dict, sys.m, cf);
  });

  ens.eval_steps = steps0;
  ens.times = Vec::Zero(int(steps0.size()));
  for (size_t i = 0; i < steps0.size(); ++i)
    ens.times[int(i)] = ens.grid.time(steps0[i]);
  return ens;
}

EnsembleLaw build_ensemble_cs(const model::SystemCorrelatedSensor& sys,
                              const paths::TimeGrid& grid,
                              const calculus::Dictionary& dict,
                              const zakai::InitialLaw& init,
                              const EnsembleOptions& opt) {
  sys.check_dims();
  validate_ensemble(grid, dict, sys.n, opt);

  EnsembleLaw ens;
  ens.grid = paths::TimeGrid(grid.horizon, grid.steps / opt.coarsen);
  ens.dict = dict;
  ens.particles = opt.particles;
  ens.seed = opt.seed;
  ens.variant = "cs";
  ens.runs.resize(size_t(opt.runs));

  const int stride = opt.eval_stride / opt.coarsen;
  std::vector<int> steps0;

  run_parallel(opt.runs, opt.threads, [&](int r) {
    auto driver = sde::synthetic_driver(
        grid, sys.m, paths::StreamKey(opt.seed).child("driver", std::uint64_t(r)));
    if (opt.coarsen > 1) driver = coarsen_driver(driver, opt.coarsen);

    zakai::SolverOptions sopt;
    sopt.particles = opt.particles;
    sopt.seed = opt.seed;
    sopt.run_index = r;
    sopt.snapshot_stride = stride;

    auto path = zakai::solve_zakai_cs(sys, ens.grid, driver, init, sopt);
    if (r == 0) steps0 = path.snapshot_steps;
    CsCoeffs cf(sys);
    ens.runs[size_t(r)] = extract_observables(path, dict, sys.m, cf);
  });

  ens.eval_steps = steps0;
  ens.times = Vec::Zero(int(steps0.size()));
  for (size_t i = 0; i < steps0.size(); ++i)
    ens.times[int(i)] = ens.grid.time(steps0[i]);
  return ens;
}

std::vector<BatteryItem> standard_battery(const calculus::Dictionary& dict) {
  using calculus::OuterFunction;
  if (dict.size() < 3)
    throw ConfigError("standard_battery: needs at least three dictionary slots");
  std::vector<BatteryItem> out;
  auto lin = [&](int c) {
    out.push_back({OuterFunction::linear(1, 0), {c},
                   "lin " + dict[c].label()});
  };
  auto quad = [&](int c0, int c1) {
    if (c0 == c1)
      out.push_back({OuterFunction::bilinear(1, 0, 0), {c0},
                     "quad " + dict[c0].label() + "*" + dict[c1].label()});
    else
      out.push_back({OuterFunction::bilinear(2, 0, 1), {c0, c1},
                     "quad " + dict[c0].label() + "*" + dict[c1].label()});
  };
  lin(0);
  lin(1);
  lin(2);
  quad(1, 1);
  quad(1, 2);
  quad(2, 2);
  out.push_back({OuterFunction::tanh_affine(
                     (Vec(3) << 0.8, -0.5, 0.3).finished(), 0.1),
                 {0, 1, 2}, "tanh[a]"});
  out.push_back({OuterFunction::tanh_affine(
                     (Vec(3) << -0.4, 0.9, -0.7).finished(), -0.2),
                 {0, 1, 2}, "tanh[b]"});
  return out;
}

namespace {

void check_battery_item(const EnsembleLaw& ens, const BatteryItem& item) {
  if (int(item.coords.size()) != item.g.arity())
    throw ConfigError("battery item: coordinate count must match arity");
  for (int c : item.coords)
    if (c < 0 || c >= ens.dict.size())
      throw ConfigError("battery item: coordinate outside the dictionary");
}

void select(const Mat& table, int row, const std::vector<int>& coords,
            Vec& out) {
  for (size_t a = 0; a < coords.size(); ++a)
    out[int(a)] = table(row, coords[a]);
}

ResidualReport make_report(const EnsembleLaw& ens, const char* kind,
                           std::string label, double s, double t,
                           const Vec& samples, double allowance) {
  const auto st = mean_and_error(samples);
  ResidualReport rep;
  rep.kind = kind;
  rep.label = std::move(label);
  rep.s = s;
  rep.t = t;
  rep.runs = ens.size();
  rep.particles = ens.particles;
  rep.dt = ens.grid.dt();
  rep.residual = st.mean;
  rep.std_error = st.se;
  rep.allowance = allowance;
  rep.pass = std::abs(rep.residual) <= 3.0 * rep.std_error + rep.allowance;
  return rep;
}

}  // namespace

ResidualReport fpe_residual(const EnsembleLaw& ens, const BatteryItem& item,
                            double t, double allowance) {
  if (allowance < 0.0) throw ConfigError("fpe_residual: negative allowance");
  check_battery_item(ens, item);
  const int it = ens.eval_index(t);
  const int k = item.g.arity();
  const int M = ens.size();

  Vec S(M), zsel(k), bsel(k), f(it + 1);
  for (int r = 0; r < M; ++r) {
    const auto& run = ens.runs[size_t(r)];
    for (int i = 0; i <= it; ++i) {
      select(run.z, i, item.coords, zsel);
      select(run.beta, i, item.coords, bsel);
      const Vec gz = item.g.grad(zsel);
      const Mat Hg = item.g.hess(zsel);
      double quad = 0.0;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
          quad += Hg(a, b) *
                  run.alpha[size_t(i)](item.coords[size_t(a)],
                                       item.coords[size_t(b)]);
      f[i] = 0.5 * quad + gz.dot(bsel);
    }
    select(run.z, it, item.coords, zsel);
    const double g_t = item.g.value(zsel);
    select(run.z, 0, item.coords, zsel);
    const double g_0 = item.g.value(zsel);
    S[r] = g_t - g_0 - trapezoid(ens.times.head(it + 1), f);
  }
  return make_report(ens, "fpe", item.label, 0.0, ens.times[it], S, allowance);
}

std::string TestMartFunctional::label() const {
  if (times.empty()) return "1";
  std::string out;
  char buf[48];
  for (size_t j = 0; j < times.size(); ++j) {
    std::snprintf(buf, sizeof buf, "tanh(w%d@%g)", coords[j], times[j]);
    if (j) out += "*";
    out += buf;
  }
  return out;
}

double TestMartFunctional::value(const EnsembleLaw& ens,
                                 const RunObservables& run) const {
  if (times.size() != coords.size())
    throw ConfigError("path functional: times/coords size mismatch");
  double v = 1.0;
  for (size_t j = 0; j < times.size(); ++j) {
    if (coords[j] < 0 || coords[j] >= ens.dict.size())
      throw ConfigError("path functional: coordinate outside the dictionary");
    v *= std::tanh(run.z(ens.eval_index(times[j]), coords[j]));
  }
  return v;
}

ResidualReport martingale_residual(const EnsembleLaw& ens,
                                   const calculus::CylinderFunctionRInf& Phi,
                                   const TestMartFunctional& chi, double s,
                                   double t, double allowance) {
  if (allowance < 0.0)
    throw ConfigError("martingale_residual: negative allowance");
  if (!(s >= 0.0) || !(s < t))
    throw ConfigError("martingale_residual: need 0 <= s < t");
  if (Phi.k < 1 || Phi.k > ens.dict.size())
    throw ConfigError("martingale_residual: truncation exceeds the dictionary");
  const double tol = 1e-9 * std::max(1.0, ens.grid.horizon);
  for (double tau : chi.times)
    if (tau > s + tol)
      throw ConfigError(
          "martingale_residual: conditioning functional uses times after s");

  const int is = ens.eval_index(s);
  const int it = ens.eval_index(t);
  const int M = ens.size();
  const int k = Phi.k;

  double min_eig = std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es;

  Vec S(M), w, f(it - is + 1);
  const Vec tseg = ens.times.segment(is, it - is + 1);
  for (int r = 0; r < M; ++r) {
    const auto& run = ens.runs[size_t(r)];
    for (int i = is; i <= it; ++i) {
      w = run.z.row(i);
      double drift = 0.0;
      for (int u = 0; u < k; ++u) drift += run.beta(i, u) * Phi.partial(u, w);
      double quad = 0.0;
      for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v)
          quad += run.alpha[size_t(i)](u, v) * Phi.partial2(u, v, w);
      f[i - is] = 0.5 * quad + drift;
      es.compute(run.alpha[size_t(i)].topLeftCorner(k, k),
                 Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    w = run.z.row(it);
    const double phi_t = Phi.value(w);
    w = run.z.row(is);
    const double phi_s = Phi.value(w);
    S[r] = (phi_t - phi_s - trapezoid(tseg, f)) * chi.value(ens, run);
  }
  auto rep = make_report(ens, "martingale",
                         Phi.base.label() + " | chi=" + chi.label(),
                         ens.times[is], ens.times[it], S, allowance);
  rep.gram_min_eig = min_eig;
  return rep;
}

ResidualReport mass_check(const EnsembleLaw& ens, double t) {
  const int it = ens.eval_index(t);
  Vec S(ens.size());
  for (int r = 0; r < ens.size(); ++r) S[r] = ens.runs[size_t(r)].mass[it];
  auto rep = make_report(ens, "mass", "<mu,1>", 0.0, ens.times[it], S, 0.0);
  rep.residual -= 1.0;
  rep.pass = std::abs(rep.residual) <= 3.0 * rep.std_error;
  return rep;
}

AuditReport fpe_integrability_audit(const EnsembleLaw& ens, double ceiling) {
  Vec vals(ens.size());
  for (int r = 0; r < ens.size(); ++r)
    vals[r] = trapezoid(ens.times, ens.runs[size_t(r)].audit);
  AuditReport rep;
  rep.variant = ens.variant;
  rep.value = vals.mean();
  rep.ceiling = ceiling;
  rep.runs = ens.size();
  rep.pass = std::isfinite(rep.value) && rep.value <= ceiling;
  return rep;
}

Calibration calibrate_allowance(const std::vector<ResidualReport>& fine,
                                const std::vector<ResidualReport>& coarse,
                                double dt_fine, int factor) {
  if (factor < 2)
    throw ConfigError("calibrate_allowance: refinement factor must be >= 2");
  if (fine.empty() || fine.size() != coarse.size())
    throw ConfigError("calibrate_allowance: report lists must align");
  if (!(dt_fine > 0.0))
    throw ConfigError("calibrate_allowance: dt must be positive");
  double shift = 0.0;
  for (size_t i = 0; i < fine.size(); ++i)
    shift = std::max(shift,
                     std::abs(coarse[i].residual - fine[i].residual));
  Calibration cal;
  cal.C = shift / (dt_fine * (factor - 1));
  cal.allowance = cal.C * dt_fine;
  return cal;
}

}  // namespace zakailab::verify
