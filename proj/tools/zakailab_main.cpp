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
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zakailab/report.hpp"

using namespace zakailab;
using scenario::Scenario;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;  // empty: keep the scenario's directory
  std::optional<double> dt;
  std::optional<int> particles;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config, "scenario document (JSON)")
      ->required();
  cmd->add_option("--out", args->out, "output directory override");
  cmd->add_option("--seed", args->seed, "master seed override");
  cmd->add_option("--threads", args->threads, "ensemble worker bound");
  cmd->add_option("--dt-override", args->dt,
                  "step size override (must divide the horizon)");
  cmd->add_option("--particles-override", args->particles,
                  "particle count override");
}

Scenario load(const CommonArgs& args) {
  scenario::Overrides ov;
  ov.dt = args.dt;
  ov.particles = args.particles;
  ov.seed = args.seed;
  ov.threads = args.threads;
  Scenario sc = scenario::load_scenario(args.config, ov);
  if (!args.out.empty()) sc.out = args.out;
  return sc;
}

verify::EnsembleOptions ensemble_options(const Scenario& sc, int coarsen) {
  verify::EnsembleOptions opt;
  opt.runs = sc.ensemble_runs;
  opt.particles = sc.particles;
  opt.seed = sc.seed;
  opt.eval_stride = sc.eval_stride;
  opt.threads = sc.threads;
  opt.coarsen = coarsen;
  return opt;
}

verify::EnsembleLaw build_ensemble(const Scenario& sc, int coarsen) {
  const auto opt = ensemble_options(sc, coarsen);
  if (sc.variant == "cn")
    return verify::build_ensemble_cn(sc.cn, sc.grid, sc.dictionary,
                                     sc.initial, opt);
  return verify::build_ensemble_cs(sc.cs, sc.grid, sc.dictionary, sc.initial,
                                   opt);
}

sde::TruthTrajectory simulate_truth(const Scenario& sc,
                                    const paths::StreamKey& base) {
  const Vec x0 = sc.initial.sample(base.child("init", 0));
  if (sc.variant == "cn")
    return sde::simulate_truth_cn(sc.cn, sc.grid, x0, base);
  return sde::simulate_truth_cs(sc.cs, sc.grid, x0, base);
}

sde::DriverPath extract_driver(const Scenario& sc,
                               const sde::TruthTrajectory& truth) {
  if (sc.variant == "cn") return sde::extract_wtilde(sc.cn, truth);
  return sde::extract_vtilde(sc.cs, truth);
}

zakai::ZakaiPath solve(const Scenario& sc, const sde::DriverPath& driver,
                       int run_index) {
  zakai::SolverOptions opt;
  opt.particles = sc.particles;
  opt.seed = sc.seed;
  opt.run_index = run_index;
  opt.snapshot_stride = sc.eval_stride;
  if (sc.variant == "cn")
    return zakai::solve_zakai_cn(sc.cn, sc.grid, driver, sc.initial, opt);
  return zakai::solve_zakai_cs(sc.cs, sc.grid, driver, sc.initial, opt);
}

void print_reports(const std::vector<verify::ResidualReport>& rows) {
  for (const auto& r : rows)
    std::printf("[%s] %-11s %-28s t=%s residual=%s bound=%s\n",
                r.pass ? "pass" : "FAIL", r.kind.c_str(), r.label.c_str(),
                fmt_double(r.t).c_str(), fmt_double(r.residual).c_str(),
                fmt_double(3.0 * r.std_error + r.allowance).c_str());
}

bool all_pass(const std::vector<verify::ResidualReport>& rows) {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return true;
}

int emit_suite(const Scenario& sc, const std::string& suite,
               const std::vector<verify::ResidualReport>& rows) {
  report::ensure_directory(sc.out);
  report::write_reports_jsonl(report::artifact_path(sc, suite + "-reports.jsonl"),
                              rows);
  report::write_summary_csv(report::artifact_path(sc, suite + "-summary.csv"),
                            suite, rows);
  report::write_manifest(report::artifact_path(sc, suite + "-manifest.json"),
                         sc, "verify --suite " + suite);
  print_reports(rows);
  const bool ok = all_pass(rows);
  std::printf("%s: %zu checks, %s\n", suite.c_str(), rows.size(),
              ok ? "all pass" : "FAILURES");
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// simulate

std::vector<std::string> simulate_artifacts(const Scenario& sc) {
  std::vector<std::string> names;
  for (int p = 0; p < sc.truth_paths; ++p)
    names.push_back("truth" + std::to_string(p) + ".csv");
  names.push_back("moments.csv");
  names.push_back("diag.csv");
  names.push_back("cloud-final.csv");
  if (sc.linear) names.push_back("kalman-moments.csv");
  names.push_back("manifest.json");
  return names;
}

int cmd_simulate(const Scenario& sc, bool quiet) {
  report::ensure_directory(sc.out);
  zakai::ZakaiPath path;
  for (int p = 0; p < sc.truth_paths; ++p) {
    const auto base = paths::StreamKey(sc.seed).child("truth", p);
    const auto truth = simulate_truth(sc, base);
    report::write_trajectory_csv(
        report::artifact_path(sc, "truth" + std::to_string(p) + ".csv"),
        truth);
    if (p == 0) {
      path = solve(sc, extract_driver(sc, truth), 0);
      report::write_moments_csv(report::artifact_path(sc, "moments.csv"),
                                report::moments_from_path(path));
      report::write_diag_csv(report::artifact_path(sc, "diag.csv"), path);
      report::write_cloud_csv(report::artifact_path(sc, "cloud-final.csv"),
                              path.clouds.back());
      if (sc.linear) {
        const int J = sc.grid.steps;
        Mat dy(J, sc.driver_dim());
        for (int j = 0; j < J; ++j)
          dy.row(j) = truth.y.row(j + 1) - truth.y.row(j);
        const auto kr = oracle::kalman_bucy(*sc.linear, sc.grid, dy,
                                            sc.linear_mean0, sc.linear_cov0);
        report::write_moments_csv(
            report::artifact_path(sc, "kalman-moments.csv"),
            report::moments_from_kalman(kr));
      }
    }
  }
  report::write_manifest(report::artifact_path(sc, "manifest.json"), sc,
                         "simulate");
  if (!quiet) {
    for (const auto& name : simulate_artifacts(sc))
      std::printf("wrote %s\n", report::artifact_path(sc, name).c_str());
    std::printf("simulate: %d truth paths, %d snapshots, min ess %s\n",
                sc.truth_paths, path.snapshots(),
                fmt_double(path.min_ess).c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify suites

std::vector<verify::ResidualReport> fpe_rows(const verify::EnsembleLaw& ens,
                                             const Scenario& sc,
                                             double allowance) {
  std::vector<verify::ResidualReport> rows;
  for (double t : sc.fpe_times)
    for (const auto& item : sc.battery)
      rows.push_back(verify::fpe_residual(ens, item, t, allowance));
  return rows;
}

std::vector<verify::ResidualReport> martingale_rows(
    const verify::EnsembleLaw& ens, const Scenario& sc, double allowance) {
  const auto& ms = sc.martingale;
  std::vector<verify::ResidualReport> rows;
  for (const auto& phi : ms.phis)
    for (const auto& chi : ms.chis)
      rows.push_back(
          verify::martingale_residual(ens, phi, chi, ms.s, ms.t, allowance));
  return rows;
}

// Residuals with a refinement-calibrated (or fixed-C) discretization
// allowance.  `make` must evaluate the same checks in the same order on both
// ensembles; rows that carry no discretization bias (exact martingales) go in
// only on the final pass so they cannot pollute the calibration constant.
template <typename MakeRows>
std::vector<verify::ResidualReport> calibrated_rows(const Scenario& sc,
                                                    const MakeRows& make) {
  const verify::EnsembleLaw fine = build_ensemble(sc, 1);
  const double dt = sc.grid.dt();
  if (sc.tol.allowance_C >= 0.0)
    return make(fine, sc.tol.allowance_C * dt, true);
  const int f = sc.tol.refinement_factor;
  if (sc.grid.steps % f != 0 || sc.eval_stride % f != 0)
    throw ConfigError(
        "scenario.tolerances.refinement_factor: must divide grid.steps and "
        "eval_stride (or set allowance_C >= 0)");
  const verify::EnsembleLaw coarse = build_ensemble(sc, f);
  const auto cal = verify::calibrate_allowance(make(fine, 0.0, false),
                                               make(coarse, 0.0, false), dt, f);
  return make(fine, cal.allowance, true);
}

int cmd_fpe(const Scenario& sc) {
  if (sc.battery.empty())
    throw UnsupportedInput("fpe suite needs a battery (add a dictionary)");
  auto rows = calibrated_rows(sc, [&](const verify::EnsembleLaw& ens,
                                      double allowance, bool final_pass) {
    auto out = fpe_rows(ens, sc, allowance);
    if (final_pass)
      for (double t : sc.fpe_times) out.push_back(verify::mass_check(ens, t));
    return out;
  });
  return emit_suite(sc, "fpe", rows);
}

int cmd_martingale(const Scenario& sc) {
  if (sc.martingale.k < 1)
    throw UnsupportedInput("martingale suite needs a martingale section");
  auto rows = calibrated_rows(
      sc, [&](const verify::EnsembleLaw& ens, double allowance, bool) {
        return martingale_rows(ens, sc, allowance);
      });
  // projected covariations must form PSD Gram blocks wherever they were read
  double min_eig = 0.0;
  for (const auto& r : rows)
    if (std::isfinite(r.gram_min_eig)) min_eig = std::min(min_eig, r.gram_min_eig);
  verify::ResidualReport gram = rows.front();
  gram.kind = "gram-psd";
  gram.label = "alpha blocks";
  gram.residual = std::min(0.0, min_eig);
  gram.std_error = 0.0;
  gram.allowance = 1e-10;
  gram.gram_min_eig = min_eig;
  gram.pass = std::abs(gram.residual) <= gram.allowance;
  rows.push_back(gram);
  return emit_suite(sc, "martingale", rows);
}

int cmd_kalman(const Scenario& sc) {
  if (!sc.linear)
    throw UnsupportedInput(
        "kalman suite needs linear-Gaussian coefficients and initial law");
  std::vector<verify::ResidualReport> rows;
  for (int p = 0; p < sc.truth_paths; ++p) {
    const auto base = paths::StreamKey(sc.seed).child("truth", p);
    const auto truth = simulate_truth(sc, base);
    const auto path = solve(sc, extract_driver(sc, truth), p);
    const int J = sc.grid.steps;
    Mat dy(J, sc.driver_dim());
    for (int j = 0; j < J; ++j) dy.row(j) = truth.y.row(j + 1) - truth.y.row(j);
    const auto kr = oracle::kalman_bucy(*sc.linear, sc.grid, dy,
                                        sc.linear_mean0, sc.linear_cov0);
    const auto table = report::moments_from_path(path);

    const int K = path.snapshots();
    const int n = sc.state_dim();
    double mean_err = 0.0, var_particle = 0.0, var_kalman = 0.0;
    for (int k = 0; k < K; ++k) {
      const int j = path.snapshot_steps[size_t(k)];
      for (int a = 0; a < n; ++a) {
        mean_err += std::abs(table.means(k, a) - kr.means(j, a));
        var_particle += table.covs[size_t(k)](a, a);
        var_kalman += kr.covs[size_t(j)](a, a);
      }
    }
    mean_err /= double(K) * n;

    verify::ResidualReport m;
    m.kind = "kalman-mean";
    m.label = "path " + std::to_string(p);
    m.s = 0.0;
    m.t = sc.grid.horizon;
    m.runs = 1;
    m.particles = sc.particles;
    m.dt = sc.grid.dt();
    m.residual = mean_err;
    m.std_error = 0.0;
    m.allowance = sc.tol.kalman_mean_tol;
    m.pass = mean_err <= m.allowance;
    rows.push_back(m);

    verify::ResidualReport v = m;
    v.kind = "kalman-var";
    v.residual = var_kalman > 0.0
                     ? std::abs(var_particle - var_kalman) / var_kalman
                     : std::abs(var_particle);
    v.allowance = sc.tol.kalman_var_rel_tol;
    v.pass = v.residual <= v.allowance;
    rows.push_back(v);
  }
  return emit_suite(sc, "kalman", rows);
}

int cmd_audit(const Scenario& sc) {
  const auto ens = build_ensemble(sc, 1);
  const auto a = verify::fpe_integrability_audit(ens, sc.tol.audit_ceiling);
  verify::ResidualReport r;
  r.kind = "audit";
  r.label = a.variant + " coefficient pairing";
  r.s = 0.0;
  r.t = sc.grid.horizon;
  r.runs = a.runs;
  r.particles = sc.particles;
  r.dt = sc.grid.dt();
  r.residual = a.value;
  r.std_error = 0.0;
  r.allowance = a.ceiling;
  r.pass = a.pass;
  return emit_suite(sc, "audit", {r});
}

int cmd_reduction(const Scenario& sc) {
  if (sc.dictionary.size() == 0)
    throw UnsupportedInput("reduction suite needs a dictionary to pair with");
  std::vector<verify::ResidualReport> rows;
  for (int r = 0; r < sc.ensemble_runs; ++r) {
    const auto driver = sde::synthetic_driver(
        sc.grid, sc.driver_dim(), paths::StreamKey(sc.seed).child("driver", r));
    zakai::SolverOptions opt;
    opt.particles = sc.particles;
    opt.seed = sc.seed;
    opt.run_index = r;
    opt.snapshot_stride = sc.eval_stride;
    zakai::ZakaiPath a, b;
    if (sc.variant == "cn") {
      a = zakai::solve_zakai_cn(sc.cn, sc.grid, driver, sc.initial, opt);
      b = oracle::reference_filter_cn(sc.cn, sc.grid, driver, sc.initial, opt);
    } else {
      a = zakai::solve_zakai_cs(sc.cs, sc.grid, driver, sc.initial, opt);
      b = oracle::reference_filter_cs(sc.cs, sc.grid, driver, sc.initial, opt);
    }
    double worst = 0.0;
    std::vector<double> va(static_cast<size_t>(sc.particles));
    std::vector<double> vb(static_cast<size_t>(sc.particles));
    for (int k = 0; k < a.snapshots(); ++k) {
      const auto& mua = a.clouds[size_t(k)];
      const auto& mub = b.clouds[size_t(k)];
      worst = std::max(worst,
                       std::abs(measure::mass(mua) - measure::mass(mub)));
      for (int u = 0; u < sc.dictionary.size(); ++u) {
        const auto& phi = sc.dictionary[u];
        for (int i = 0; i < sc.particles; ++i) {
          va[size_t(i)] = phi.value(mua.atoms.row(i).transpose());
          vb[size_t(i)] = phi.value(mub.atoms.row(i).transpose());
        }
        worst = std::max(worst, std::abs(measure::pair_values(mua, va) -
                                         measure::pair_values(mub, vb)));
      }
    }
    verify::ResidualReport row;
    row.kind = "reduction";
    row.label = "run " + std::to_string(r);
    row.s = 0.0;
    row.t = sc.grid.horizon;
    row.runs = 1;
    row.particles = sc.particles;
    row.dt = sc.grid.dt();
    row.residual = worst;
    row.std_error = 0.0;
    row.allowance = sc.tol.reduction_tol;
    row.pass = worst <= row.allowance;
    rows.push_back(row);
  }
  return emit_suite(sc, "reduction", rows);
}

int cmd_lderiv(const Scenario& sc) {
  if (sc.dictionary.size() == 0)
    throw UnsupportedInput("lderiv suite needs a dictionary");
  const int n = sc.state_dim();
  const double eps = sc.tol.lderiv_eps;
  double worst_rel = 0.0;
  double worst_decay = 0.0;  // shortfall of e(4 eps)/e(eps) below order one
  int decay_samples = 0;
  for (int trial = 0; trial < sc.tol.lderiv_trials; ++trial) {
    const auto key = paths::StreamKey(sc.seed).child("lderiv", trial);
    paths::NormalStream ns(key.child("cloud", 0));
    const int N = 48;
    Mat atoms(N, n);
    int idx = 0;
    for (int i = 0; i < N; ++i)
      for (int a = 0; a < n; ++a) atoms(i, a) = 0.8 * ns.at(idx++);
    const auto mu = measure::WeightedCloud::uniform(atoms);

    const int k = std::min(2, sc.dictionary.size());
    std::vector<calculus::TestFunction> parts;
    for (int a = 0; a < k; ++a)
      parts.push_back(sc.dictionary[(trial + a) % sc.dictionary.size()]);
    calculus::OuterFunction g = calculus::OuterFunction::linear(k, 0);
    if (trial % 3 == 1) g = calculus::OuterFunction::bilinear(k, 0, k - 1);
    if (trial % 3 == 2) {
      paths::NormalStream ws(key.child("outer", 0));
      Vec w(k);
      for (int a = 0; a < k; ++a) w[a] = 0.3 * ws.at(a);
      g = calculus::OuterFunction::tanh_affine(w, 0.1 * ws.at(k));
    }
    const calculus::CylindricalFunctional G{g, parts};

    std::function<Vec(const Vec&)> v;
    switch (trial % 3) {
      case 0:
        v = [n](const Vec&) { return Vec::Constant(n, 0.7).eval(); };
        break;
      case 1:
        v = [](const Vec& x) { return (-0.5 * x).eval(); };
        break;
      default:
        v = [](const Vec& x) { return x.array().tanh().matrix().eval(); };
    }

    const double paired = oracle::lderiv_pairing(G, mu, v);
    const double scale = std::max(1.0, std::abs(paired));
    const double e_fine = std::abs(oracle::lderiv_fd(G, mu, v, eps) - paired) / scale;
    const double e_coarse =
        std::abs(oracle::lderiv_fd(G, mu, v, 4.0 * eps) - paired) / scale;
    worst_rel = std::max(worst_rel, e_fine);
    if (e_coarse > 1e-9) {
      ++decay_samples;
      worst_decay = std::max(worst_decay, 2.0 - e_coarse / std::max(e_fine, 1e-300));
    }
  }

  verify::ResidualReport rel;
  rel.kind = "lderiv-rel";
  rel.label = std::to_string(sc.tol.lderiv_trials) + " triples";
  rel.s = 0.0;
  rel.t = eps;
  rel.runs = sc.tol.lderiv_trials;
  rel.particles = 48;
  rel.dt = 0.0;
  rel.residual = worst_rel;
  rel.std_error = 0.0;
  rel.allowance = sc.tol.lderiv_rel_tol;
  rel.pass = worst_rel <= rel.allowance;

  verify::ResidualReport dec = rel;
  dec.kind = "lderiv-decay";
  dec.label = std::to_string(decay_samples) + " informative ratios";
  dec.residual = std::max(0.0, worst_decay);
  dec.allowance = 0.0;
  dec.pass = dec.residual <= 0.0;
  return emit_suite(sc, "lderiv", {rel, dec});
}

int cmd_verify(const Scenario& sc, const std::string& suite) {
  if (suite == "fpe") return cmd_fpe(sc);
  if (suite == "martingale") return cmd_martingale(sc);
  if (suite == "kalman") return cmd_kalman(sc);
  if (suite == "audit") return cmd_audit(sc);
  if (suite == "reduction") return cmd_reduction(sc);
  if (suite == "lderiv") return cmd_lderiv(sc);
  throw ConfigError("--suite: unknown suite '" + suite + "'");
}

// ---------------------------------------------------------------------------
// replay

std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw ConfigError("replay: missing artifact '" + file +
                      "' (run simulate first)");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_replay(const Scenario& sc) {
  // re-run the simulation into a scratch subdirectory with identical
  // identity, then demand byte equality file by file
  for (const auto& name : simulate_artifacts(sc))
    slurp(report::artifact_path(sc, name));  // fail early when absent
  Scenario rerun = sc;
  rerun.out = sc.out + "/replay";
  cmd_simulate(rerun, /*quiet=*/true);
  bool ok = true;
  for (const auto& name : simulate_artifacts(sc)) {
    const bool same = slurp(report::artifact_path(sc, name)) ==
                      slurp(report::artifact_path(rerun, name));
    ok = ok && same;
    std::printf("[%s] replay %s\n", same ? "pass" : "FAIL", name.c_str());
  }
  std::printf("replay: %s\n", ok ? "byte-identical" : "MISMATCH");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "zakailab: weighted-particle solvers for two correlated filtering "
      "models, with measure-space verification suites"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string suite = "fpe";
  auto* sim = app.add_subcommand(
      "simulate", "sample truth paths, run the filter, write tables");
  add_common(sim, &args);
  auto* ver = app.add_subcommand(
      "verify", "run one verification suite and write its reports");
  add_common(ver, &args);
  ver->add_option("--suite", suite,
                  "fpe | martingale | lderiv | kalman | audit | reduction");
  auto* aud = app.add_subcommand(
      "audit", "integrability audit of the coefficient pairings");
  add_common(aud, &args);
  auto* rep = app.add_subcommand(
      "replay", "re-run simulate and byte-compare existing artifacts");
  add_common(rep, &args);

  CLI11_PARSE(app, argc, argv);

  try {
    const Scenario sc = load(args);
    if (sim->parsed()) return cmd_simulate(sc, false);
    if (ver->parsed()) return cmd_verify(sc, suite);
    if (aud->parsed()) return cmd_audit(sc);
    if (rep->parsed()) return cmd_replay(sc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
