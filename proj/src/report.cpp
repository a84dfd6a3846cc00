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
#include "zakailab/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "zakailab/measure.hpp"

namespace zakailab::report {

namespace {

std::ofstream open_out(const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("report: cannot open '" + file + "' for writing");
  return out;
}

// commas would break the summary table; labels are ours, so just keep them
// clean defensively
std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

}  // namespace

MomentTable moments_from_path(const zakai::ZakaiPath& path) {
  const int K = path.snapshots();
  const int n = path.clouds.front().dim();
  MomentTable table;
  table.times = Vec::Zero(K);
  table.means = Mat::Zero(K, n);
  table.covs.assign(size_t(K), Mat::Zero(n, n));
  for (int k = 0; k < K; ++k) {
    const auto& mu = path.clouds[size_t(k)];
    table.times[k] = path.time_of(k);
    const Vec m = measure::mean(mu);
    table.means.row(k) = m;
    // normalized second moment about the mean
    const double mass = measure::mass(mu);
    const int N = mu.size();
    Mat acc = Mat::Zero(n, n);
    for (int i = 0; i < N; ++i) {
      const Vec d = mu.atoms.row(i).transpose() - m;
      acc.noalias() += mu.weights[i] * d * d.transpose();
    }
    table.covs[size_t(k)] = acc / (double(N) * mass);
  }
  return table;
}

MomentTable moments_from_kalman(const oracle::KalmanResult& kr) {
  MomentTable table;
  const int K = int(kr.means.rows());
  table.times = Vec::Zero(K);
  for (int k = 0; k < K; ++k) table.times[k] = kr.grid.time(k);
  table.means = kr.means;
  table.covs = kr.covs;
  return table;
}

void write_cloud_csv(const std::string& file, const measure::WeightedCloud& mu) {
  auto out = open_out(file);
  const int n = mu.dim();
  for (int j = 0; j < n; ++j) out << "x" << j << ",";
  out << "weight\n";
  for (int i = 0; i < mu.size(); ++i) {
    for (int j = 0; j < n; ++j) out << fmt_double(mu.atoms(i, j)) << ",";
    out << fmt_double(mu.weights[i]) << "\n";
  }
}

void write_trajectory_csv(const std::string& file,
                          const sde::TruthTrajectory& truth) {
  auto out = open_out(file);
  const int n = int(truth.x.cols());
  const int m = int(truth.y.cols());
  out << "t";
  for (int j = 0; j < n; ++j) out << ",x" << j;
  for (int l = 0; l < m; ++l) out << ",y" << l;
  out << "\n";
  for (int k = 0; k < int(truth.x.rows()); ++k) {
    out << fmt_double(truth.grid.time(k));
    for (int j = 0; j < n; ++j) out << "," << fmt_double(truth.x(k, j));
    for (int l = 0; l < m; ++l) out << "," << fmt_double(truth.y(k, l));
    out << "\n";
  }
}

void write_moments_csv(const std::string& file, const MomentTable& table) {
  auto out = open_out(file);
  const int n = int(table.means.cols());
  out << "t";
  for (int j = 0; j < n; ++j) out << ",mean" << j;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out << ",cov" << a << b;
  out << "\n";
  for (int k = 0; k < int(table.times.size()); ++k) {
    out << fmt_double(table.times[k]);
    for (int j = 0; j < n; ++j) out << "," << fmt_double(table.means(k, j));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        out << "," << fmt_double(table.covs[size_t(k)](a, b));
    out << "\n";
  }
}

void write_diag_csv(const std::string& file, const zakai::ZakaiPath& path) {
  auto out = open_out(file);
  out << "t,mass,ess\n";
  for (int k = 0; k < path.snapshots(); ++k) {
    const auto& mu = path.clouds[size_t(k)];
    out << fmt_double(path.time_of(k)) << ","
        << fmt_double(measure::mass(mu)) << ","
        << fmt_double(measure::effective_sample_size(mu)) << "\n";
  }
}

void write_reports_jsonl(const std::string& file,
                         const std::vector<verify::ResidualReport>& reports) {
  auto out = open_out(file);
  for (const auto& r : reports) {
    nlohmann::json j;
    j["kind"] = r.kind;
    j["label"] = r.label;
    j["s"] = r.s;
    j["t"] = r.t;
    j["runs"] = r.runs;
    j["particles"] = r.particles;
    j["dt"] = r.dt;
    j["residual"] = r.residual;
    j["std_error"] = r.std_error;
    j["allowance"] = r.allowance;
    if (std::isfinite(r.gram_min_eig))
      j["gram_min_eig"] = r.gram_min_eig;
    else
      j["gram_min_eig"] = nullptr;
    j["pass"] = r.pass;
    out << j.dump() << "\n";
  }
}

void write_summary_csv(const std::string& file, const std::string& suite,
                       const std::vector<verify::ResidualReport>& reports) {
  auto out = open_out(file);
  out << "suite,kind,label,s,t,runs,particles,dt,residual,stderr,allowance,"
         "gram_min_eig,verdict\n";
  for (const auto& r : reports) {
    out << csv_safe(suite) << "," << csv_safe(r.kind) << ","
        << csv_safe(r.label) << "," << fmt_double(r.s) << ","
        << fmt_double(r.t) << "," << r.runs << "," << r.particles << ","
        << fmt_double(r.dt) << "," << fmt_double(r.residual) << ","
        << fmt_double(r.std_error) << "," << fmt_double(r.allowance) << ","
        << (std::isfinite(r.gram_min_eig) ? fmt_double(r.gram_min_eig) : "")
        << "," << (r.pass ? "pass" : "fail") << "\n";
  }
}

void write_manifest(const std::string& file, const scenario::Scenario& sc,
                    const std::string& command) {
  nlohmann::json j;
  j["command"] = command;
  j["config_digest"] = sc.digest;
  j["grid"] = {{"horizon", sc.grid.horizon}, {"steps", sc.grid.steps}};
  j["label"] = sc.label;
  j["particles"] = sc.particles;
  j["ensemble_runs"] = sc.ensemble_runs;
  j["schema"] = sc.schema;
  j["seed"] = sc.seed;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["variant"] = sc.variant;
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

std::string artifact_path(const scenario::Scenario& sc,
                          const std::string& name) {
  return sc.out + "/" + sc.label + "-" + sc.digest + "-s" +
         std::to_string(sc.seed) + "-" + name;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("report: cannot create directory '" + dir +
                      "': " + ec.message());
}

}  // namespace zakailab::report
