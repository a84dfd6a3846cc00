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
#ifndef ZAKAILAB_REPORT_HPP_
#define ZAKAILAB_REPORT_HPP_

#include <string>
#include <vector>

#include "zakailab/oracle.hpp"
#include "zakailab/scenario.hpp"
#include "zakailab/sde.hpp"
#include "zakailab/verify.hpp"
#include "zakailab/zakai.hpp"

// Artifact writers.  All numbers go through fmt_double, all rows end in a
// bare newline, and key order is fixed, so a rerun of the same scenario
// yields byte-identical files.
namespace zakailab::report {

inline constexpr const char* kToolName = "zakailab";
inline constexpr const char* kToolVersion = "0.1.0";

// First/second normalized moments along a filter path; the same table shape
// is produced from the closed-form filter so the two CSVs diff directly.
struct MomentTable {
  Vec times;
  Mat means;              // K x n
  std::vector<Mat> covs;  // K entries, n x n
};
MomentTable moments_from_path(const zakai::ZakaiPath& path);
MomentTable moments_from_kalman(const oracle::KalmanResult& kr);

// cloud: x0,...,x{n-1},weight
void write_cloud_csv(const std::string& file, const measure::WeightedCloud& mu);
// trajectory: t,x0,...,y0,...
void write_trajectory_csv(const std::string& file,
                          const sde::TruthTrajectory& truth);
// moments: t,mean0,...,cov00,cov01,...
void write_moments_csv(const std::string& file, const MomentTable& table);
// solver weight diagnostics: t,mass,ess
void write_diag_csv(const std::string& file, const zakai::ZakaiPath& path);

// one JSON object per line
void write_reports_jsonl(const std::string& file,
                         const std::vector<verify::ResidualReport>& reports);
// summary: suite,kind,label,s,t,runs,particles,dt,residual,stderr,allowance,
//          gram_min_eig,verdict
void write_summary_csv(const std::string& file, const std::string& suite,
                       const std::vector<verify::ResidualReport>& reports);

void write_manifest(const std::string& file, const scenario::Scenario& sc,
                    const std::string& command);

// "<out>/<label>-<digest>-s<seed>-<name>"
std::string artifact_path(const scenario::Scenario& sc, const std::string& name);

void ensure_directory(const std::string& dir);

}  // namespace zakailab::report

#endif  // ZAKAILAB_REPORT_HPP_
