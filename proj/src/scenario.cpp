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
#include "zakailab/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace zakailab::scenario {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

// A node plus its dotted path, so every error is self-locating.
struct Ctx {
  const json& node;
  std::string path;

  Ctx key(const char* k) const { return {node.at(k), path + "." + k}; }
  Ctx index(size_t i) const {
    return {node.at(i), path + "[" + std::to_string(i) + "]"};
  }
  bool has(const char* k) const {
    return node.is_object() && node.contains(k);
  }
};

Ctx need(const Ctx& c, const char* k) {
  if (!c.node.is_object()) fail(c.path, "expected an object");
  if (!c.node.contains(k)) fail(c.path + "." + std::string(k), "missing");
  return c.key(k);
}

void check_keys(const Ctx& c, const std::set<std::string>& allowed) {
  if (!c.node.is_object()) fail(c.path, "expected an object");
  for (auto it = c.node.begin(); it != c.node.end(); ++it)
    if (!allowed.count(it.key()))
      fail(c.path + "." + it.key(), "unknown field");
}

double get_num(const Ctx& c) {
  if (!c.node.is_number()) fail(c.path, "expected a number");
  return c.node.get<double>();
}

int get_int(const Ctx& c) {
  if (!c.node.is_number_integer()) fail(c.path, "expected an integer");
  return c.node.get<int>();
}

std::uint64_t get_u64(const Ctx& c) {
  if (!c.node.is_number_unsigned() && !c.node.is_number_integer())
    fail(c.path, "expected a non-negative integer");
  const auto v = c.node.get<std::int64_t>();
  if (v < 0) fail(c.path, "expected a non-negative integer");
  return std::uint64_t(v);
}

std::string get_str(const Ctx& c) {
  if (!c.node.is_string()) fail(c.path, "expected a string");
  return c.node.get<std::string>();
}

Vec get_vec(const Ctx& c) {
  if (!c.node.is_array()) fail(c.path, "expected an array of numbers");
  Vec out(int(c.node.size()));
  for (size_t i = 0; i < c.node.size(); ++i) {
    const auto e = c.index(i);
    out[int(i)] = get_num(e);
  }
  return out;
}

Mat get_mat(const Ctx& c) {
  if (!c.node.is_array() || c.node.empty())
    fail(c.path, "expected a non-empty array of rows");
  const size_t cols = c.node.at(0).is_array() ? c.node.at(0).size() : 0;
  if (cols == 0) fail(c.path, "expected rows to be non-empty arrays");
  Mat out(int(c.node.size()), int(cols));
  for (size_t i = 0; i < c.node.size(); ++i) {
    const auto row = c.index(i);
    if (!row.node.is_array() || row.node.size() != cols)
      fail(row.path, "expected a row of " + std::to_string(cols) + " numbers");
    for (size_t j = 0; j < cols; ++j) out(int(i), int(j)) = get_num(row.index(j));
  }
  return out;
}

// What the linear-Gaussian probe needs to know about a coefficient.
struct VFieldInfo {
  std::string kind;
  Mat A;
  Vec c;
};
struct MFieldInfo {
  std::string kind;
  Mat M0;
};

template <typename Build>
auto with_path(const Ctx& c, Build&& build) {
  try {
    return build();
  } catch (const ConfigError& e) {
    throw ConfigError(c.path + ": " + e.what());
  }
}

model::VectorField parse_vfield(const Ctx& c, int p, int n, VFieldInfo* info) {
  const std::string kind = get_str(need(c, "kind"));
  if (info) info->kind = kind;
  if (kind == "zero") {
    check_keys(c, {"kind"});
    if (info) {
      info->A = Mat::Zero(p, n);
      info->c = Vec::Zero(p);
    }
    return with_path(c, [&] { return model::VectorField::zero(p, n); });
  }
  if (kind == "constant") {
    check_keys(c, {"kind", "value"});
    const Vec v = get_vec(need(c, "value"));
    if (info) {
      info->A = Mat::Zero(p, n);
      info->c = v;
    }
    return with_path(c, [&] { return model::VectorField::constant(v, n); });
  }
  if (kind == "affine") {
    check_keys(c, {"kind", "A", "c"});
    const Mat A = get_mat(need(c, "A"));
    const Vec cc = get_vec(need(c, "c"));
    if (info) {
      info->A = A;
      info->c = cc;
    }
    return with_path(c, [&] { return model::VectorField::affine(A, cc); });
  }
  if (kind == "affine_tanh") {
    check_keys(c, {"kind", "A", "c", "P"});
    const Mat A = get_mat(need(c, "A"));
    const Vec cc = get_vec(need(c, "c"));
    const Mat P = get_mat(need(c, "P"));
    return with_path(c, [&] { return model::VectorField::affine_tanh(A, cc, P); });
  }
  if (kind == "quadratic_diag") {
    check_keys(c, {"kind", "A", "c", "q"});
    const Mat A = get_mat(need(c, "A"));
    const Vec cc = get_vec(need(c, "c"));
    const Vec q = get_vec(need(c, "q"));
    return with_path(c, [&] { return model::VectorField::quadratic_diag(A, cc, q); });
  }
  fail(c.path + ".kind", "unknown vector-field kind '" + kind + "'");
}

model::MatrixField parse_mfield(const Ctx& c, int p, int q, int n,
                                MFieldInfo* info) {
  const std::string kind = get_str(need(c, "kind"));
  if (info) info->kind = kind;
  if (kind == "zero") {
    check_keys(c, {"kind"});
    if (info) info->M0 = Mat::Zero(p, q);
    return with_path(c, [&] { return model::MatrixField::zero(p, q, n); });
  }
  if (kind == "constant") {
    check_keys(c, {"kind", "value"});
    const Mat M = get_mat(need(c, "value"));
    if (info) info->M0 = M;
    return with_path(c, [&] { return model::MatrixField::constant(M, n); });
  }
  if (kind == "tanh_scaled") {
    check_keys(c, {"kind", "M0", "M1", "v"});
    const Mat M0 = get_mat(need(c, "M0"));
    const Mat M1 = get_mat(need(c, "M1"));
    const Vec v = get_vec(need(c, "v"));
    return with_path(c, [&] { return model::MatrixField::tanh_scaled(M0, M1, v); });
  }
  fail(c.path + ".kind", "unknown matrix-field kind '" + kind + "'");
}

model::TimeMatrix parse_tmat(const Ctx& c, MFieldInfo* info) {
  const std::string kind = get_str(need(c, "kind"));
  if (info) info->kind = kind;
  if (kind == "constant") {
    check_keys(c, {"kind", "value"});
    const Mat M = get_mat(need(c, "value"));
    if (info) info->M0 = M;
    return with_path(c, [&] { return model::TimeMatrix::constant(M); });
  }
  if (kind == "table") {
    check_keys(c, {"kind", "times", "values"});
    const Vec times = get_vec(need(c, "times"));
    const auto values = need(c, "values");
    if (!values.node.is_array() || values.node.size() != size_t(times.size()))
      fail(values.path, "expected one matrix per time");
    std::vector<double> tv(static_cast<size_t>(times.size()));
    std::vector<Mat> mv;
    for (int i = 0; i < times.size(); ++i) {
      tv[size_t(i)] = times[i];
      mv.push_back(get_mat(values.index(size_t(i))));
    }
    return with_path(c, [&] { return model::TimeMatrix::table(tv, mv); });
  }
  fail(c.path + ".kind", "unknown time-matrix kind '" + kind + "'");
}

zakai::InitialLaw parse_initial(const Ctx& c, bool* gaussian_like, Vec* mean0,
                                Mat* cov0) {
  const std::string kind = get_str(need(c, "kind"));
  *gaussian_like = false;
  if (kind == "dirac") {
    check_keys(c, {"kind", "point"});
    const Vec p = get_vec(need(c, "point"));
    *gaussian_like = true;
    *mean0 = p;
    *cov0 = Mat::Zero(p.size(), p.size());
    return with_path(c, [&] { return zakai::InitialLaw::dirac(p); });
  }
  if (kind == "gaussian") {
    check_keys(c, {"kind", "mean", "cov"});
    const Vec m = get_vec(need(c, "mean"));
    const Mat cv = get_mat(need(c, "cov"));
    *gaussian_like = true;
    *mean0 = m;
    *cov0 = cv;
    return with_path(c, [&] { return zakai::InitialLaw::gaussian(m, cv); });
  }
  if (kind == "uniform_box") {
    check_keys(c, {"kind", "center", "halfwidth"});
    const Vec ce = get_vec(need(c, "center"));
    const Vec hw = get_vec(need(c, "halfwidth"));
    return with_path(c, [&] { return zakai::InitialLaw::uniform_box(ce, hw); });
  }
  fail(c.path + ".kind", "unknown initial-law kind '" + kind + "'");
}

calculus::OuterFunction parse_outer(const Ctx& c, int arity_hint,
                                    std::vector<int>* coords) {
  const std::string form = get_str(need(c, "form"));
  if (coords) {
    coords->clear();
    if (c.has("coords")) {
      const auto cs = need(c, "coords");
      if (!cs.node.is_array()) fail(cs.path, "expected an array of indices");
      for (size_t i = 0; i < cs.node.size(); ++i)
        coords->push_back(get_int(cs.index(i)));
    }
  }
  if (form == "linear") {
    if (coords) {
      check_keys(c, {"form", "coords"});
      if (coords->size() != 1) fail(c.path + ".coords", "expected one index");
      return calculus::OuterFunction::linear(1, 0);
    }
    check_keys(c, {"form", "u"});
    const int u = get_int(need(c, "u"));
    return with_path(c, [&] { return calculus::OuterFunction::linear(arity_hint, u); });
  }
  if (form == "bilinear") {
    if (coords) {
      check_keys(c, {"form", "coords"});
      if (coords->size() == 1)
        return calculus::OuterFunction::bilinear(1, 0, 0);
      if (coords->size() == 2)
        return calculus::OuterFunction::bilinear(2, 0, 1);
      fail(c.path + ".coords", "expected one or two indices");
    }
    check_keys(c, {"form", "u", "v"});
    const int u = get_int(need(c, "u"));
    const int v = get_int(need(c, "v"));
    return with_path(c,
                     [&] { return calculus::OuterFunction::bilinear(arity_hint, u, v); });
  }
  if (form == "tanh") {
    if (coords) {
      check_keys(c, {"form", "coords", "weights", "offset"});
      const Vec w = get_vec(need(c, "weights"));
      if (size_t(w.size()) != coords->size())
        fail(c.path + ".weights", "expected one weight per coordinate");
      const double off = get_num(need(c, "offset"));
      return with_path(c, [&] { return calculus::OuterFunction::tanh_affine(w, off); });
    }
    check_keys(c, {"form", "weights", "offset"});
    const Vec w = get_vec(need(c, "weights"));
    if (int(w.size()) != arity_hint)
      fail(c.path + ".weights",
           "expected " + std::to_string(arity_hint) + " weights");
    const double off = get_num(need(c, "offset"));
    return with_path(c, [&] { return calculus::OuterFunction::tanh_affine(w, off); });
  }
  fail(c.path + ".form", "unknown functional form '" + form + "'");
}

std::string coord_label(const calculus::Dictionary& dict,
                        const std::vector<int>& coords,
                        const std::string& form) {
  if (form == "linear") return "lin " + dict[coords[0]].label();
  if (form == "bilinear") {
    const int a = coords[0];
    const int b = coords.size() > 1 ? coords[1] : coords[0];
    return "quad " + dict[a].label() + "*" + dict[b].label();
  }
  std::string out = "tanh(";
  for (size_t i = 0; i < coords.size(); ++i) {
    if (i) out += ",";
    out += dict[coords[i]].label();
  }
  return out + ")";
}

std::vector<verify::BatteryItem> parse_battery(const Ctx& c,
                                               const calculus::Dictionary& dict) {
  if (c.node.is_string()) {
    if (c.node.get<std::string>() != "standard")
      fail(c.path, "expected \"standard\" or an array of functionals");
    return with_path(c, [&] { return verify::standard_battery(dict); });
  }
  if (!c.node.is_array()) fail(c.path, "expected an array of functionals");
  std::vector<verify::BatteryItem> out;
  for (size_t i = 0; i < c.node.size(); ++i) {
    const auto item = c.index(i);
    std::vector<int> coords;
    auto g = parse_outer(item, 0, &coords);
    for (size_t a = 0; a < coords.size(); ++a)
      if (coords[a] < 0 || coords[a] >= dict.size())
        fail(item.path + ".coords[" + std::to_string(a) + "]",
             "outside the dictionary");
    const std::string form = get_str(need(item, "form"));
    out.push_back({g, coords, coord_label(dict, coords, form)});
  }
  if (out.empty()) fail(c.path, "battery must not be empty");
  return out;
}

MartingaleSpec parse_martingale(const Ctx& c, const calculus::Dictionary& dict,
                                const paths::TimeGrid& grid) {
  check_keys(c, {"k", "s", "t", "phis", "chis"});
  MartingaleSpec spec;
  spec.k = get_int(need(c, "k"));
  if (spec.k < 1 || spec.k > dict.size())
    fail(c.path + ".k", "truncation must lie in [1, dictionary size]");
  spec.s = get_num(need(c, "s"));
  spec.t = get_num(need(c, "t"));
  if (!(spec.s >= 0.0 && spec.s < spec.t && spec.t <= grid.horizon + 1e-12))
    fail(c.path, "need 0 <= s < t <= horizon");
  const auto phis = need(c, "phis");
  if (!phis.node.is_array() || phis.node.empty())
    fail(phis.path, "expected a non-empty array");
  for (size_t i = 0; i < phis.node.size(); ++i)
    spec.phis.push_back(
        {spec.k, parse_outer(phis.index(i), spec.k, nullptr)});
  const auto chis = need(c, "chis");
  if (!chis.node.is_array() || chis.node.empty())
    fail(chis.path, "expected a non-empty array");
  for (size_t i = 0; i < chis.node.size(); ++i) {
    const auto cc = chis.index(i);
    check_keys(cc, {"times", "coords"});
    verify::TestMartFunctional chi;
    const Vec times = get_vec(need(cc, "times"));
    const auto coords = need(cc, "coords");
    if (!coords.node.is_array() || coords.node.size() != size_t(times.size()))
      fail(cc.path, "times and coords must have equal length");
    for (int j = 0; j < times.size(); ++j) {
      if (times[j] > spec.s + 1e-12)
        fail(cc.path + ".times[" + std::to_string(j) + "]",
             "conditioning time after s");
      chi.times.push_back(times[j]);
      const int coord = get_int(coords.index(size_t(j)));
      if (coord < 0 || coord >= dict.size())
        fail(cc.path + ".coords[" + std::to_string(j) + "]",
             "outside the dictionary");
      chi.coords.push_back(coord);
    }
    spec.chis.push_back(std::move(chi));
  }
  return spec;
}

bool is_zero(const Vec& v) { return v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

std::string config_digest(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

Scenario parse_scenario(const std::string& text, const Overrides& ov) {
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scenario: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("scenario: expected an object");

  // fold the command-line overrides into the tree before hashing, so the
  // digest names the effective configuration
  if (ov.dt) {
    if (!root.contains("grid") || !root["grid"].is_object() ||
        !root["grid"].contains("horizon") ||
        !root["grid"]["horizon"].is_number())
      throw ConfigError("scenario.grid.horizon: missing (needed by --dt-override)");
    const double T = root["grid"]["horizon"].get<double>();
    if (!(*ov.dt > 0.0)) throw ConfigError("--dt-override: must be positive");
    const auto steps = std::llround(T / *ov.dt);
    if (steps < 1 || std::abs(double(steps) * *ov.dt - T) > 1e-9 * std::max(1.0, T))
      throw ConfigError("--dt-override: must divide the horizon evenly");
    root["grid"]["steps"] = steps;
  }
  if (ov.particles) root["particles"] = *ov.particles;
  if (ov.seed) root["seed"] = *ov.seed;

  // execution placement (worker count, output directory) is not part of the
  // experiment's identity
  json hashed = root;
  hashed.erase("threads");
  hashed.erase("out");

  Ctx top{root, "scenario"};
  check_keys(top, {"schema", "label", "variant", "grid", "system",
                   "initial_law", "particles", "ensemble_runs", "eval_stride",
                   "threads", "truth_paths", "seed", "out", "dictionary",
                   "battery", "fpe_times", "martingale", "tolerances"});

  Scenario sc;
  sc.digest = config_digest(hashed.dump());

  if (top.has("schema")) sc.schema = get_int(top.key("schema"));
  if (sc.schema != 1) fail("scenario.schema", "unsupported schema version");
  if (top.has("label")) sc.label = get_str(top.key("label"));
  sc.variant = get_str(need(top, "variant"));
  if (sc.variant != "cn" && sc.variant != "cs")
    fail("scenario.variant", "expected \"cn\" or \"cs\"");

  {
    const auto g = need(top, "grid");
    check_keys(g, {"horizon", "steps"});
    const double T = get_num(need(g, "horizon"));
    const int J = get_int(need(g, "steps"));
    if (!(T > 0.0)) fail(g.path + ".horizon", "must be positive");
    if (J < 1) fail(g.path + ".steps", "must be >= 1");
    sc.grid = paths::TimeGrid(T, J);
  }

  VFieldInfo b1i, b2i;
  MFieldInfo s0i, s1i, s2i;
  bool s2_time_constant = false;
  {
    const auto s = need(top, "system");
    const int n = get_int(need(s, "n"));
    const int m = get_int(need(s, "m"));
    const int d = get_int(need(s, "d"));
    if (sc.variant == "cn") {
      check_keys(s, {"n", "m", "d", "b1", "sigma0", "sigma1", "b2", "sigma2"});
      sc.cn.n = n;
      sc.cn.m = m;
      sc.cn.d = d;
      sc.cn.b1 = parse_vfield(need(s, "b1"), n, n, &b1i);
      sc.cn.sigma0 = parse_mfield(need(s, "sigma0"), n, d, n, &s0i);
      sc.cn.sigma1 = parse_mfield(need(s, "sigma1"), n, m, n, &s1i);
      sc.cn.b2 = parse_vfield(need(s, "b2"), m, n, &b2i);
      sc.cn.sigma2 = parse_tmat(need(s, "sigma2"), &s2i);
      s2_time_constant = sc.cn.sigma2.is_constant();
      with_path(s, [&] { sc.cn.check_dims(); return 0; });
    } else {
      check_keys(s, {"n", "m", "d", "b1", "sigma1", "b2", "sigma2", "sigma3"});
      sc.cs.n = n;
      sc.cs.m = m;
      sc.cs.d = d;
      sc.cs.b1c = parse_vfield(need(s, "b1"), n, n, &b1i);
      sc.cs.sigma1c = parse_mfield(need(s, "sigma1"), n, m, n, &s1i);
      sc.cs.b2c = parse_vfield(need(s, "b2"), m, n, &b2i);
      sc.cs.sigma2c = get_mat(need(s, "sigma2"));
      sc.cs.sigma3c = get_mat(need(s, "sigma3"));
      with_path(s, [&] { sc.cs.check_dims(); return 0; });
      const Mat mix = sc.cs.sigma2c * sc.cs.sigma2c.transpose() +
                      sc.cs.sigma3c * sc.cs.sigma3c.transpose();
      if (!mix.isIdentity(1e-12))
        fail(s.path,
             "sigma2 sigma2^T + sigma3 sigma3^T must equal the identity");
    }
  }

  bool init_gaussian = false;
  sc.initial =
      parse_initial(need(top, "initial_law"), &init_gaussian, &sc.linear_mean0,
                    &sc.linear_cov0);
  if (sc.initial.dim() != sc.state_dim())
    fail("scenario.initial_law", "dimension does not match the system");

  sc.particles = get_int(need(top, "particles"));
  if (sc.particles < 1) fail("scenario.particles", "must be >= 1");
  if (top.has("ensemble_runs")) {
    sc.ensemble_runs = get_int(top.key("ensemble_runs"));
    if (sc.ensemble_runs < 2) fail("scenario.ensemble_runs", "must be >= 2");
  }
  if (top.has("eval_stride")) {
    sc.eval_stride = get_int(top.key("eval_stride"));
    if (sc.eval_stride < 1) fail("scenario.eval_stride", "must be >= 1");
  }
  if (top.has("threads")) {
    sc.threads = get_int(top.key("threads"));
    if (sc.threads < 1) fail("scenario.threads", "must be >= 1");
  }
  if (top.has("truth_paths")) {
    sc.truth_paths = get_int(top.key("truth_paths"));
    if (sc.truth_paths < 1) fail("scenario.truth_paths", "must be >= 1");
  }
  if (top.has("seed")) sc.seed = get_u64(top.key("seed"));
  if (top.has("out")) sc.out = get_str(top.key("out"));

  if (top.has("dictionary")) {
    const auto dc = top.key("dictionary");
    check_keys(dc, {"radii", "max_size"});
    const Vec radii = get_vec(need(dc, "radii"));
    const int max_size = get_int(need(dc, "max_size"));
    std::vector<double> rs(static_cast<size_t>(radii.size()));
    for (int i = 0; i < radii.size(); ++i) rs[size_t(i)] = radii[i];
    sc.dictionary = with_path(dc, [&] {
      return calculus::Dictionary::standard(sc.state_dim(), rs, max_size);
    });
  }

  if (top.has("battery")) {
    if (sc.dictionary.size() == 0)
      fail("scenario.battery", "requires a dictionary");
    sc.battery = parse_battery(top.key("battery"), sc.dictionary);
  } else if (sc.dictionary.size() >= 3) {
    sc.battery = verify::standard_battery(sc.dictionary);
  }

  if (top.has("fpe_times")) {
    const Vec ts = get_vec(top.key("fpe_times"));
    for (int i = 0; i < ts.size(); ++i) {
      if (!(ts[i] > 0.0 && ts[i] <= sc.grid.horizon + 1e-12))
        fail("scenario.fpe_times[" + std::to_string(i) + "]",
             "outside (0, horizon]");
      sc.fpe_times.push_back(ts[i]);
    }
  } else {
    sc.fpe_times.push_back(sc.grid.horizon);
  }

  if (top.has("martingale")) {
    if (sc.dictionary.size() == 0)
      fail("scenario.martingale", "requires a dictionary");
    sc.martingale = parse_martingale(top.key("martingale"), sc.dictionary,
                                     sc.grid);
  }

  if (top.has("tolerances")) {
    const auto tc = top.key("tolerances");
    check_keys(tc, {"audit_ceiling", "allowance_C", "refinement_factor",
                    "kalman_mean_tol", "kalman_var_rel_tol", "reduction_tol",
                    "lderiv_trials", "lderiv_eps", "lderiv_rel_tol"});
    if (tc.has("audit_ceiling")) sc.tol.audit_ceiling = get_num(tc.key("audit_ceiling"));
    if (tc.has("allowance_C")) sc.tol.allowance_C = get_num(tc.key("allowance_C"));
    if (tc.has("refinement_factor")) {
      sc.tol.refinement_factor = get_int(tc.key("refinement_factor"));
      if (sc.tol.refinement_factor < 2)
        fail(tc.path + ".refinement_factor", "must be >= 2");
    }
    if (tc.has("kalman_mean_tol")) sc.tol.kalman_mean_tol = get_num(tc.key("kalman_mean_tol"));
    if (tc.has("kalman_var_rel_tol")) sc.tol.kalman_var_rel_tol = get_num(tc.key("kalman_var_rel_tol"));
    if (tc.has("reduction_tol")) sc.tol.reduction_tol = get_num(tc.key("reduction_tol"));
    if (tc.has("lderiv_trials")) {
      sc.tol.lderiv_trials = get_int(tc.key("lderiv_trials"));
      if (sc.tol.lderiv_trials < 1) fail(tc.path + ".lderiv_trials", "must be >= 1");
    }
    if (tc.has("lderiv_eps")) sc.tol.lderiv_eps = get_num(tc.key("lderiv_eps"));
    if (tc.has("lderiv_rel_tol")) sc.tol.lderiv_rel_tol = get_num(tc.key("lderiv_rel_tol"));
  }

  // linear-Gaussian probe for the closed-form filter oracle
  if (init_gaussian && (b1i.kind == "affine" || b1i.kind == "zero") &&
      is_zero(b1i.c) && (b2i.kind == "affine" || b2i.kind == "zero") &&
      is_zero(b2i.c) && (s1i.kind == "constant" || s1i.kind == "zero")) {
    if (sc.variant == "cn") {
      if ((s0i.kind == "constant" || s0i.kind == "zero") &&
          s2i.kind == "constant" && s2_time_constant) {
        try {
          sc.linear = oracle::LinearGaussianSpec::from_coefficients(
              b1i.A, b2i.A, s0i.M0, s1i.M0, s2i.M0);
        } catch (const std::exception&) {
          sc.linear.reset();
        }
      }
    } else {
      try {
        sc.linear = oracle::LinearGaussianSpec::from_sensor(
            b1i.A, b2i.A, s1i.M0, sc.cs.sigma2c, sc.cs.sigma3c);
      } catch (const std::exception&) {
        sc.linear.reset();
      }
    }
  }

  if (ov.threads) {
    sc.threads = *ov.threads;
    if (sc.threads < 1) throw ConfigError("--threads: must be >= 1");
  }
  return sc;
}

Scenario load_scenario(const std::string& file, const Overrides& ov) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("scenario: cannot open '" + file + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), ov);
}

}  // namespace zakailab::scenario
