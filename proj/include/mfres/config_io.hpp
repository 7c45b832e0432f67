/*
   Copyright 2026 The mfres Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// JSON experiment configuration. Every field has a default, so a config file
// only lists what it changes. Unknown keys are rejected.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mfres/fpk.hpp"
#include "mfres/law.hpp"
#include "mfres/measures.hpp"
#include "mfres/model.hpp"
#include "mfres/rng.hpp"
#include "mfres/trainer.hpp"

namespace mfres {

struct SamplingSpec {
  std::vector<std::size_t> n_list{50, 200, 800, 3200};
  std::size_t n = 64;              // single-N experiments
  std::size_t seeds = 10;          // repetitions per N (diagnose-fpk)
  std::size_t draws = 10;          // independent sample pools (gamma)
  std::size_t jd_paths = 100000;   // Monte Carlo paths for J^d
  std::size_t reference_paths = 20000;  // limit cloud for W2
};

struct TestFunctionSpec {
  double r_in = 10.0;
  double r_out = 12.0;
  std::vector<Monomial> terms;  // empty: x_1^2 + x_1 z_1 (or x_1^2 when q = 0)
};

struct ExperimentConfig {
  std::string kind = "simulate";
  std::uint64_t seed = 0;
  ModelParams model;
  SampleLaw law;
  std::size_t n_steps = 32;
  std::size_t intervals = 32;
  std::vector<double> theta;  // constant control; empty means zero
  SamplingSpec sampling;
  TrainConfig train;
  FixedPointConfig fixed_point;
  TestFunctionSpec test_function;
  bool no_noise_control = true;
  std::size_t gradcheck_configs = 24;
  double gradcheck_h = 1e-5;
  // Run options; excluded from the config hash.
  std::string out = "out";
  int threads = 1;
  bool dump_trajectories = false;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::ConfigInvalid, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    require(allowed.count(key) > 0, ErrorKind::ConfigInvalid, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

inline constexpr EnumName<ActivationKind> kActivationNames[] = {
    {ActivationKind::Tanh, "tanh"},   {ActivationKind::Sigmoid, "sigmoid"},
    {ActivationKind::Gaussian, "gaussian"}, {ActivationKind::Zero, "zero"},
    {ActivationKind::ConstantDrift, "constant"}, {ActivationKind::AffineTest, "affine"}};
inline constexpr EnumName<Wiring> kWiringNames[] = {{Wiring::Diagonal, "diagonal"}, {Wiring::Dense, "dense"}};
inline constexpr EnumName<BatchFunction> kRhoNames[] = {
    {BatchFunction::TanhMean, "tanh_mean"}, {BatchFunction::Mean, "mean"}, {BatchFunction::Zero, "zero"}};
inline constexpr EnumName<ExogenousDrift> kPhiNames[] = {
    {ExogenousDrift::NegGammaZ, "neg_gamma_z"}, {ExogenousDrift::Zero, "zero"}};
inline constexpr EnumName<SeedPolicy> kSeedPolicyNames[] = {
    {SeedPolicy::Fixed, "fixed"}, {SeedPolicy::Refreshed, "refreshed"}};

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& s, const EnumName<Enum> (&table)[N], const char* what) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  throw Error(ErrorKind::ConfigInvalid, std::string("unknown ") + what + " '" + s + "'");
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum v, const EnumName<Enum> (&table)[N]) {
  for (const auto& e : table) {
    if (v == e.value) return e.name;
  }
  return "?";
}

template <typename Enum, std::size_t N>
void read_enum(const json& j, const char* key, Enum& out, const EnumName<Enum> (&table)[N]) {
  std::string s;
  read(j, key, s);
  if (!s.empty()) out = parse_enum(s, table, key);
}

inline Matrix read_matrix(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  Matrix m(rows, cols);
  require(j.is_array() && j.size() == rows, ErrorKind::ConfigInvalid,
          std::string(what) + " must have " + std::to_string(rows) + " rows");
  for (std::size_t r = 0; r < rows; ++r) {
    require(j[r].is_array() && j[r].size() == cols, ErrorKind::ConfigInvalid,
            std::string(what) + " rows must have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

/// Default type: epsilon = 0.2 on the diagonal, gamma = 1, sigma = 0.
inline TypeVector default_type(const Dims& dm) {
  TypeVector t;
  t.epsilon = Matrix(dm.d, dm.p);
  for (std::size_t r = 0; r < std::min(dm.d, dm.p); ++r) t.epsilon(r, r) = 0.2;
  t.gamma.assign(dm.l, 1.0);
  t.sigma = Matrix(dm.q, dm.p);
  return t;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  using nlohmann::json;
  detail::reject_unknown(j, {"experiment", "seed", "model", "law", "grid", "theta", "sampling", "train",
                             "fixed_point", "test_function", "diagnose", "gradcheck"},
                         "config");
  ExperimentConfig c;
  read(j, "experiment", c.kind);
  read(j, "seed", c.seed);

  ModelParams& p = c.model;
  if (j.contains("model")) {
    const json& m = j["model"];
    detail::reject_unknown(m, {"dims", "activation", "rho", "phi", "alpha", "beta", "lambda1", "lambda2",
                               "T", "K", "K_theta"},
                           "model");
    if (m.contains("dims")) {
      const json& d = m["dims"];
      detail::reject_unknown(d, {"d", "q", "p", "m", "l"}, "model.dims");
      read(d, "d", p.dims.d);
      read(d, "q", p.dims.q);
      read(d, "p", p.dims.p);
      p.dims.l = p.dims.q;
      read(d, "l", p.dims.l);
      p.dims.m = control_dim_for(Wiring::Diagonal, p.dims.d);
      read(d, "m", p.dims.m);
    }
    if (m.contains("activation")) {
      const json& a = m["activation"];
      detail::reject_unknown(a, {"kind", "wiring", "w_z", "w_eta", "constant"}, "model.activation");
      detail::read_enum(a, "kind", p.activation.kind, detail::kActivationNames);
      detail::read_enum(a, "wiring", p.activation.wiring, detail::kWiringNames);
      read(a, "w_z", p.activation.w_z);
      read(a, "w_eta", p.activation.w_eta);
      read(a, "constant", p.activation.constant);
      if (!(m.contains("dims") && m["dims"].contains("m"))) {
        p.dims.m = control_dim_for(p.activation.wiring, p.dims.d);
      }
    }
    detail::read_enum(m, "rho", p.rho, detail::kRhoNames);
    detail::read_enum(m, "phi", p.phi, detail::kPhiNames);
    read(m, "alpha", p.alpha);
    read(m, "beta", p.beta);
    read(m, "lambda1", p.lambda1);
    read(m, "lambda2", p.lambda2);
    read(m, "T", p.T);
    read(m, "K", p.K);
    read(m, "K_theta", p.K_theta);
  }

  SampleLaw& law = c.law;
  law.type = detail::default_type(p.dims);
  if (j.contains("law")) {
    const json& l = j["law"];
    detail::reject_unknown(l, {"x_range", "z_range", "label", "type", "type_jitter"}, "law");
    std::vector<double> range;
    read(l, "x_range", range);
    if (!range.empty()) {
      require(range.size() == 2 && range[0] <= range[1], ErrorKind::ConfigInvalid, "x_range is [lo, hi]");
      law.x_lo = range[0];
      law.x_hi = range[1];
    }
    range.clear();
    read(l, "z_range", range);
    if (!range.empty()) {
      require(range.size() == 2 && range[0] <= range[1], ErrorKind::ConfigInvalid, "z_range is [lo, hi]");
      law.z_lo = range[0];
      law.z_hi = range[1];
    }
    if (l.contains("label")) {
      const json& y = l["label"];
      detail::reject_unknown(y, {"scale", "shift", "noise"}, "law.label");
      read(y, "scale", law.label_scale);
      read(y, "shift", law.label_shift);
      read(y, "noise", law.label_noise);
    }
    if (l.contains("type")) {
      const json& t = l["type"];
      detail::reject_unknown(t, {"epsilon", "gamma", "sigma"}, "law.type");
      if (t.contains("epsilon")) law.type.epsilon = detail::read_matrix(t["epsilon"], p.dims.d, p.dims.p, "epsilon");
      if (t.contains("sigma")) law.type.sigma = detail::read_matrix(t["sigma"], p.dims.q, p.dims.p, "sigma");
      read(t, "gamma", law.type.gamma);
    }
    read(l, "type_jitter", law.type_jitter);
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    detail::reject_unknown(g, {"intervals", "n_steps"}, "grid");
    read(g, "intervals", c.intervals);
    read(g, "n_steps", c.n_steps);
  }
  read(j, "theta", c.theta);

  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    detail::reject_unknown(s, {"n_list", "n", "seeds", "draws", "jd_paths", "reference_paths"}, "sampling");
    read(s, "n_list", c.sampling.n_list);
    read(s, "n", c.sampling.n);
    read(s, "seeds", c.sampling.seeds);
    read(s, "draws", c.sampling.draws);
    read(s, "jd_paths", c.sampling.jd_paths);
    read(s, "reference_paths", c.sampling.reference_paths);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    detail::reject_unknown(t, {"max_iters", "step_size", "backtrack", "armijo_c", "min_step", "grad_tol",
                               "replications", "fd_epsilon"},
                           "train");
    read(t, "max_iters", c.train.max_iters);
    read(t, "step_size", c.train.step_size);
    read(t, "backtrack", c.train.backtrack);
    read(t, "armijo_c", c.train.armijo_c);
    read(t, "min_step", c.train.min_step);
    read(t, "grad_tol", c.train.grad_tol);
    read(t, "replications", c.train.sim.replications);
    read(t, "fd_epsilon", c.train.fd_epsilon);
  }
  if (j.contains("fixed_point")) {
    const json& f = j["fixed_point"];
    detail::reject_unknown(f, {"damping", "mc_paths", "outer_iters", "outer_tol", "seed_policy"}, "fixed_point");
    read(f, "damping", c.fixed_point.damping);
    read(f, "mc_paths", c.fixed_point.mc_paths);
    read(f, "outer_iters", c.fixed_point.outer_iters);
    read(f, "outer_tol", c.fixed_point.outer_tol);
    detail::read_enum(f, "seed_policy", c.fixed_point.seed_policy, detail::kSeedPolicyNames);
  }
  if (j.contains("test_function")) {
    const json& t = j["test_function"];
    detail::reject_unknown(t, {"r_in", "r_out", "terms"}, "test_function");
    read(t, "r_in", c.test_function.r_in);
    read(t, "r_out", c.test_function.r_out);
    if (t.contains("terms")) {
      for (const json& term : t["terms"]) {
        detail::reject_unknown(term, {"coef", "s", "x", "z"}, "test_function.terms");
        Monomial mono;
        read(term, "coef", mono.coef);
        read(term, "s", mono.ps);
        read(term, "x", mono.px);
        read(term, "z", mono.pz);
        c.test_function.terms.push_back(mono);
      }
    }
  }
  if (j.contains("diagnose")) {
    const json& d = j["diagnose"];
    detail::reject_unknown(d, {"no_noise_control"}, "diagnose");
    read(d, "no_noise_control", c.no_noise_control);
  }
  if (j.contains("gradcheck")) {
    const json& g = j["gradcheck"];
    detail::reject_unknown(g, {"configs", "h"}, "gradcheck");
    read(g, "configs", c.gradcheck_configs);
    read(g, "h", c.gradcheck_h);
  }
  return c;
}

/// Canonical JSON of everything that determines the results.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  const ModelParams& p = c.model;
  json j;
  j["experiment"] = c.kind;
  j["seed"] = c.seed;
  j["model"] = {
      {"dims", {{"d", p.dims.d}, {"q", p.dims.q}, {"p", p.dims.p}, {"m", p.dims.m}, {"l", p.dims.l}}},
      {"activation",
       {{"kind", detail::enum_name(p.activation.kind, detail::kActivationNames)},
        {"wiring", detail::enum_name(p.activation.wiring, detail::kWiringNames)},
        {"w_z", p.activation.w_z},
        {"w_eta", p.activation.w_eta},
        {"constant", p.activation.constant}}},
      {"rho", detail::enum_name(p.rho, detail::kRhoNames)},
      {"phi", detail::enum_name(p.phi, detail::kPhiNames)},
      {"alpha", p.alpha}, {"beta", p.beta}, {"lambda1", p.lambda1}, {"lambda2", p.lambda2},
      {"T", p.T}, {"K", p.K}, {"K_theta", p.K_theta}};
  j["law"] = {{"x_range", {c.law.x_lo, c.law.x_hi}},
              {"z_range", {c.law.z_lo, c.law.z_hi}},
              {"label", {{"scale", c.law.label_scale}, {"shift", c.law.label_shift}, {"noise", c.law.label_noise}}},
              {"type",
               {{"epsilon", detail::matrix_json(c.law.type.epsilon)},
                {"gamma", c.law.type.gamma},
                {"sigma", detail::matrix_json(c.law.type.sigma)}}},
              {"type_jitter", c.law.type_jitter}};
  j["grid"] = {{"intervals", c.intervals}, {"n_steps", c.n_steps}};
  j["theta"] = c.theta;
  j["sampling"] = {{"n_list", c.sampling.n_list}, {"n", c.sampling.n}, {"seeds", c.sampling.seeds},
                   {"draws", c.sampling.draws}, {"jd_paths", c.sampling.jd_paths},
                   {"reference_paths", c.sampling.reference_paths}};
  j["train"] = {{"max_iters", c.train.max_iters}, {"step_size", c.train.step_size},
                {"backtrack", c.train.backtrack}, {"armijo_c", c.train.armijo_c},
                {"min_step", c.train.min_step}, {"grad_tol", c.train.grad_tol},
                {"replications", c.train.sim.replications}, {"fd_epsilon", c.train.fd_epsilon}};
  j["fixed_point"] = {{"damping", c.fixed_point.damping}, {"mc_paths", c.fixed_point.mc_paths},
                      {"outer_iters", c.fixed_point.outer_iters}, {"outer_tol", c.fixed_point.outer_tol},
                      {"seed_policy", detail::enum_name(c.fixed_point.seed_policy, detail::kSeedPolicyNames)}};
  json terms = json::array();
  for (const auto& t : c.test_function.terms) {
    terms.push_back({{"coef", t.coef}, {"s", t.ps}, {"x", t.px}, {"z", t.pz}});
  }
  j["test_function"] = {{"r_in", c.test_function.r_in}, {"r_out", c.test_function.r_out}, {"terms", terms}};
  j["diagnose"] = {{"no_noise_control", c.no_noise_control}};
  j["gradcheck"] = {{"configs", c.gradcheck_configs}, {"h", c.gradcheck_h}};
  return j;
}

/// FNV-1a of the canonical JSON, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a64(text)));
  return buf;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::ConfigInvalid, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, "cannot parse '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// Settings derived from the config: validated parameters, the control and
/// the test function with defaults filled in.
inline ControlGrid config_theta(const ExperimentConfig& c) {
  const std::size_t m = c.model.dims.m;
  std::vector<double> v = c.theta.empty() ? std::vector<double>(m, 0.0) : c.theta;
  require(v.size() == m, ErrorKind::DimensionMismatch,
          "theta has " + std::to_string(v.size()) + " entries, expected m=" + std::to_string(m));
  return ControlGrid::constant(c.model.T, c.intervals, v, c.model.K_theta);
}

inline TestFunction config_test_function(const ExperimentConfig& c) {
  const Dims& dm = c.model.dims;
  std::vector<Monomial> terms = c.test_function.terms;
  if (terms.empty()) {
    Monomial sq{1.0, 0, std::vector<int>(dm.d, 0), std::vector<int>(dm.q, 0)};
    sq.px[0] = 2;
    terms.push_back(sq);
    if (dm.q > 0) {
      Monomial cross{1.0, 0, std::vector<int>(dm.d, 0), std::vector<int>(dm.q, 0)};
      cross.px[0] = 1;
      cross.pz[0] = 1;
      terms.push_back(cross);
    }
  }
  return TestFunction(dm.d, dm.q, terms, c.test_function.r_in, c.test_function.r_out);
}

inline void validate_experiment(const ExperimentConfig& c) {
  if (c.kind == "gamma" || c.kind == "diagnose-fpk") {
    const auto& n = c.sampling.n_list;
    require(!n.empty() && n[0] >= 1, ErrorKind::ConfigInvalid, "n_list must be non-empty and positive");
    for (std::size_t i = 1; i < n.size(); ++i) {
      require(n[i] > n[i - 1], ErrorKind::ConfigInvalid, "n_list must be strictly increasing");
    }
  }
  require(c.threads >= 1, ErrorKind::ConfigInvalid, "threads must be >= 1");
  require(c.intervals >= 2 && c.n_steps >= 1, ErrorKind::GridTooSmall,
          "need at least 2 control intervals and 1 simulation step");
}

}  // namespace mfres
