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

// Experiment runners. Each is a pure function of its config: it returns a
// report and, when `out` is non-empty, writes CSV tables plus summary.txt
// there. Every CSV starts with "# config_hash=<hex>" and a column header.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfres/config_io.hpp"
#include "mfres/fpk.hpp"
#include "mfres/measures.hpp"
#include "mfres/objective.hpp"
#include "mfres/sde.hpp"
#include "mfres/stats.hpp"
#include "mfres/trainer.hpp"

namespace mfres {

// ---------------------------------------------------------------------------
// Output

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  CsvTable(std::string hash, std::vector<std::string> columns)
      : hash_(std::move(hash)), columns_(std::move(columns)) {}

  /// Appends one row; cells are pre-formatted strings.
  void row(const std::vector<std::string>& cells) {
    require(cells.size() == columns_.size(), ErrorKind::SizeMismatch, "CSV row width differs from header");
    rows_.push_back(cells);
  }

  std::string str() const {
    std::string s = "# config_hash=" + hash_ + "\n";
    for (std::size_t i = 0; i < columns_.size(); ++i) s += (i ? "," : "") + columns_[i];
    s += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
      s += '\n';
    }
    return s;
  }

 private:
  std::string hash_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes `content` to dir/name through a temporary file and a rename.
inline void write_atomic(const std::string& dir, const std::string& name, const std::string& content) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path target = fs::path(dir) / name;
  const fs::path tmp = fs::path(dir) / (name + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorKind::ConfigInvalid, "cannot write " + tmp.string());
    os << content;
    os.flush();
    require(static_cast<bool>(os), ErrorKind::ConfigInvalid, "write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string to_str(std::size_t v) { return std::to_string(v); }

inline ExecPolicy exec_of(const ExperimentConfig& c) { return ExecPolicy{c.threads}; }

inline TrainConfig train_config_of(const ExperimentConfig& c) {
  TrainConfig t = c.train;
  t.intervals = c.intervals;
  t.sim.n_steps = c.n_steps;
  t.sim.exec = exec_of(c);
  return t;
}

inline FixedPointConfig fixed_point_config_of(const ExperimentConfig& c, std::uint64_t seed) {
  FixedPointConfig f = c.fixed_point;
  f.intervals = c.intervals;
  f.n_steps = c.n_steps;
  f.seed = seed;
  f.exec = exec_of(c);
  return f;
}

/// First `n` samples of a dataset.
inline Dataset dataset_prefix(const Dataset& d, std::size_t n) {
  require(n <= d.size(), ErrorKind::SizeMismatch, "prefix longer than the dataset");
  Dataset p;
  p.samples.assign(d.samples.begin(), d.samples.begin() + static_cast<std::ptrdiff_t>(n));
  p.types.assign(d.types.begin(), d.types.begin() + static_cast<std::ptrdiff_t>(n));
  p.ids.assign(d.ids.begin(), d.ids.begin() + static_cast<std::ptrdiff_t>(n));
  return p;
}

inline std::vector<double> terminal_coordinate(const ParticleEnsemble& ens, std::size_t r = 0) {
  std::vector<double> v(ens.n_particles);
  for (std::size_t i = 0; i < ens.n_particles; ++i) v[i] = ens.x(i, ens.n_steps)[r];
  return v;
}

inline CsvTable theta_table(const std::string& hash, const ControlGrid& theta) {
  std::vector<std::string> cols{"t"};
  for (std::size_t j = 0; j < theta.dim(); ++j) cols.push_back("theta_" + to_str(j + 1));
  CsvTable t(hash, cols);
  for (std::size_t k = 0; k < theta.nodes(); ++k) {
    std::vector<std::string> row{fmt_double(theta.time(k))};
    for (double v : theta.node(k)) row.push_back(fmt_double(v));
    t.row(row);
  }
  return t;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateReport {
  CostBreakdown cost;
  std::vector<double> mean_x;  // first state coordinate, per step
};

inline SimulateReport run_simulate(const ExperimentConfig& c) {
  const ValidatedParams vp = validate_params(c.model);
  const std::string hash = config_hash(c);
  const ControlGrid theta = config_theta(c);
  const Dataset data = make_dataset(vp, c.law, c.sampling.n, derive_seed(c.seed, "simulate-samples"));
  const auto ens = simulate_particles(vp, theta, data.samples, data.types, c.n_steps,
                                      derive_seed(c.seed, "simulate-noise"), exec_of(c), data.ids);
  SimulateReport rep;
  rep.cost = evaluate_JN(ens, theta, vp);

  std::vector<std::string> cols{"step", "t", "eta"};
  for (std::size_t r = 0; r < vp.dims().d; ++r) cols.push_back("mean_x_" + to_str(r + 1));
  CsvTable tab(hash, cols);
  for (std::size_t k = 0; k <= c.n_steps; ++k) {
    std::vector<std::string> row{to_str(k), fmt_double(ens.time(k)), fmt_double(ens.eta[k])};
    for (std::size_t r = 0; r < vp.dims().d; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < ens.n_particles; ++i) s += ens.x(i, k)[r];
      const double m = s / static_cast<double>(ens.n_particles);
      if (r == 0) rep.mean_x.push_back(m);
      row.push_back(fmt_double(m));
    }
    tab.row(row);
  }
  if (!c.out.empty()) {
    write_atomic(c.out, "simulate.csv", tab.str());
    if (c.dump_trajectories) {
      std::ostringstream os;
      os << "# config_hash=" << hash << '\n';
      write_trajectories_csv(os, ens);
      write_atomic(c.out, "trajectories.csv", os.str());
    }
    std::ostringstream s;
    s << "experiment: simulate\nconfig_hash: " << hash << "\nN: " << c.sampling.n
      << "\nn_steps: " << c.n_steps << "\nJ_N: " << fmt_double(rep.cost.total)
      << "\n  terminal: " << fmt_double(rep.cost.terminal)
      << "\n  running_state: " << fmt_double(rep.cost.running_state)
      << "\n  control_l2: " << fmt_double(rep.cost.control_l2)
      << "\n  control_h1: " << fmt_double(rep.cost.control_h1) << '\n';
    write_atomic(c.out, "summary.txt", s.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// train

inline TrainResult run_train(const ExperimentConfig& c) {
  const ValidatedParams vp = validate_params(c.model);
  const std::string hash = config_hash(c);
  const Dataset data = make_dataset(vp, c.law, c.sampling.n, derive_seed(c.seed, "train-samples"));
  const TrainResult res = train(vp, data, train_config_of(c), derive_seed(c.seed, "train-noise"));
  if (!c.out.empty()) {
    CsvTable hist(hash, {"iter", "total", "terminal", "running", "l2", "h1", "grad_norm"});
    for (std::size_t i = 0; i < res.history.size(); ++i) {
      const auto& h = res.history[i];
      hist.row({to_str(i), fmt_double(h.total), fmt_double(h.terminal), fmt_double(h.running_state),
                fmt_double(h.control_l2), fmt_double(h.control_h1),
                fmt_double(i < res.grad_norms.size() ? res.grad_norms[i] : res.grad_norm_final)});
    }
    write_atomic(c.out, "train_history.csv", hist.str());
    write_atomic(c.out, "theta.csv", theta_table(hash, res.theta_star).str());
    std::ostringstream s;
    s << "experiment: train\nconfig_hash: " << hash << "\nN: " << c.sampling.n
      << "\niterations: " << res.iterations << "\nconverged: " << (res.converged ? "yes" : "no")
      << "\nmin_JN: " << fmt_double(res.history.back().total)
      << "\nJN_at_zero: " << fmt_double(res.cost_at_zero.total)
      << "\ngrad_norm_final: " << fmt_double(res.grad_norm_final)
      << "\nenergy_lower: " << fmt_double(res.energy_lower)
      << "\nenergy_bound_holds: " << (res.energy_bound_holds ? "yes" : "no") << '\n';
    write_atomic(c.out, "summary.txt", s.str());
  }
  return res;
}

// ---------------------------------------------------------------------------
// solve-limit

struct SolveLimitReport {
  FixedPointResult fixed_point;
  FirstOrderResidual residual;
  JdEstimate jd;
};

inline SolveLimitReport solve_limit(const ExperimentConfig& c, const ValidatedParams& vp,
                                    const std::string& label) {
  SolveLimitReport rep;
  const FixedPointConfig fc = fixed_point_config_of(c, derive_seed(c.seed, label));
  rep.fixed_point = fixed_point_solve(vp, c.law, fc);
  rep.residual = residual_first_order(rep.fixed_point.theta_star, vp, c.law, fc.mc_paths, c.n_steps,
                                      fixed_point_seed(fc, rep.fixed_point.iterations), fc.exec);
  rep.jd = evaluate_Jd(rep.fixed_point.theta_star, vp, c.law, c.sampling.jd_paths, c.n_steps,
                       derive_seed(c.seed, label + "-jd"), fc.exec);
  return rep;
}

inline SolveLimitReport run_solve_limit(const ExperimentConfig& c) {
  const ValidatedParams vp = validate_params(c.model);
  const std::string hash = config_hash(c);
  const SolveLimitReport rep = solve_limit(c, vp, "limit");
  if (!c.out.empty()) {
    const auto& fp = rep.fixed_point;
    std::vector<std::string> cols{"t"};
    for (std::size_t j = 0; j < fp.theta_star.dim(); ++j) {
      cols.push_back("theta_" + to_str(j + 1));
      cols.push_back("G_" + to_str(j + 1));
      cols.push_back("G_se_" + to_str(j + 1));
    }
    CsvTable tab(hash, cols);
    for (std::size_t k = 0; k < fp.theta_star.nodes(); ++k) {
      std::vector<std::string> row{fmt_double(fp.theta_star.time(k))};
      for (std::size_t j = 0; j < fp.theta_star.dim(); ++j) {
        row.push_back(fmt_double(fp.theta_star(k, j)));
        row.push_back(fmt_double(fp.G.values(k, j)));
        row.push_back(fmt_double(fp.G.std_errors(k, j)));
      }
      tab.row(row);
    }
    write_atomic(c.out, "theta_star.csv", tab.str());
    CsvTable trace(hash, {"iter", "sup_change"});
    for (std::size_t i = 0; i < fp.trace.size(); ++i) trace.row({to_str(i + 1), fmt_double(fp.trace[i])});
    write_atomic(c.out, "fixed_point_trace.csv", trace.str());
    std::ostringstream s;
    s << "experiment: solve-limit\nconfig_hash: " << hash << "\niterations: " << fp.iterations
      << "\nprojection_active: " << (fp.projection_active ? "yes" : "no")
      << "\nresidual_first_order: " << fmt_double(rep.residual.value)
      << "\n  interior: " << fmt_double(rep.residual.interior)
      << "\n  boundary: " << fmt_double(rep.residual.boundary)
      << "\n  max_std_error: " << fmt_double(rep.residual.max_std_error)
      << "\nJd: " << fmt_double(rep.jd.estimate) << " +- " << fmt_double(rep.jd.std_error) << '\n';
    write_atomic(c.out, "summary.txt", s.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// gamma

struct GammaRow {
  std::size_t draw = 0;
  std::size_t N = 0;
  double min_JN = 0.0;
  double gap = 0.0;         // |min J_N - J^d(theta*)|
  double theta_dist = 0.0;  // sup-norm distance to the limit control
  double w2_terminal = 0.0;
  int iterations = 0;
  bool energy_ok = false;
};

struct GammaReport {
  SolveLimitReport limit;
  std::vector<GammaRow> rows;
  std::vector<double> mean_gap;  // per N
  std::vector<double> mean_theta_dist;
  double spearman_pooled = 0.0;
  double p_value = 1.0;
  double spearman_mean_curve = 0.0;
  double frac_theta_improved = 0.0;  // draws with dist(N_last) < dist(N_first)
  bool all_energy_ok = true;
};

inline GammaReport run_gamma(const ExperimentConfig& c) {
  validate_experiment(c);
  const ValidatedParams vp = validate_params(c.model);
  require(detail::is_example52(vp), ErrorKind::ConfigNotExample52,
          "gamma runs in the scalar setting (d=1, m=2, q=0, diagonal wiring, w_eta=0)");
  const std::string hash = config_hash(c);
  const ExecPolicy exec = exec_of(c);
  GammaReport rep;
  rep.limit = solve_limit(c, vp, "gamma-limit");
  const ControlGrid& theta_star = rep.limit.fixed_point.theta_star;
  const double Jd = rep.limit.jd.estimate;
  const auto ref = simulate_limit_sde(vp, theta_star, c.law, c.sampling.reference_paths, c.n_steps,
                                      derive_seed(c.seed, "gamma-reference"), exec);
  const std::vector<double> ref_cloud = terminal_coordinate(ref);

  const auto& nl = c.sampling.n_list;
  const TrainConfig tc = train_config_of(c);
  for (std::size_t d = 0; d < c.sampling.draws; ++d) {
    const Dataset pool = make_dataset(vp, c.law, nl.back(), derive_seed(c.seed, "gamma-draw", d));
    const std::uint64_t noise = derive_seed(c.seed, "gamma-noise", d);
    for (std::size_t N : nl) {
      const Dataset data = dataset_prefix(pool, N);
      const TrainResult res = train(vp, data, tc, noise);
      GammaRow row;
      row.draw = d;
      row.N = N;
      row.min_JN = res.history.back().total;
      row.gap = std::abs(row.min_JN - Jd);
      row.theta_dist = res.theta_star.sup_distance(theta_star);
      const auto ens = simulate_particles(vp, res.theta_star, data.samples, data.types, c.n_steps,
                                          replication_seed(noise, 0), exec, data.ids);
      row.w2_terminal = wasserstein2_1d(terminal_coordinate(ens), ref_cloud);
      row.iterations = res.iterations;
      row.energy_ok = res.energy_bound_holds;
      rep.all_energy_ok = rep.all_energy_ok && row.energy_ok;
      rep.rows.push_back(row);
    }
  }

  std::vector<double> xs, gaps;
  for (const auto& r : rep.rows) {
    xs.push_back(static_cast<double>(r.N));
    gaps.push_back(r.gap);
  }
  std::size_t improved = 0;
  for (std::size_t i = 0; i < nl.size(); ++i) {
    std::vector<double> g, t;
    for (const auto& r : rep.rows) {
      if (r.N == nl[i]) {
        g.push_back(r.gap);
        t.push_back(r.theta_dist);
      }
    }
    rep.mean_gap.push_back(stats::mean(g));
    rep.mean_theta_dist.push_back(stats::mean(t));
  }
  for (std::size_t d = 0; d < c.sampling.draws; ++d) {
    const auto& first = rep.rows[d * nl.size()];
    const auto& last = rep.rows[d * nl.size() + nl.size() - 1];
    if (last.theta_dist < first.theta_dist) ++improved;
  }
  if (rep.rows.size() >= 3) {
    rep.spearman_pooled = stats::spearman(xs, gaps);
    rep.p_value = stats::correlation_p_value(rep.spearman_pooled, rep.rows.size());
  }
  if (nl.size() >= 2) {
    std::vector<double> ns(nl.begin(), nl.end());
    rep.spearman_mean_curve = stats::spearman(ns, rep.mean_gap);
  }
  rep.frac_theta_improved = c.sampling.draws > 0 ? static_cast<double>(improved) / c.sampling.draws : 0.0;

  if (!c.out.empty()) {
    CsvTable tab(hash, {"draw", "N", "min_JN", "Jd", "gap", "theta_dist", "w2_terminal", "iterations",
                        "energy_ok"});
    for (const auto& r : rep.rows) {
      tab.row({to_str(r.draw), to_str(r.N), fmt_double(r.min_JN), fmt_double(Jd), fmt_double(r.gap),
               fmt_double(r.theta_dist), fmt_double(r.w2_terminal), std::to_string(r.iterations),
               r.energy_ok ? "1" : "0"});
    }
    write_atomic(c.out, "gamma.csv", tab.str());
    CsvTable agg(hash, {"N", "mean_gap", "mean_theta_dist"});
    for (std::size_t i = 0; i < nl.size(); ++i) {
      agg.row({to_str(nl[i]), fmt_double(rep.mean_gap[i]), fmt_double(rep.mean_theta_dist[i])});
    }
    write_atomic(c.out, "gamma_by_N.csv", agg.str());
    write_atomic(c.out, "theta_star.csv", theta_table(hash, theta_star).str());
    std::ostringstream s;
    s << "experiment: gamma\nconfig_hash: " << hash << "\ndraws: " << c.sampling.draws
      << "\nJd(theta*): " << fmt_double(Jd) << " +- " << fmt_double(rep.limit.jd.std_error)
      << "\nfixed_point_iterations: " << rep.limit.fixed_point.iterations
      << "\nprojection_active: " << (rep.limit.fixed_point.projection_active ? "yes" : "no")
      << "\nspearman(N, gap) pooled: " << fmt_double(rep.spearman_pooled)
      << "\np_value: " << fmt_double(rep.p_value)
      << "\nspearman(N, mean gap): " << fmt_double(rep.spearman_mean_curve)
      << "\nfraction of draws with smaller theta distance at largest N: "
      << fmt_double(rep.frac_theta_improved)
      << "\nenergy bound held in all runs: " << (rep.all_energy_ok ? "yes" : "no") << '\n';
    write_atomic(c.out, "summary.txt", s.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// diagnose-fpk

struct FpkRow {
  std::string variant;  // "noisy" or "no_noise"
  std::size_t N = 0;
  std::size_t seed = 0;
  double sup_residual = 0.0;
  double w2_terminal = 0.0;
};

struct FpkReport {
  std::vector<FpkRow> rows;
  std::vector<double> mean_sup;          // noisy, per N
  std::vector<double> mean_sup_control;  // no-noise, per N (empty when disabled)
  stats::LineFit fit;
  stats::LineFit fit_control;
};

inline FpkReport run_diagnose_fpk(const ExperimentConfig& c) {
  validate_experiment(c);
  const ValidatedParams vp = validate_params(c.model);
  const std::string hash = config_hash(c);
  const ExecPolicy exec = exec_of(c);
  const ControlGrid theta = config_theta(c);
  const TestFunction phi = config_test_function(c);
  const auto& nl = c.sampling.n_list;

  FpkReport rep;
  auto run_variant = [&](const std::string& name, const SampleLaw& law, std::vector<double>& means) {
    const auto ref = simulate_limit_sde(vp, theta, law, c.sampling.reference_paths, c.n_steps,
                                        derive_seed(c.seed, "fpk-reference-" + name), exec);
    const auto ref_cloud = terminal_coordinate(ref);
    std::vector<std::vector<double>> sups(nl.size());
    for (std::size_t s = 0; s < c.sampling.seeds; ++s) {
      const Dataset pool = make_dataset(vp, law, nl.back(), derive_seed(c.seed, "fpk-draw", s));
      for (std::size_t i = 0; i < nl.size(); ++i) {
        const Dataset data = dataset_prefix(pool, nl[i]);
        const auto ens = simulate_particles(vp, theta, data.samples, data.types, c.n_steps,
                                            derive_seed(c.seed, "fpk-noise", s), exec, data.ids);
        const auto res = fpk_residual(empirical_path(ens), theta, phi, vp, exec);
        FpkRow row{name, nl[i], s, res.sup, wasserstein2_1d(terminal_coordinate(ens), ref_cloud)};
        sups[i].push_back(res.sup);
        rep.rows.push_back(row);
      }
    }
    for (const auto& v : sups) means.push_back(stats::mean(v));
  };

  run_variant("noisy", c.law, rep.mean_sup);
  std::vector<double> ns(nl.begin(), nl.end());
  if (nl.size() >= 2) rep.fit = stats::fit_loglog(ns, rep.mean_sup);
  if (c.no_noise_control) {
    SampleLaw quiet = c.law;
    for (double& e : quiet.type.epsilon.data) e = 0.0;
    for (double& e : quiet.type.sigma.data) e = 0.0;
    run_variant("no_noise", quiet, rep.mean_sup_control);
    if (nl.size() >= 2) rep.fit_control = stats::fit_loglog(ns, rep.mean_sup_control);
  }

  if (!c.out.empty()) {
    CsvTable tab(hash, {"variant", "N", "seed", "sup_residual", "w2_terminal"});
    for (const auto& r : rep.rows) {
      tab.row({r.variant, to_str(r.N), to_str(r.seed), fmt_double(r.sup_residual), fmt_double(r.w2_terminal)});
    }
    write_atomic(c.out, "fpk_scaling.csv", tab.str());
    CsvTable agg(hash, {"variant", "N", "mean_sup_residual"});
    for (std::size_t i = 0; i < nl.size(); ++i) agg.row({"noisy", to_str(nl[i]), fmt_double(rep.mean_sup[i])});
    for (std::size_t i = 0; i < rep.mean_sup_control.size(); ++i) {
      agg.row({"no_noise", to_str(nl[i]), fmt_double(rep.mean_sup_control[i])});
    }
    write_atomic(c.out, "fpk_by_N.csv", agg.str());
    std::ostringstream s;
    s << "experiment: diagnose-fpk\nconfig_hash: " << hash << "\nseeds per N: " << c.sampling.seeds
      << "\nlog-log slope (noisy): " << fmt_double(rep.fit.slope) << " +- "
      << fmt_double(rep.fit.slope_std_error) << '\n';
    if (c.no_noise_control) {
      s << "log-log slope (no noise): " << fmt_double(rep.fit_control.slope) << " +- "
        << fmt_double(rep.fit_control.slope_std_error) << '\n';
    }
    write_atomic(c.out, "summary.txt", s.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckCase {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  ModelParams model;
  SampleLaw law;
  std::size_t N = 0;
  std::size_t intervals = 0;
  std::size_t n_steps = 0;
  std::size_t replications = 1;
  double h = 1e-5;
  bool zero_dynamics = false;
};

struct GradcheckRow {
  GradcheckCase config;
  double fd = 0.0;
  double forward = 0.0;
  double adjoint = 0.0;
  double rel_err_forward = 0.0;
  double rel_err_adjoint = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  double worst_rel_error = 0.0;
  double zero_dynamics_error = 0.0;
};

/// Random smooth configurations: d in 1..3, N <= 16, at most 64 control intervals,
/// with batch coupling and exogenous inputs switched on at random.
inline std::vector<GradcheckCase> gradcheck_suite(std::uint64_t seed, std::size_t count, double h) {
  std::vector<GradcheckCase> out;
  const ActivationKind kinds[] = {ActivationKind::Tanh, ActivationKind::Sigmoid, ActivationKind::Gaussian,
                                  ActivationKind::AffineTest};
  const BatchFunction rhos[] = {BatchFunction::TanhMean, BatchFunction::Mean, BatchFunction::Zero};
  const std::size_t grids[] = {4, 8, 16, 32, 64};
  for (std::size_t id = 0; id < count; ++id) {
    GradcheckCase g;
    g.id = id;
    g.seed = derive_seed(seed, "gradcheck", id);
    g.h = h;
    UniformStream u(g.seed);
    ModelParams& p = g.model;
    p.dims.d = static_cast<std::size_t>(u.integer(1, 3));
    p.dims.q = static_cast<std::size_t>(u.integer(0, 2));
    p.dims.p = static_cast<std::size_t>(u.integer(1, 3));
    p.dims.l = p.dims.q;
    p.activation.kind = kinds[u.integer(0, 3)];
    p.activation.wiring = u.next() < 0.5 ? Wiring::Diagonal : Wiring::Dense;
    p.dims.m = control_dim_for(p.activation.wiring, p.dims.d);
    p.activation.w_z = u.uniform(-1.0, 1.0);
    p.activation.w_eta = u.uniform(-1.0, 1.0);
    p.rho = rhos[u.integer(0, 2)];
    p.phi = ExogenousDrift::NegGammaZ;
    p.alpha = u.uniform(0.2, 2.0);
    p.beta = u.uniform(0.2, 2.0);
    p.lambda1 = u.uniform(0.05, 1.0);
    p.lambda2 = u.uniform(0.01, 0.5);
    p.T = u.uniform(0.5, 1.5);
    g.law.label_scale = u.uniform(-1.5, 1.5);
    g.law.label_shift = u.uniform(-0.5, 0.5);
    g.law.type = detail::default_type(p.dims);
    for (double& e : g.law.type.epsilon.data) e = u.uniform(0.0, 0.4);
    for (double& e : g.law.type.sigma.data) e = u.uniform(0.0, 0.4);
    for (double& e : g.law.type.gamma) e = u.uniform(0.2, 1.5);
    g.N = static_cast<std::size_t>(u.integer(2, 16));
    g.intervals = grids[u.integer(0, 4)];
    const int refine = u.integer(0, 2);
    g.n_steps = refine == 0 ? g.intervals : refine == 1 ? 2 * g.intervals : std::max<std::size_t>(2, g.intervals / 2);
    g.replications = static_cast<std::size_t>(u.integer(1, 2));
    out.push_back(g);
  }
  // Zero dynamics: J_N is quadratic in theta, so a unit-step central difference is exact.
  GradcheckCase z;
  z.id = count;
  z.seed = derive_seed(seed, "gradcheck-zero");
  z.model.activation.kind = ActivationKind::Zero;
  z.model.lambda1 = 0.7;
  z.model.lambda2 = 0.3;
  z.N = 4;
  z.intervals = 16;
  z.n_steps = 16;
  z.h = 1.0;
  z.zero_dynamics = true;
  z.law.type = detail::default_type(z.model.dims);
  out.push_back(z);
  return out;
}

inline GradcheckRow run_gradcheck_case(const GradcheckCase& g, const ExecPolicy& exec = {}) {
  const ValidatedParams vp = validate_params(g.model);
  const Dataset data = make_dataset(vp, g.law, g.N, derive_seed(g.seed, "samples"));
  UniformStream u(g.seed, 1);
  ControlGrid theta(vp->T, g.intervals, vp.dims().m, vp->K_theta);
  ControlGrid dir(vp->T, g.intervals, vp.dims().m);
  for (double& v : theta.values()) v = 0.5 * u.normal();
  for (double& v : dir.values()) v = u.normal();
  SimConfig sim{g.n_steps, g.replications, exec};
  const std::uint64_t noise = derive_seed(g.seed, "noise");

  auto shifted = [&](double s) {
    ControlGrid t = theta;
    for (std::size_t i = 0; i < t.values().size(); ++i) t.values()[i] += s * dir.values()[i];
    return t;
  };
  GradcheckRow row;
  row.config = g;
  row.fd = (objective_JN(vp, shifted(g.h), data, sim, noise).total -
            objective_JN(vp, shifted(-g.h), data, sim, noise).total) / (2.0 * g.h);
  for (std::size_t r = 0; r < g.replications; ++r) {
    const auto ens = simulate_particles(vp, theta, data.samples, data.types, g.n_steps,
                                        replication_seed(noise, r), exec, data.ids);
    row.forward += forward_sensitivity(ens, theta, dir, vp, exec);
  }
  row.forward /= static_cast<double>(g.replications);
  row.adjoint = detail::dot(gradient_JN(vp, theta, data, sim, noise), dir);
  const double scale = std::max(std::abs(row.fd), 1e-300);
  row.rel_err_forward = std::abs(row.forward - row.fd) / scale;
  row.rel_err_adjoint = std::abs(row.adjoint - row.fd) / scale;
  return row;
}

inline GradcheckReport run_gradcheck(const ExperimentConfig& c) {
  const std::string hash = config_hash(c);
  GradcheckReport rep;
  for (const auto& g : gradcheck_suite(c.seed, c.gradcheck_configs, c.gradcheck_h)) {
    GradcheckRow row = run_gradcheck_case(g, exec_of(c));
    const double worst = std::max(row.rel_err_forward, row.rel_err_adjoint);
    rep.worst_rel_error = std::max(rep.worst_rel_error, worst);
    if (g.zero_dynamics) rep.zero_dynamics_error = worst;
    rep.rows.push_back(row);
  }
  if (!c.out.empty()) {
    CsvTable tab(hash, {"config", "seed", "d", "q", "p", "m", "N", "intervals", "n_steps", "replications",
                        "activation", "wiring", "rho", "h", "fd", "forward", "adjoint", "rel_err_forward",
                        "rel_err_adjoint"});
    for (const auto& r : rep.rows) {
      const auto& g = r.config;
      const auto& p = g.model;
      tab.row({to_str(g.id), std::to_string(g.seed), to_str(p.dims.d), to_str(p.dims.q), to_str(p.dims.p),
               to_str(p.dims.m), to_str(g.N), to_str(g.intervals), to_str(g.n_steps), to_str(g.replications),
               detail::enum_name(p.activation.kind, detail::kActivationNames),
               detail::enum_name(p.activation.wiring, detail::kWiringNames),
               detail::enum_name(p.rho, detail::kRhoNames), fmt_double(g.h), fmt_double(r.fd),
               fmt_double(r.forward), fmt_double(r.adjoint), fmt_double(r.rel_err_forward),
               fmt_double(r.rel_err_adjoint)});
    }
    write_atomic(c.out, "gradcheck.csv", tab.str());
    std::ostringstream s;
    s << "experiment: gradcheck\nconfig_hash: " << hash << "\nconfigurations: " << rep.rows.size()
      << "\nworst relative error: " << fmt_double(rep.worst_rel_error)
      << "\nzero-dynamics error: " << fmt_double(rep.zero_dynamics_error) << '\n';
    write_atomic(c.out, "summary.txt", s.str());
  }
  require(rep.worst_rel_error <= 1e-3, ErrorKind::GradCheckFailed,
          "worst relative error " + fmt_double(rep.worst_rel_error) + " exceeds 1e-3");
  return rep;
}

}  // namespace mfres
