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

// Finite-sample training: minimize the (replication-averaged) pathwise J_N
// over the control grid.
//
// Derivatives are exact for the discretized system. The forward route
// integrates the variational states
//   phi^i_{k+1} = phi^i_k + dt [ d_x f phi^i_k + d_eta f (1/N) sum_j grad rho(X^j_k) . phi^j_k
//                                + d_theta f hat_theta_k ],
// the reverse route runs the matching discrete adjoint. Both must agree with
// central finite differences under common random numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mfres/control.hpp"
#include "mfres/law.hpp"
#include "mfres/model.hpp"
#include "mfres/objective.hpp"
#include "mfres/parallel.hpp"
#include "mfres/sde.hpp"
#include "mfres/tridiag.hpp"

namespace mfres {

/// Training samples with their types and stable noise-stream ids.
struct Dataset {
  std::vector<TrainingSample> samples;
  std::vector<TypeVector> types;
  std::vector<std::uint64_t> ids;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Draws N i.i.d. samples; sample i gets stream id i, so prefixes of a larger
/// draw are identical datasets.
inline Dataset make_dataset(const ValidatedParams& vp, const SampleLaw& law, std::size_t n,
                            std::uint64_t seed) {
  Dataset ds;
  ds.samples = draw_samples(vp, law, n, derive_seed(seed, "samples"));
  ds.types = draw_types(vp, law, n, derive_seed(seed, "types"));
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::uint64_t{0});
  return ds;
}

struct SimConfig {
  std::size_t n_steps = 32;
  std::size_t replications = 1;  // common-random-number noise batches
  ExecPolicy exec;
};

inline std::uint64_t replication_seed(std::uint64_t seed, std::size_t r) {
  return derive_seed(seed, "replication", r);
}

/// Gradient of lambda1 trapz|theta|^2 + lambda2 sum |d theta|^2 / dt w.r.t. node values.
inline ControlGrid control_cost_gradient(const ControlGrid& theta, double lambda1, double lambda2) {
  ControlGrid g(theta.horizon(), theta.intervals(), theta.dim(), theta.bound());
  const std::size_t n = theta.intervals();
  const double h = theta.dt();
  for (std::size_t k = 0; k <= n; ++k) {
    const double w = trapezoid_weight(k, n);
    for (std::size_t j = 0; j < theta.dim(); ++j) {
      double lap = 0.0;
      if (k > 0) lap += theta(k, j) - theta(k - 1, j);
      if (k < n) lap += theta(k, j) - theta(k + 1, j);
      g(k, j) = 2.0 * lambda1 * h * w * theta(k, j) + 2.0 * lambda2 * lap / h;
    }
  }
  return g;
}

/// Derivative of the control costs along `dir`.
inline double control_cost_directional(const ControlGrid& theta, const ControlGrid& dir,
                                       double lambda1, double lambda2) {
  const std::size_t n = theta.intervals();
  const double h = theta.dt();
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    double dot = 0.0;
    for (std::size_t j = 0; j < theta.dim(); ++j) dot += theta(k, j) * dir(k, j);
    l2 += trapezoid_weight(k, n) * h * dot;
  }
  for (std::size_t k = 0; k < n; ++k) {
    double dot = 0.0;
    for (std::size_t j = 0; j < theta.dim(); ++j) {
      dot += (theta(k + 1, j) - theta(k, j)) * (dir(k + 1, j) - dir(k, j));
    }
    h1 += dot / h;
  }
  return 2.0 * lambda1 * l2 + 2.0 * lambda2 * h1;
}

/// Directional derivative of the pathwise J_N (same noise) along `direction`.
inline double forward_sensitivity(const ParticleEnsemble& ens, const ControlGrid& theta,
                                  const ControlGrid& direction, const ValidatedParams& vp,
                                  const ExecPolicy& exec = {}) {
  detail::check_ensemble(ens, theta, vp);
  require(direction.same_grid(theta), ErrorKind::GridMismatch,
          "direction must live on the control grid");
  detail::check_sim_grid(vp, theta, ens.n_steps);
  const Dims& dm = vp.dims();
  const std::size_t N = ens.n_particles;
  const std::size_t n = ens.n_steps;
  const double dt = ens.dt();
  const double invN = 1.0 / static_cast<double>(N);

  std::vector<double> phi(N * dm.d, 0.0), phi_next(N * dm.d, 0.0);
  std::vector<double> acc(N, 0.0);  // per-particle state-cost derivative
  std::vector<double> rho_dot(N, 0.0);
  std::vector<double> theta_k(dm.m), dir_k(dm.m);

  auto add_running = [&](std::size_t k, std::size_t begin, std::size_t end) {
    const double w = 2.0 * vp->beta * dt * trapezoid_weight(k, n);
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = ens.x(i, k);
      const auto& y = ens.samples[i].y0;
      double s = 0.0;
      for (std::size_t r = 0; r < dm.d; ++r) s += (x[r] - y[r]) * phi[i * dm.d + r];
      acc[i] += w * s;
    }
  };

  for (std::size_t k = 0; k < n; ++k) {
    detail::theta_at_step(theta, k, n, theta_k);
    detail::theta_at_step(direction, k, n, dir_k);
    const double eta = ens.eta[k];
    parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
      std::vector<double> grad(dm.d);
      for (std::size_t i = begin; i < end; ++i) {
        vp.rho_gradient(ens.x(i, k), grad);
        double s = 0.0;
        for (std::size_t r = 0; r < dm.d; ++r) s += grad[r] * phi[i * dm.d + r];
        rho_dot[i] = s;
      }
      add_running(k, begin, end);
    });
    double coupling = 0.0;
    for (std::size_t i = 0; i < N; ++i) coupling += rho_dot[i];
    coupling *= invN;
    parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
      DriftJacobian J(dm);
      for (std::size_t i = begin; i < end; ++i) {
        vp.drift_jacobian(theta_k, ens.z(i, k), ens.x(i, k), eta, J);
        std::span<const double> cur(phi.data() + i * dm.d, dm.d);
        std::span<double> nxt(phi_next.data() + i * dm.d, dm.d);
        std::vector<double> rate(dm.d, 0.0);
        detail::add_matvec(J.dx, cur, rate);
        detail::add_matvec(J.dtheta, dir_k, rate);
        for (std::size_t r = 0; r < dm.d; ++r) nxt[r] = cur[r] + dt * (rate[r] + J.deta[r] * coupling);
      }
    });
    phi.swap(phi_next);
  }
  parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
    add_running(n, begin, end);
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = ens.x(i, n);
      const auto& y = ens.samples[i].y0;
      double s = 0.0;
      for (std::size_t r = 0; r < dm.d; ++r) s += (x[r] - y[r]) * phi[i * dm.d + r];
      acc[i] += 2.0 * vp->alpha * s;
    }
  });
  double state = 0.0;
  for (double a : acc) state += a;
  return state * invN + control_cost_directional(theta, direction, vp->lambda1, vp->lambda2);
}

/// Gradient of the pathwise J_N w.r.t. the control node values (discrete adjoint).
inline ControlGrid adjoint_gradient(const ParticleEnsemble& ens, const ControlGrid& theta,
                                    const ValidatedParams& vp, const ExecPolicy& exec = {}) {
  detail::check_ensemble(ens, theta, vp);
  detail::check_sim_grid(vp, theta, ens.n_steps);
  const Dims& dm = vp.dims();
  const std::size_t N = ens.n_particles;
  const std::size_t n = ens.n_steps;
  const double dt = ens.dt();
  const double invN = 1.0 / static_cast<double>(N);

  std::vector<double> adj(N * dm.d), adj_prev(N * dm.d);
  for (std::size_t i = 0; i < N; ++i) {
    const auto x = ens.x(i, n);
    const auto& y = ens.samples[i].y0;
    const double c = invN * (2.0 * vp->alpha + 2.0 * vp->beta * dt * trapezoid_weight(n, n));
    for (std::size_t r = 0; r < dm.d; ++r) adj[i * dm.d + r] = c * (x[r] - y[r]);
  }

  ControlGrid grad = control_cost_gradient(theta, vp->lambda1, vp->lambda2);
  std::vector<double> theta_k(dm.m);
  std::vector<double> eta_part(N), contrib(N * dm.m);
  for (std::size_t k = n; k-- > 0;) {
    detail::theta_at_step(theta, k, n, theta_k);
    const double eta = ens.eta[k];
    const double run = invN * 2.0 * vp->beta * dt * trapezoid_weight(k, n);
    parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
      DriftJacobian J(dm);
      for (std::size_t i = begin; i < end; ++i) {
        vp.drift_jacobian(theta_k, ens.z(i, k), ens.x(i, k), eta, J);
        std::span<const double> a(adj.data() + i * dm.d, dm.d);
        std::span<double> out(adj_prev.data() + i * dm.d, dm.d);
        const auto x = ens.x(i, k);
        const auto& y = ens.samples[i].y0;
        double e = 0.0;
        for (std::size_t r = 0; r < dm.d; ++r) e += J.deta[r] * a[r];
        eta_part[i] = dt * e;
        for (std::size_t c = 0; c < dm.d; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < dm.d; ++r) s += J.dx(r, c) * a[r];
          out[c] = a[c] + dt * s + run * (x[c] - y[c]);
        }
        for (std::size_t j = 0; j < dm.m; ++j) {
          double s = 0.0;
          for (std::size_t r = 0; r < dm.d; ++r) s += J.dtheta(r, j) * a[r];
          contrib[i * dm.m + j] = dt * s;
        }
      }
    });
    double coupling = 0.0;
    for (std::size_t i = 0; i < N; ++i) coupling += eta_part[i];
    coupling *= invN;
    if (coupling != 0.0) {
      parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
        std::vector<double> gr(dm.d);
        for (std::size_t i = begin; i < end; ++i) {
          vp.rho_gradient(ens.x(i, k), gr);
          for (std::size_t r = 0; r < dm.d; ++r) adj_prev[i * dm.d + r] += gr[r] * coupling;
        }
      });
    }
    const auto [node, w] = theta.locate_step(k, n);
    for (std::size_t j = 0; j < dm.m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < N; ++i) s += contrib[i * dm.m + j];
      grad(node, j) += (1.0 - w) * s;
      if (w != 0.0) grad(node + 1, j) += w * s;
    }
    adj.swap(adj_prev);
  }
  return grad;
}

struct ValueAndGradient {
  CostBreakdown cost;
  ControlGrid gradient;
};

/// Replication-averaged J_N (common random numbers across calls with the same seed).
inline CostBreakdown objective_JN(const ValidatedParams& vp, const ControlGrid& theta,
                                  const Dataset& data, const SimConfig& sim, std::uint64_t seed) {
  require(sim.replications >= 1, ErrorKind::ConfigInvalid, "replications must be >= 1");
  CostBreakdown total;
  for (std::size_t r = 0; r < sim.replications; ++r) {
    const auto ens = simulate_particles(vp, theta, data.samples, data.types, sim.n_steps,
                                        replication_seed(seed, r), sim.exec, data.ids);
    total += evaluate_JN(ens, theta, vp);
  }
  total /= static_cast<double>(sim.replications);
  return total;
}

inline ValueAndGradient value_and_gradient(const ValidatedParams& vp, const ControlGrid& theta,
                                           const Dataset& data, const SimConfig& sim,
                                           std::uint64_t seed) {
  require(sim.replications >= 1, ErrorKind::ConfigInvalid, "replications must be >= 1");
  ValueAndGradient out{CostBreakdown{}, ControlGrid(theta.horizon(), theta.intervals(), theta.dim(), theta.bound())};
  for (std::size_t r = 0; r < sim.replications; ++r) {
    const auto ens = simulate_particles(vp, theta, data.samples, data.types, sim.n_steps,
                                        replication_seed(seed, r), sim.exec, data.ids);
    out.cost += evaluate_JN(ens, theta, vp);
    const ControlGrid g = adjoint_gradient(ens, theta, vp, sim.exec);
    for (std::size_t i = 0; i < g.values().size(); ++i) out.gradient.values()[i] += g.values()[i];
  }
  const double R = static_cast<double>(sim.replications);
  out.cost /= R;
  for (double& v : out.gradient.values()) v /= R;
  return out;
}

/// Euclidean gradient on the grid: <grad, dir> equals the directional
/// derivative for every node-basis direction.
inline ControlGrid gradient_JN(const ValidatedParams& vp, const ControlGrid& theta,
                               const Dataset& data, const SimConfig& sim, std::uint64_t seed) {
  return value_and_gradient(vp, theta, data, sim, seed).gradient;
}

struct TrainConfig {
  SimConfig sim;
  int max_iters = 200;
  double step_size = 1.0;   // first trial step of each line search
  double backtrack = 0.5;   // shrink factor
  double armijo_c = 1e-4;
  double min_step = 1e-10;  // line-search floor
  double grad_tol = 1e-6;
  double fd_epsilon = 1e-5; // finite-difference oracle only
  std::size_t intervals = 32;
};

struct TrainResult {
  ControlGrid theta_star;
  std::vector<CostBreakdown> history;  // cost at every accepted iterate, initial point first
  std::vector<double> grad_norms;
  double grad_norm_final = 0.0;
  int iterations = 0;
  bool converged = false;
  CostBreakdown cost_at_zero;
  double energy_lower = 0.0;  // min(lambda1, lambda2) ||theta*||^2_{H1, grid}
  bool energy_bound_holds = false;
};

namespace detail {

/// Newton direction for the control costs: solves 2 (lambda1 M + lambda2 K) d = g,
/// i.e. the H1-metric representer of the gradient.
inline ControlGrid sobolev_direction(const ControlGrid& g, double lambda1, double lambda2) {
  const std::size_t nodes = g.nodes();
  const double h = g.dt();
  const Tridiagonal op = neumann_operator(nodes, h, lambda1, lambda2);
  ControlGrid d(g.horizon(), g.intervals(), g.dim(), g.bound());
  std::vector<double> rhs(nodes);
  for (std::size_t j = 0; j < g.dim(); ++j) {
    for (std::size_t k = 0; k < nodes; ++k) {
      rhs[k] = g(k, j) / (2.0 * h * trapezoid_weight(k, g.intervals()));
    }
    const auto sol = solve_tridiagonal(op, rhs);
    for (std::size_t k = 0; k < nodes; ++k) d(k, j) = sol[k];
  }
  return d;
}

inline double dot(const ControlGrid& a, const ControlGrid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

}  // namespace detail

/// Projected gradient descent (H1-preconditioned) with Armijo backtracking.
/// Starts from theta = 0 unless `init` is given; every iterate stays in the box.
inline TrainResult train(const ValidatedParams& vp, const Dataset& data, const TrainConfig& cfg,
                         std::uint64_t seed, std::optional<ControlGrid> init = std::nullopt) {
  require(cfg.step_size > 0 && cfg.grad_tol > 0, ErrorKind::ConfigInvalid,
          "step_size and grad_tol must be > 0");
  require(cfg.backtrack > 0 && cfg.backtrack < 1, ErrorKind::ConfigInvalid,
          "backtrack factor must lie in (0, 1)");
  const ControlGrid zero(vp->T, cfg.intervals, vp.dims().m, vp->K_theta);
  ControlGrid theta = init ? *init : zero;
  theta.set_bound(vp->K_theta);
  theta = project_to_box(theta);

  TrainResult res;
  res.cost_at_zero = objective_JN(vp, zero, data, cfg.sim, seed);
  auto vg = value_and_gradient(vp, theta, data, cfg.sim, seed);
  res.history.push_back(vg.cost);

  auto line_search = [&](const ControlGrid& dir, ControlGrid& accepted, CostBreakdown& cost) {
    double s = cfg.step_size;
    while (s >= cfg.min_step) {
      ControlGrid trial = theta;
      for (std::size_t i = 0; i < trial.values().size(); ++i) trial.values()[i] -= s * dir.values()[i];
      trial = project_to_box(trial);
      ControlGrid step = trial;
      for (std::size_t i = 0; i < step.values().size(); ++i) step.values()[i] -= theta.values()[i];
      const double decrease = detail::dot(vg.gradient, step);
      if (decrease < 0.0) {
        const CostBreakdown c = objective_JN(vp, trial, data, cfg.sim, seed);
        if (c.total <= vg.cost.total + cfg.armijo_c * decrease) {
          accepted = std::move(trial);
          cost = c;
          return true;
        }
      }
      s *= cfg.backtrack;
    }
    return false;
  };

  for (int it = 0;; ++it) {
    const ControlGrid dir = detail::sobolev_direction(vg.gradient, vp->lambda1, vp->lambda2);
    ControlGrid probe = theta;
    for (std::size_t i = 0; i < probe.values().size(); ++i) probe.values()[i] -= dir.values()[i];
    probe = project_to_box(probe);
    ControlGrid pg = theta;
    for (std::size_t i = 0; i < pg.values().size(); ++i) pg.values()[i] -= probe.values()[i];
    const double gn = std::sqrt(std::max(0.0, detail::dot(vg.gradient, pg)));
    res.grad_norms.push_back(gn);
    res.grad_norm_final = gn;
    if (gn < cfg.grad_tol) {
      res.converged = true;
      break;
    }
    if (it >= cfg.max_iters) break;

    ControlGrid next;
    CostBreakdown cost;
    bool ok = line_search(dir, next, cost);
    if (!ok) {
      // Steepest descent in the trapezoid-mass metric as a fallback.
      ControlGrid sd = vg.gradient;
      for (std::size_t k = 0; k < sd.nodes(); ++k) {
        const double scale = 1.0 / (2.0 * vp->lambda1 * sd.dt() * trapezoid_weight(k, sd.intervals()));
        for (double& v : sd.node(k)) v *= scale;
      }
      ok = line_search(sd, next, cost);
    }
    if (!ok) {
      throw Error(ErrorKind::NoDescentProgress,
                  "line search reached its floor at iteration " + std::to_string(it) +
                      " (grad norm " + std::to_string(gn) + ")");
    }
    theta = std::move(next);
    vg = value_and_gradient(vp, theta, data, cfg.sim, seed);
    res.history.push_back(vg.cost);
    res.iterations = it + 1;
  }

  res.theta_star = theta;
  const H1Norms nrm = control_h1_norms(theta);
  res.energy_lower = std::min(vp->lambda1, vp->lambda2) * (nrm.l2_sq + nrm.h1_semi_sq);
  const double J = res.history.back().total;
  const double slack = 1e-12 * std::max(1.0, std::abs(J));
  res.energy_bound_holds = res.energy_lower <= J + slack && J <= res.cost_at_zero.total + slack;
  return res;
}

}  // namespace mfres
