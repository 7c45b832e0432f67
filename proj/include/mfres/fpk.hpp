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

// Limiting control problem in the scalar setting f = g(theta_1 x + theta_2):
// Monte Carlo estimate of G^theta from the augmented system, the Neumann
// problem lambda1 theta - lambda2 theta'' = G, and a damped fixed point
// between the two.
//
// With p(t) = alpha e^{X1(T)-X1(t)} (X3(T) - Y) + beta e^{-X1(t)} (X4(T) - X4(t))
// the adjoint of the state equation, the first-order condition reads
//   lambda1 theta - lambda2 theta'' = G(t) = -E[ p(t) grad_theta f(t, theta(t), X3(t)) ].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mfres/control.hpp"
#include "mfres/error.hpp"
#include "mfres/law.hpp"
#include "mfres/model.hpp"
#include "mfres/parallel.hpp"
#include "mfres/sde.hpp"
#include "mfres/tridiag.hpp"

namespace mfres {

/// Per-node m-vectors on a control grid, with Monte Carlo standard errors.
struct GridFunction {
  ControlGrid values;
  ControlGrid std_errors;

  double max_std_error() const { return std_errors.sup_norm(); }
};

/// G^theta at the control nodes from an already simulated augmented ensemble.
/// The simulation grid must refine the control grid.
inline GridFunction estimate_G(const AugmentedEnsemble& aug, const ControlGrid& theta,
                               const ValidatedParams& vp, const ExecPolicy& exec = {}) {
  require(detail::is_example52(vp), ErrorKind::ConfigNotExample52,
          "G is defined for d=1, m=2, q=0, diagonal wiring and no batch coupling");
  const std::size_t n = aug.n_steps;
  const std::size_t nodes = theta.nodes();
  require(n % theta.intervals() == 0, ErrorKind::GridMismatch,
          "simulation steps must be a multiple of the control intervals");
  const std::size_t stride = n / theta.intervals();
  const std::size_t M = aug.n_paths;
  const std::size_t m = theta.dim();

  // Per-path integrands, [M][nodes][m].
  std::vector<double> vals(M * nodes * m);
  parallel_for(M, exec, [&](std::size_t begin, std::size_t end) {
    DriftJacobian J(vp.dims());
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t last = aug.at(i, n);
      const double x1T = aug.X1[last];
      const double terminal_gap = aug.X3[last] - aug.Y[i];
      for (std::size_t k = 0; k < nodes; ++k) {
        const std::size_t a = aug.at(i, k * stride);
        const double x3 = aug.X3[a];
        vp.drift_jacobian(theta.node(k), {}, std::span<const double>(&x3, 1), 0.0, J);
        const double adj = vp->alpha * std::exp(x1T - aug.X1[a]) * terminal_gap +
                           vp->beta * std::exp(-aug.X1[a]) * (aug.X4[last] - aug.X4[a]);
        for (std::size_t j = 0; j < m; ++j) vals[(i * nodes + k) * m + j] = -adj * J.dtheta(0, j);
      }
    }
  });

  GridFunction G{ControlGrid(theta.horizon(), theta.intervals(), m),
                 ControlGrid(theta.horizon(), theta.intervals(), m)};
  const double Md = static_cast<double>(M);
  for (std::size_t k = 0; k < nodes; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < M; ++i) s += vals[(i * nodes + k) * m + j];
      const double mean = s / Md;
      double ss = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        const double e = vals[(i * nodes + k) * m + j] - mean;
        ss += e * e;
      }
      G.values(k, j) = mean;
      G.std_errors(k, j) = M > 1 ? std::sqrt(ss / (Md - 1.0) / Md) : 0.0;
    }
  }
  return G;
}

/// G^theta from M fresh augmented paths drawn from `law`.
inline GridFunction estimate_G(const ControlGrid& theta, const ValidatedParams& vp,
                               const SampleLaw& law, std::size_t M, std::size_t n_steps,
                               std::uint64_t seed, const ExecPolicy& exec = {}) {
  require(detail::is_example52(vp), ErrorKind::ConfigNotExample52,
          "G is defined for d=1, m=2, q=0, diagonal wiring and no batch coupling");
  const AugmentedEnsemble aug = simulate_augmented(vp, theta, law, M, n_steps, seed, exec);
  return estimate_G(aug, theta, vp, exec);
}

/// Solves lambda1 theta - lambda2 theta'' = G per component on the grid of G,
/// central differences with mirrored ghost nodes at both ends.
inline ControlGrid solve_neumann_bvp(const GridFunction& G, double lambda1, double lambda2) {
  require(lambda1 > 0.0 && lambda2 > 0.0, ErrorKind::NonPositiveWeight,
          "lambda1 and lambda2 must be > 0");
  const ControlGrid& g = G.values;
  require(g.nodes() >= 2, ErrorKind::GridTooSmall, "BVP grid needs at least 2 points");
  const Tridiagonal op = neumann_operator(g.nodes(), g.dt(), lambda1, lambda2);
  ControlGrid theta(g.horizon(), g.intervals(), g.dim());
  std::vector<double> rhs(g.nodes());
  for (std::size_t j = 0; j < g.dim(); ++j) {
    for (std::size_t k = 0; k < g.nodes(); ++k) rhs[k] = g(k, j);
    const auto sol = solve_tridiagonal(op, rhs);
    for (std::size_t k = 0; k < g.nodes(); ++k) theta(k, j) = sol[k];
  }
  return theta;
}

/// Overload for a bare right-hand side.
inline ControlGrid solve_neumann_bvp(const ControlGrid& rhs, double lambda1, double lambda2) {
  return solve_neumann_bvp(GridFunction{rhs, ControlGrid(rhs.horizon(), rhs.intervals(), rhs.dim())},
                           lambda1, lambda2);
}

/// One-sided second-order derivative estimates at both ends, max over components.
struct BoundaryDerivatives {
  double at_zero = 0.0;
  double at_T = 0.0;
};

inline BoundaryDerivatives boundary_derivatives(const ControlGrid& theta) {
  require(theta.nodes() >= 3, ErrorKind::GridTooSmall, "one-sided derivatives need 3 nodes");
  const std::size_t n = theta.intervals();
  const double h = theta.dt();
  BoundaryDerivatives b;
  for (std::size_t j = 0; j < theta.dim(); ++j) {
    b.at_zero = std::max(b.at_zero, std::abs(-3.0 * theta(0, j) + 4.0 * theta(1, j) - theta(2, j)) / (2.0 * h));
    b.at_T = std::max(b.at_T, std::abs(3.0 * theta(n, j) - 4.0 * theta(n - 1, j) + theta(n - 2, j)) / (2.0 * h));
  }
  return b;
}

enum class SeedPolicy { Fixed, Refreshed };

struct FixedPointConfig {
  double damping = 0.5;     // eta in (0, 1]
  std::size_t mc_paths = 20000;
  std::size_t n_steps = 64;
  std::size_t intervals = 32;
  int outer_iters = 100;
  double outer_tol = 1e-6;  // sup-norm change of theta
  SeedPolicy seed_policy = SeedPolicy::Fixed;
  std::uint64_t seed = 0;
  ExecPolicy exec;
};

struct FixedPointResult {
  ControlGrid theta_star;
  std::vector<double> trace;  // sup-norm change per iteration
  GridFunction G;             // at the last evaluated iterate
  int iterations = 0;
  bool projection_active = false;
};

inline std::uint64_t fixed_point_seed(const FixedPointConfig& cfg, int iter) {
  return cfg.seed_policy == SeedPolicy::Fixed
             ? derive_seed(cfg.seed, "fixed-point")
             : derive_seed(cfg.seed, "fixed-point", static_cast<std::uint64_t>(iter));
}

/// theta_{k+1} = (1 - eta) theta_k + eta Proj[ BVP(G(theta_k)) ], from theta_0 = 0 unless given.
inline FixedPointResult fixed_point_solve(const ValidatedParams& vp, const SampleLaw& law,
                                          const FixedPointConfig& cfg,
                                          std::optional<ControlGrid> init = std::nullopt) {
  require(cfg.damping > 0.0 && cfg.damping <= 1.0, ErrorKind::ConfigInvalid,
          "damping must lie in (0, 1]");
  require(cfg.mc_paths >= 2, ErrorKind::ConfigInvalid, "need at least 2 Monte Carlo paths");
  require(cfg.outer_iters >= 1 && cfg.outer_tol > 0.0, ErrorKind::ConfigInvalid,
          "outer_iters must be >= 1 and outer_tol > 0");
  require(detail::is_example52(vp), ErrorKind::ConfigNotExample52,
          "fixed point is defined for d=1, m=2, q=0, diagonal wiring and no batch coupling");
  ControlGrid theta = init ? *init : ControlGrid(vp->T, cfg.intervals, vp.dims().m);
  theta.set_bound(vp->K_theta);

  FixedPointResult res;
  for (int it = 0; it < cfg.outer_iters; ++it) {
    res.G = estimate_G(theta, vp, law, cfg.mc_paths, cfg.n_steps, fixed_point_seed(cfg, it), cfg.exec);
    ControlGrid target = solve_neumann_bvp(res.G, vp->lambda1, vp->lambda2);
    target.set_bound(vp->K_theta);
    if (!target.in_box()) res.projection_active = true;
    target = project_to_box(target);
    ControlGrid next = theta;
    for (std::size_t i = 0; i < next.values().size(); ++i) {
      next.values()[i] = (1.0 - cfg.damping) * theta.values()[i] + cfg.damping * target.values()[i];
    }
    const double change = next.sup_distance(theta);
    res.trace.push_back(change);
    theta = std::move(next);
    res.iterations = it + 1;
    if (change < cfg.outer_tol) {
      res.theta_star = theta;
      return res;
    }
  }
  throw NoConvergenceError("no convergence after " + std::to_string(cfg.outer_iters) +
                               " iterations (last change " + std::to_string(res.trace.back()) + ")",
                           res.trace);
}

struct FirstOrderResidual {
  double value = 0.0;     // interior + boundary
  double interior = 0.0;  // sup over interior nodes of |lambda1 theta - lambda2 D2 theta - G|
  double boundary = 0.0;  // |theta'(0)| + |theta'(T)|, one-sided second order
  double max_std_error = 0.0;
};

inline FirstOrderResidual residual_first_order(const ControlGrid& theta, const GridFunction& G,
                                               const ValidatedParams& vp) {
  require(G.values.same_grid(theta), ErrorKind::GridMismatch, "G and theta live on different grids");
  const std::size_t n = theta.intervals();
  const double h2 = theta.dt() * theta.dt();
  FirstOrderResidual r;
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t j = 0; j < theta.dim(); ++j) {
      const double d2 = (theta(k - 1, j) - 2.0 * theta(k, j) + theta(k + 1, j)) / h2;
      r.interior = std::max(r.interior, std::abs(vp->lambda1 * theta(k, j) - vp->lambda2 * d2 - G.values(k, j)));
    }
  }
  const BoundaryDerivatives b = boundary_derivatives(theta);
  r.boundary = b.at_zero + b.at_T;
  r.value = r.interior + r.boundary;
  r.max_std_error = G.max_std_error();
  return r;
}

/// Residual of the first-order condition with G re-estimated at theta.
inline FirstOrderResidual residual_first_order(const ControlGrid& theta, const ValidatedParams& vp,
                                               const SampleLaw& law, std::size_t M,
                                               std::size_t n_steps, std::uint64_t seed,
                                               const ExecPolicy& exec = {}) {
  return residual_first_order(theta, estimate_G(theta, vp, law, M, n_steps, seed, exec), vp);
}

}  // namespace mfres
