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

// Squared-form costs:
//   L(x, y) = alpha |x - y|^2
//   R(theta, theta'; x, y) = lambda1 |theta|^2 + lambda2 |theta'|^2 + beta |x - y|^2
// Time integrals use the trapezoid rule on the simulation grid.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mfres/control.hpp"
#include "mfres/law.hpp"
#include "mfres/model.hpp"
#include "mfres/sde.hpp"

namespace mfres {

struct CostBreakdown {
  double terminal = 0.0;       // alpha-term
  double running_state = 0.0;  // beta-term
  double control_l2 = 0.0;     // lambda1-term
  double control_h1 = 0.0;     // lambda2-term
  double total = 0.0;

  CostBreakdown& operator+=(const CostBreakdown& o) {
    terminal += o.terminal;
    running_state += o.running_state;
    control_l2 += o.control_l2;
    control_h1 += o.control_h1;
    total += o.total;
    return *this;
  }
  CostBreakdown& operator/=(double s) {
    terminal /= s;
    running_state /= s;
    control_l2 /= s;
    control_h1 /= s;
    total /= s;
    return *this;
  }
};

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double e = x[r] - y[r];
    s += e * e;
  }
  return s;
}

inline double loss(const ValidatedParams& vp, std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::DimensionMismatch, "loss arguments differ in size");
  return vp->alpha * squared_distance(x, y);
}

inline double trapezoid_weight(std::size_t k, std::size_t n_steps) {
  return (k == 0 || k == n_steps) ? 0.5 : 1.0;
}

/// lambda1 ||theta||^2_L2 + lambda2 ||theta'||^2_L2 on the control grid.
inline void add_control_costs(const ValidatedParams& vp, const ControlGrid& theta, CostBreakdown& c) {
  const H1Norms n = control_h1_norms(theta);
  c.control_l2 = vp->lambda1 * n.l2_sq;
  c.control_h1 = vp->lambda2 * n.h1_semi_sq;
  c.total = c.terminal + c.running_state + c.control_l2 + c.control_h1;
}

namespace detail {

inline void check_ensemble(const ParticleEnsemble& ens, const ControlGrid& theta,
                           const ValidatedParams& vp) {
  require(ens.dims == vp.dims(), ErrorKind::EnsembleParamMismatch,
          "ensemble dimensions differ from params");
  require(std::abs(ens.T - vp->T) <= 1e-12 * vp->T, ErrorKind::EnsembleParamMismatch,
          "ensemble horizon differs from params");
  require(theta.dim() == vp.dims().m && std::abs(theta.horizon() - vp->T) <= 1e-12 * vp->T,
          ErrorKind::EnsembleParamMismatch, "control grid does not match params");
}

}  // namespace detail

/// State cost of one particle: alpha |X(T) - y|^2 + beta trapz |X(t) - y|^2.
inline std::pair<double, double> particle_state_cost(const ParticleEnsemble& ens, std::size_t i,
                                                     const ValidatedParams& vp) {
  const auto& y = ens.samples[i].y0;
  const std::size_t n = ens.n_steps;
  double running = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    running += trapezoid_weight(k, n) * squared_distance(ens.x(i, k), y);
  }
  return {vp->alpha * squared_distance(ens.x(i, n), y), vp->beta * ens.dt() * running};
}

/// Pathwise J_N for one noise realization.
inline CostBreakdown evaluate_JN(const ParticleEnsemble& ens, const ControlGrid& theta,
                                 const ValidatedParams& vp) {
  detail::check_ensemble(ens, theta, vp);
  CostBreakdown c;
  const double N = static_cast<double>(ens.n_particles);
  for (std::size_t i = 0; i < ens.n_particles; ++i) {
    const auto [term, run] = particle_state_cost(ens, i, vp);
    c.terminal += term;
    c.running_state += run;
  }
  c.terminal /= N;
  c.running_state /= N;
  add_control_costs(vp, theta, c);
  return c;
}

struct JdEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double state_mean = 0.0;  // Monte Carlo part only
  double control = 0.0;     // deterministic control costs
};

/// Monte Carlo estimate of the limiting objective
///   alpha E|X(T) - Y|^2 + beta int E|X(t) - Y|^2 dt + control costs,
/// from M paths of the limit SDE (interacting approximation when coupled).
inline JdEstimate evaluate_Jd(const ControlGrid& theta, const ValidatedParams& vp,
                              const SampleLaw& law, std::size_t M, std::size_t n_steps,
                              std::uint64_t seed, const ExecPolicy& exec = {}) {
  require(M >= 2, ErrorKind::ConfigInvalid, "evaluate_Jd needs M >= 2 paths");
  const ParticleEnsemble ens = simulate_limit_sde(vp, theta, law, M, n_steps, seed, exec);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> per_path(M);
  for (std::size_t i = 0; i < M; ++i) {
    const auto [term, run] = particle_state_cost(ens, i, vp);
    per_path[i] = term + run;
    sum += per_path[i];
  }
  const double mean = sum / static_cast<double>(M);
  for (double v : per_path) sum_sq += (v - mean) * (v - mean);
  const double var = sum_sq / static_cast<double>(M - 1);

  CostBreakdown ctrl;
  add_control_costs(vp, theta, ctrl);
  JdEstimate out;
  out.state_mean = mean;
  out.control = ctrl.total;
  out.estimate = mean + ctrl.total;
  out.std_error = std::sqrt(var / static_cast<double>(M));
  return out;
}

}  // namespace mfres
