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

// Euler-Maruyama for the N-particle mean-field system, its M-path
// interacting approximation of the limiting SDE, and the augmented
// (X1, X2, X3) system used to evaluate first-order conditions in the
// scalar g(theta_1 x + theta_2) setting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "mfres/control.hpp"
#include "mfres/error.hpp"
#include "mfres/law.hpp"
#include "mfres/model.hpp"
#include "mfres/parallel.hpp"
#include "mfres/rng.hpp"

namespace mfres {

/// N discretized trajectories of (X^i, Z^i). Immutable once simulated.
struct ParticleEnsemble {
  Dims dims;
  double T = 1.0;
  std::size_t n_steps = 0;
  std::size_t n_particles = 0;
  std::uint64_t seed = 0;
  std::vector<TrainingSample> samples;
  std::vector<TypeVector> types;
  std::vector<std::uint64_t> stream_ids;  // Brownian stream of particle i
  std::vector<double> X;                  // [N][n_steps + 1][d]
  std::vector<double> Z;                  // [N][n_steps + 1][q]
  std::vector<double> eta;                // (1/N) sum_j rho(X^j(t_k)), per step

  double dt() const noexcept { return T / static_cast<double>(n_steps); }
  double time(std::size_t k) const noexcept {
    return T * static_cast<double>(k) / static_cast<double>(n_steps);
  }

  std::span<const double> x(std::size_t i, std::size_t k) const {
    return {X.data() + (i * (n_steps + 1) + k) * dims.d, dims.d};
  }
  std::span<const double> z(std::size_t i, std::size_t k) const {
    return {Z.data() + (i * (n_steps + 1) + k) * dims.q, dims.q};
  }
  std::span<double> x_mut(std::size_t i, std::size_t k) {
    return {X.data() + (i * (n_steps + 1) + k) * dims.d, dims.d};
  }
  std::span<double> z_mut(std::size_t i, std::size_t k) {
    return {Z.data() + (i * (n_steps + 1) + k) * dims.q, dims.q};
  }
};

/// M paths of the augmented system
///   dX1 = d_x f(t, theta, X3) dt
///   dX2 = exp(-X1) (X3 - Y(0)) dt
///   dX3 = f(t, theta, X3) dt + eps dW
/// plus X4 with dX4 = exp(+X1) (X3 - Y(0)) dt, which carries the running-cost
/// adjoint weight exp(X1(s) - X1(t)) used by estimate_G.
struct AugmentedEnsemble {
  double T = 1.0;
  std::size_t n_steps = 0;
  std::size_t n_paths = 0;
  std::vector<double> X1, X2, X3, X4;  // [M][n_steps + 1]
  std::vector<double> Y;               // [M]

  double dt() const noexcept { return T / static_cast<double>(n_steps); }
  std::size_t at(std::size_t i, std::size_t k) const noexcept { return i * (n_steps + 1) + k; }
};

namespace detail {

inline void check_sim_grid(const ValidatedParams& vp, const ControlGrid& theta, std::size_t n_steps) {
  require(n_steps >= 1, ErrorKind::GridMismatch, "need at least one simulation step");
  require(theta.dim() == vp.dims().m, ErrorKind::GridMismatch, "control dimension differs from m");
  require(std::abs(theta.horizon() - vp->T) <= 1e-12 * vp->T, ErrorKind::GridMismatch,
          "control horizon differs from T");
  const std::size_t M = theta.intervals();
  require(M >= 1 && (M % n_steps == 0 || n_steps % M == 0), ErrorKind::GridMismatch,
          "control grid (" + std::to_string(M) + " intervals) and simulation grid (" +
              std::to_string(n_steps) + " steps) are not nested");
}

/// theta(t_k) for simulation step k.
inline void theta_at_step(const ControlGrid& theta, std::size_t k, std::size_t n_steps,
                          std::span<double> out) {
  const auto [node, w] = theta.locate_step(k, n_steps);
  for (std::size_t j = 0; j < theta.dim(); ++j) {
    out[j] = w == 0.0 ? theta(node, j) : (1.0 - w) * theta(node, j) + w * theta(node + 1, j);
  }
}

/// Adds out += M v for an r x c matrix M.
inline void add_matvec(const Matrix& M, std::span<const double> v, std::span<double> out) {
  for (std::size_t r = 0; r < M.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < M.cols; ++c) s += M(r, c) * v[c];
    out[r] += s;
  }
}

inline bool is_example52(const ValidatedParams& vp) {
  const Dims& dm = vp.dims();
  const auto& a = vp->activation;
  return dm.d == 1 && dm.m == 2 && dm.q == 0 && a.wiring == Wiring::Diagonal && a.w_eta == 0.0;
}

}  // namespace detail

/// Euler-Maruyama for the coupled system. The same increment dW^i drives X^i
/// and Z^i. `stream_ids` (default 0..N-1) keys each particle's noise stream.
inline ParticleEnsemble simulate_particles(const ValidatedParams& vp, const ControlGrid& theta,
                                           const std::vector<TrainingSample>& samples,
                                           const std::vector<TypeVector>& types,
                                           std::size_t n_steps, std::uint64_t seed,
                                           const ExecPolicy& exec = {},
                                           std::vector<std::uint64_t> stream_ids = {}) {
  detail::check_sim_grid(vp, theta, n_steps);
  const Dims& dm = vp.dims();
  const std::size_t N = samples.size();
  require(N >= 1, ErrorKind::DimensionMismatch, "need at least one particle");
  require(types.size() == N, ErrorKind::DimensionMismatch, "one type vector per sample required");
  if (stream_ids.empty()) {
    stream_ids.resize(N);
    std::iota(stream_ids.begin(), stream_ids.end(), std::uint64_t{0});
  }
  require(stream_ids.size() == N, ErrorKind::DimensionMismatch, "one stream id per sample required");
  for (const auto& s : samples) validate_sample(vp, s);
  for (const auto& t : types) validate_type(vp, t);

  ParticleEnsemble ens;
  ens.dims = dm;
  ens.T = vp->T;
  ens.n_steps = n_steps;
  ens.n_particles = N;
  ens.seed = seed;
  ens.samples = samples;
  ens.types = types;
  ens.stream_ids = std::move(stream_ids);
  ens.X.assign(N * (n_steps + 1) * dm.d, 0.0);
  ens.Z.assign(N * (n_steps + 1) * dm.q, 0.0);
  ens.eta.assign(n_steps + 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    std::copy(samples[i].x0.begin(), samples[i].x0.end(), ens.x_mut(i, 0).begin());
    std::copy(samples[i].z0.begin(), samples[i].z0.end(), ens.z_mut(i, 0).begin());
  }

  const double dt = ens.dt();
  std::vector<double> theta_k(dm.m);
  auto mean_rho = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) s += vp.rho(ens.x(j, k));
    return s / static_cast<double>(N);
  };

  for (std::size_t k = 0; k < n_steps; ++k) {
    detail::theta_at_step(theta, k, n_steps, theta_k);
    const double eta = mean_rho(k);
    ens.eta[k] = eta;
    parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
      std::vector<double> f(dm.d), g(dm.q), dw(dm.p);
      for (std::size_t i = begin; i < end; ++i) {
        const auto x = ens.x(i, k);
        const auto z = ens.z(i, k);
        vp.drift(theta_k, z, x, eta, f);
        vp.exogenous_drift(types[i].gamma, z, g);
        brownian_increments(seed, ens.stream_ids[i], static_cast<std::uint32_t>(k), dt, dw);
        auto xn = ens.x_mut(i, k + 1);
        auto zn = ens.z_mut(i, k + 1);
        for (std::size_t r = 0; r < dm.d; ++r) xn[r] = x[r] + dt * f[r];
        for (std::size_t r = 0; r < dm.q; ++r) zn[r] = z[r] + dt * g[r];
        detail::add_matvec(types[i].epsilon, dw, xn);
        detail::add_matvec(types[i].sigma, dw, zn);
      }
    });
  }
  ens.eta[n_steps] = mean_rho(n_steps);
  return ens;
}

/// The limiting SDE with the law-dependent term E[rho(X(t))] replaced by the
/// simultaneous empirical mean over the M simulated paths. With explicit
/// draws this is the particle simulation of those draws.
inline ParticleEnsemble simulate_limit_sde(const ValidatedParams& vp, const ControlGrid& theta,
                                           const std::vector<TrainingSample>& init_draws,
                                           const std::vector<TypeVector>& types,
                                           std::size_t n_steps, std::uint64_t seed,
                                           const ExecPolicy& exec = {}) {
  return simulate_particles(vp, theta, init_draws, types, n_steps, seed, exec);
}

/// Seeds used to draw the initial data and the noise of limit-SDE paths.
/// Initial draws and the Brownian paths come from separate streams.
struct LimitSeeds {
  std::uint64_t init, types, noise;
  explicit LimitSeeds(std::uint64_t seed)
      : init(derive_seed(seed, "limit-init")),
        types(derive_seed(seed, "limit-types")),
        noise(derive_seed(seed, "limit-noise")) {}
};

inline ParticleEnsemble simulate_limit_sde(const ValidatedParams& vp, const ControlGrid& theta,
                                           const SampleLaw& law, std::size_t M,
                                           std::size_t n_steps, std::uint64_t seed,
                                           const ExecPolicy& exec = {}) {
  const LimitSeeds seeds(seed);
  const auto draws = draw_samples(vp, law, M, seeds.init);
  const auto types = draw_types(vp, law, M, seeds.types);
  return simulate_particles(vp, theta, draws, types, n_steps, seeds.noise, exec);
}

inline AugmentedEnsemble simulate_augmented(const ValidatedParams& vp, const ControlGrid& theta,
                                            const std::vector<TrainingSample>& init_draws,
                                            const std::vector<TypeVector>& types,
                                            std::size_t n_steps, std::uint64_t seed,
                                            const ExecPolicy& exec = {}) {
  require(detail::is_example52(vp), ErrorKind::ConfigNotExample52,
          "augmented system needs d=1, m=2, q=0, diagonal wiring and no batch coupling");
  detail::check_sim_grid(vp, theta, n_steps);
  const std::size_t M = init_draws.size();
  require(M >= 1 && types.size() == M, ErrorKind::DimensionMismatch,
          "need one type vector per initial draw");
  for (const auto& s : init_draws) validate_sample(vp, s);
  for (const auto& t : types) validate_type(vp, t);

  AugmentedEnsemble aug;
  aug.T = vp->T;
  aug.n_steps = n_steps;
  aug.n_paths = M;
  const std::size_t len = M * (n_steps + 1);
  aug.X1.assign(len, 0.0);
  aug.X2.assign(len, 0.0);
  aug.X3.assign(len, 0.0);
  aug.X4.assign(len, 0.0);
  aug.Y.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    aug.X3[aug.at(i, 0)] = init_draws[i].x0[0];
    aug.Y[i] = init_draws[i].y0[0];
  }

  const double dt = aug.dt();
  const std::size_t p = vp.dims().p;
  std::vector<double> theta_k(2);
  for (std::size_t k = 0; k < n_steps; ++k) {
    detail::theta_at_step(theta, k, n_steps, theta_k);
    parallel_for(M, exec, [&](std::size_t begin, std::size_t end) {
      DriftJacobian J(vp.dims());
      std::vector<double> dw(p);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t a = aug.at(i, k);
        const double x3 = aug.X3[a];
        const double x1 = aug.X1[a];
        vp.drift_jacobian(theta_k, {}, std::span<const double>(&x3, 1), 0.0, J);
        brownian_increments(seed, i, static_cast<std::uint32_t>(k), dt, dw);
        double noise = 0.0;
        for (std::size_t j = 0; j < p; ++j) noise += types[i].epsilon(0, j) * dw[j];
        const double gap = x3 - aug.Y[i];
        aug.X1[a + 1] = x1 + dt * J.dx(0, 0);
        aug.X2[a + 1] = aug.X2[a] + dt * std::exp(-x1) * gap;
        aug.X4[a + 1] = aug.X4[a] + dt * std::exp(x1) * gap;
        aug.X3[a + 1] = x3 + dt * J.f[0] + noise;
      }
    });
  }
  return aug;
}

inline AugmentedEnsemble simulate_augmented(const ValidatedParams& vp, const ControlGrid& theta,
                                            const SampleLaw& law, std::size_t M,
                                            std::size_t n_steps, std::uint64_t seed,
                                            const ExecPolicy& exec = {}) {
  require(detail::is_example52(vp), ErrorKind::ConfigNotExample52,
          "augmented system needs d=1, m=2, q=0, diagonal wiring and no batch coupling");
  const LimitSeeds seeds(seed);
  const auto draws = draw_samples(vp, law, M, seeds.init);
  const auto types = draw_types(vp, law, M, seeds.types);
  return simulate_augmented(vp, theta, draws, types, n_steps, seeds.noise, exec);
}

/// Columnar dump: t, particle_id, x_1..x_d, z_1..z_q.
inline void write_trajectories_csv(std::ostream& os, const ParticleEnsemble& ens) {
  os << "t,particle_id";
  for (std::size_t r = 0; r < ens.dims.d; ++r) os << ",x_" << r + 1;
  for (std::size_t r = 0; r < ens.dims.q; ++r) os << ",z_" << r + 1;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ens.n_particles; ++i) {
    for (std::size_t k = 0; k <= ens.n_steps; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", ens.time(k));
      os << buf << ',' << ens.stream_ids[i];
      for (double v : ens.x(i, k)) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
      }
      for (double v : ens.z(i, k)) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
      }
      os << '\n';
    }
  }
}

}  // namespace mfres
