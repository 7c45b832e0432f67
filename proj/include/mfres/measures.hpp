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

// Empirical measure paths, Wasserstein-2 distances and the weak-form FPK
// residual
//   R(t) = <mu(t), phi(t)> - <mu(0), phi(0)> - int_0^t <mu(s), A^{s, theta(s), <mu(s), rho>} phi(s)> ds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "mfres/control.hpp"
#include "mfres/error.hpp"
#include "mfres/model.hpp"
#include "mfres/parallel.hpp"
#include "mfres/sde.hpp"

namespace mfres {

/// Atom (xi, y, z, x) of an empirical measure.
struct AtomView {
  const TypeVector& xi;
  std::span<const double> y;
  std::span<const double> z;
  std::span<const double> x;
};

/// mu^N(t_k) = (1/N) sum_i delta_{(xi^i, y^i, Z^i(t_k), X^i(t_k))} on the simulation grid.
class EmpiricalMeasurePath {
 public:
  explicit EmpiricalMeasurePath(const ParticleEnsemble& ens)
      : dims_(ens.dims), T_(ens.T), n_steps_(ens.n_steps), n_atoms_(ens.n_particles),
        types_(ens.types), X_(ens.X), Z_(ens.Z) {
    labels_.reserve(n_atoms_ * dims_.d);
    for (const auto& s : ens.samples) labels_.insert(labels_.end(), s.y0.begin(), s.y0.end());
  }

  const Dims& dims() const noexcept { return dims_; }
  double horizon() const noexcept { return T_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t n_atoms() const noexcept { return n_atoms_; }
  double time(std::size_t k) const noexcept {
    return T_ * static_cast<double>(k) / static_cast<double>(n_steps_);
  }
  double weight() const noexcept { return 1.0 / static_cast<double>(n_atoms_); }

  AtomView atom(std::size_t k, std::size_t i) const {
    const std::size_t row = i * (n_steps_ + 1) + k;
    return {types_[i], {labels_.data() + i * dims_.d, dims_.d},
            {Z_.data() + row * dims_.q, dims_.q}, {X_.data() + row * dims_.d, dims_.d}};
  }

  /// <mu(t_k), g> for g(atom) -> double, summed in atom order.
  template <typename Fn>
  double integrate(std::size_t k, Fn&& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_atoms_; ++i) s += g(atom(k, i));
    return s * weight();
  }

 private:
  Dims dims_;
  double T_;
  std::size_t n_steps_;
  std::size_t n_atoms_;
  std::vector<TypeVector> types_;
  std::vector<double> labels_;  // [N][d]
  std::vector<double> X_;       // [N][n_steps + 1][d]
  std::vector<double> Z_;       // [N][n_steps + 1][q]
};

inline EmpiricalMeasurePath empirical_path(const ParticleEnsemble& ens) {
  return EmpiricalMeasurePath(ens);
}

// ---------------------------------------------------------------------------
// Wasserstein-2

/// Weighted atoms on the real line.
struct WeightedSamples {
  std::vector<double> points;
  std::vector<double> weights;

  static WeightedSamples uniform(std::vector<double> pts) {
    WeightedSamples s;
    s.weights.assign(pts.size(), pts.empty() ? 0.0 : 1.0 / static_cast<double>(pts.size()));
    s.points = std::move(pts);
    return s;
  }
};

namespace detail {

inline void check_mass(const WeightedSamples& s) {
  require(s.points.size() == s.weights.size() && !s.points.empty(), ErrorKind::MassMismatch,
          "weighted samples need one weight per point");
  double mass = 0.0;
  for (double w : s.weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorKind::MassMismatch, "weights must be non-negative");
    mass += w;
  }
  require(std::abs(mass - 1.0) <= 1e-9, ErrorKind::MassMismatch,
          "total mass " + std::to_string(mass) + " is not 1");
}

inline std::vector<std::size_t> sorted_order(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

}  // namespace detail

/// W2 between two probability measures on R via the monotone (quantile) coupling.
inline double wasserstein2_1d(const WeightedSamples& a, const WeightedSamples& b) {
  detail::check_mass(a);
  detail::check_mass(b);
  const auto ia = detail::sorted_order(a.points);
  const auto ib = detail::sorted_order(b.points);
  std::size_t p = 0, q = 0;
  double ra = a.weights[ia[0]], rb = b.weights[ib[0]];
  double cost = 0.0;
  // Equal-count uniform clouds pair index by index, which keeps the sum in
  // the same order as an explicit assignment.
  const bool matched = a.points.size() == b.points.size() && a.weights == b.weights &&
                       std::all_of(a.weights.begin(), a.weights.end(),
                                   [&](double w) { return w == a.weights[0]; });
  if (matched) {
    double s = 0.0;
    for (std::size_t i = 0; i < ia.size(); ++i) {
      const double e = a.points[ia[i]] - b.points[ib[i]];
      s += e * e;
    }
    return std::sqrt(s / static_cast<double>(ia.size()));
  }
  while (p < ia.size() && q < ib.size()) {
    const double mass = std::min(ra, rb);
    const double e = a.points[ia[p]] - b.points[ib[q]];
    cost += mass * e * e;
    ra -= mass;
    rb -= mass;
    if (ra <= 1e-15 && ++p < ia.size()) ra = a.weights[ia[p]];
    if (rb <= 1e-15 && ++q < ib.size()) rb = b.weights[ib[q]];
  }
  return std::sqrt(std::max(0.0, cost));
}

inline double wasserstein2_1d(const std::vector<double>& a, const std::vector<double>& b) {
  return wasserstein2_1d(WeightedSamples::uniform(a), WeightedSamples::uniform(b));
}

/// Exact W2 between two equal-weight clouds of at most 8 points in R^k,
/// by enumerating every assignment.
inline double wasserstein2_exact_small(const std::vector<std::vector<double>>& a,
                                       const std::vector<std::vector<double>>& b) {
  require(a.size() == b.size() && !a.empty() && a.size() <= 8, ErrorKind::SizeMismatch,
          "exact W2 needs two clouds of equal size between 1 and 8");
  const std::size_t n = a.size();
  const std::size_t k = a[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    require(a[i].size() == k && b[i].size() == k, ErrorKind::DimensionMismatch,
            "all points must share one dimension");
  }
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        const double e = a[i][r] - b[j][r];
        s += e * e;
      }
      cost[i * n + j] = s;
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Test functions: polynomial(s, x, z) times a radial C-infinity cutoff in (x, z).

/// coef * s^ps * prod x_r^px[r] * prod z_r^pz[r].
struct Monomial {
  double coef = 1.0;
  int ps = 0;
  std::vector<int> px;
  std::vector<int> pz;

  int degree() const {
    return ps + std::accumulate(px.begin(), px.end(), 0) + std::accumulate(pz.begin(), pz.end(), 0);
  }
};

/// Value and derivatives of a test function at one point. Spatial variables
/// are ordered v = (x_1..x_d, z_1..z_q).
struct TestFunctionEval {
  std::size_t d = 0, q = 0;
  double value = 0.0;
  double ds = 0.0;
  std::vector<double> grad;  // d + q
  std::vector<double> hess;  // (d + q)^2, row-major

  double grad_x(std::size_t r) const { return grad[r]; }
  double grad_z(std::size_t r) const { return grad[d + r]; }
  double hess_xx(std::size_t a, std::size_t b) const { return hess[a * (d + q) + b]; }
  double hess_zz(std::size_t a, std::size_t b) const { return hess[(d + a) * (d + q) + d + b]; }
  /// d^2 phi / dz_a dx_b.
  double hess_zx(std::size_t a, std::size_t b) const { return hess[(d + a) * (d + q) + b]; }
};

namespace detail {

inline double bump_psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

/// Smooth step h(t) = psi(t) / (psi(t) + psi(1 - t)) and its first two derivatives.
inline void smooth_step(double t, double& h, double& h1, double& h2) {
  if (t <= 0.0) {
    h = h1 = h2 = 0.0;
    return;
  }
  if (t >= 1.0) {
    h = 1.0;
    h1 = h2 = 0.0;
    return;
  }
  const double s = 1.0 - t;
  const double a = bump_psi(t), b = bump_psi(s);
  const double a1 = a / (t * t), a2 = a * (1.0 / (t * t * t * t) - 2.0 / (t * t * t));
  // b(t) = psi(1 - t): chain rule flips the sign of odd derivatives.
  const double b1 = -b / (s * s), b2 = b * (1.0 / (s * s * s * s) - 2.0 / (s * s * s));
  const double S = a + b;
  const double N = a1 * b - a * b1;
  const double N1 = a2 * b - a * b2;
  const double S1 = a1 + b1;
  h = a / S;
  h1 = N / (S * S);
  h2 = N1 / (S * S) - 2.0 * N * S1 / (S * S * S);
}

inline double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace detail

/// phi(s, x, z) = P(s, x, z) * B(|(x, z)|), B = 1 on the plateau |v| <= r_in
/// and 0 outside |v| >= r_out.
class TestFunction {
 public:
  TestFunction(std::size_t d, std::size_t q, std::vector<Monomial> terms, double r_in, double r_out)
      : d_(d), q_(q), terms_(std::move(terms)), r_in_(r_in), r_out_(r_out) {
    require(r_in > 0.0 && r_out > r_in, ErrorKind::ConfigInvalid, "cutoff needs 0 < r_in < r_out");
    for (auto& t : terms_) {
      if (t.px.empty()) t.px.assign(d, 0);
      if (t.pz.empty()) t.pz.assign(q, 0);
      require(t.px.size() == d && t.pz.size() == q, ErrorKind::DimensionMismatch,
              "monomial exponents do not match (d, q)");
      require(t.degree() <= 4, ErrorKind::ConfigInvalid, "test polynomials have degree <= 4");
    }
  }

  /// The cutoff alone (P = 1).
  static TestFunction cutoff(std::size_t d, std::size_t q, double r_in, double r_out) {
    return TestFunction(d, q, {Monomial{1.0, 0, {}, {}}}, r_in, r_out);
  }

  std::size_t d() const noexcept { return d_; }
  std::size_t q() const noexcept { return q_; }
  double plateau_radius() const noexcept { return r_in_; }
  double support_radius() const noexcept { return r_out_; }
  const std::vector<Monomial>& terms() const noexcept { return terms_; }

  TestFunctionEval evaluate(double s, std::span<const double> x, std::span<const double> z) const {
    const std::size_t n = d_ + q_;
    std::vector<double> v(n);
    std::copy(x.begin(), x.end(), v.begin());
    std::copy(z.begin(), z.end(), v.begin() + static_cast<std::ptrdiff_t>(d_));

    // Polynomial part.
    double P = 0.0, Ps = 0.0;
    std::vector<double> gP(n, 0.0), hP(n * n, 0.0);
    std::vector<int> pw(n);
    for (const auto& t : terms_) {
      std::copy(t.px.begin(), t.px.end(), pw.begin());
      std::copy(t.pz.begin(), t.pz.end(), pw.begin() + static_cast<std::ptrdiff_t>(d_));
      auto prod_except = [&](std::size_t a, int da, std::size_t b, int db) {
        // prod_r d^{k_r} v_r^{pw_r}, derivative orders da on a, db on b (a may equal b).
        double r = 1.0;
        for (std::size_t c = 0; c < n; ++c) {
          int order = (c == a ? da : 0) + (c == b ? db : 0);
          int k = pw[c];
          if (order > k) return 0.0;
          double f = 1.0;
          for (int o = 0; o < order; ++o) f *= static_cast<double>(k - o);
          r *= f * detail::ipow(v[c], k - order);
        }
        return r;
      };
      const double sp = detail::ipow(s, t.ps);
      const double sd = t.ps > 0 ? t.ps * detail::ipow(s, t.ps - 1) : 0.0;
      const double base = prod_except(0, 0, 0, 0);
      P += t.coef * sp * base;
      Ps += t.coef * sd * base;
      for (std::size_t a = 0; a < n; ++a) {
        gP[a] += t.coef * sp * prod_except(a, 1, a, 0);
        for (std::size_t b = 0; b < n; ++b) hP[a * n + b] += t.coef * sp * prod_except(a, 1, b, 1);
      }
    }

    // Cutoff part B(v) = h((r_out - |v|) / (r_out - r_in)).
    double r2 = 0.0;
    for (double c : v) r2 += c * c;
    const double r = std::sqrt(r2);
    const double width = r_out_ - r_in_;
    double h, h1, h2;
    detail::smooth_step((r_out_ - r) / width, h, h1, h2);
    std::vector<double> gB(n, 0.0), hB(n * n, 0.0);
    if (h1 != 0.0 || h2 != 0.0) {
      for (std::size_t a = 0; a < n; ++a) {
        gB[a] = -h1 / width * v[a] / r;
        for (std::size_t b = 0; b < n; ++b) {
          const double vv = v[a] * v[b] / r2;
          hB[a * n + b] = h2 / (width * width) * vv - h1 / width * ((a == b ? 1.0 : 0.0) - vv) / r;
        }
      }
    }

    TestFunctionEval e;
    e.d = d_;
    e.q = q_;
    e.value = P * h;
    e.ds = Ps * h;
    e.grad.resize(n);
    e.hess.resize(n * n);
    for (std::size_t a = 0; a < n; ++a) {
      e.grad[a] = gP[a] * h + P * gB[a];
      for (std::size_t b = 0; b < n; ++b) {
        e.hess[a * n + b] = hP[a * n + b] * h + gP[a] * gB[b] + gB[a] * gP[b] + P * hB[a * n + b];
      }
    }
    return e;
  }

 private:
  std::size_t d_, q_;
  std::vector<Monomial> terms_;
  double r_in_, r_out_;
};

/// A^{s, theta, eta} phi at the atom e = (xi, y, z, x):
///   d_s phi + f . grad_x phi + phi(gamma, z) . grad_z phi
///   + 1/2 tr[sigma sigma^T D_zz] + tr[eps sigma^T D_zx] + 1/2 tr[eps eps^T D_xx].
/// The mixed term carries coefficient 1: X and Z share the Brownian motion,
/// so d<X_b, Z_a> = (eps sigma^T)_{ba} dt appears twice in Ito's formula.
inline double generator_apply(const TestFunctionEval& ev, const AtomView& e,
                              std::span<const double> theta_val, double eta,
                              const ValidatedParams& vp) {
  const Dims& dm = vp.dims();
  require(ev.d == dm.d && ev.q == dm.q, ErrorKind::DimensionMismatch,
          "test function dimensions differ from params");
  std::vector<double> f(dm.d), g(dm.q);
  vp.drift(theta_val, e.z, e.x, eta, f);
  vp.exogenous_drift(e.xi.gamma, e.z, g);
  double out = ev.ds;
  for (std::size_t r = 0; r < dm.d; ++r) out += f[r] * ev.grad_x(r);
  for (std::size_t r = 0; r < dm.q; ++r) out += g[r] * ev.grad_z(r);
  const Matrix& eps = e.xi.epsilon;
  const Matrix& sig = e.xi.sigma;
  for (std::size_t a = 0; a < dm.d; ++a) {
    for (std::size_t b = 0; b < dm.d; ++b) {
      double c = 0.0;
      for (std::size_t j = 0; j < dm.p; ++j) c += eps(a, j) * eps(b, j);
      out += 0.5 * c * ev.hess_xx(a, b);
    }
  }
  for (std::size_t a = 0; a < dm.q; ++a) {
    for (std::size_t b = 0; b < dm.q; ++b) {
      double c = 0.0;
      for (std::size_t j = 0; j < dm.p; ++j) c += sig(a, j) * sig(b, j);
      out += 0.5 * c * ev.hess_zz(a, b);
    }
  }
  for (std::size_t b = 0; b < dm.d; ++b) {
    for (std::size_t a = 0; a < dm.q; ++a) {
      double c = 0.0;
      for (std::size_t j = 0; j < dm.p; ++j) c += eps(b, j) * sig(a, j);
      out += c * ev.hess_zx(a, b);
    }
  }
  return out;
}

inline double generator_apply(const TestFunction& phi, double s, const AtomView& e,
                              std::span<const double> theta_val, double eta,
                              const ValidatedParams& vp) {
  return generator_apply(phi.evaluate(s, e.x, e.z), e, theta_val, eta, vp);
}

struct FpkResidual {
  double sup = 0.0;
  std::vector<double> path;  // R(t_k), k = 0..n_steps
};

/// Weak-form FPK residual of an empirical path along the control theta.
inline FpkResidual fpk_residual(const EmpiricalMeasurePath& mu, const ControlGrid& theta,
                                const TestFunction& phi, const ValidatedParams& vp,
                                const ExecPolicy& exec = {}) {
  require(mu.dims() == vp.dims(), ErrorKind::DimensionMismatch, "path dimensions differ from params");
  detail::check_sim_grid(vp, theta, mu.n_steps());
  require(std::abs(mu.horizon() - theta.horizon()) <= 1e-12 * theta.horizon(), ErrorKind::GridMismatch,
          "path horizon differs from the control horizon");
  const std::size_t n = mu.n_steps();
  const std::size_t N = mu.n_atoms();
  const Dims& dm = vp.dims();
  std::vector<double> mean_phi(n + 1), mean_gen(n + 1);
  std::vector<double> phi_i(N), gen_i(N);
  std::vector<double> theta_k(dm.m);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = mu.time(k);
    detail::theta_at_step(theta, k, n, theta_k);
    const double eta = mu.integrate(k, [&](const AtomView& a) { return vp.rho(a.x); });
    parallel_for(N, exec, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const AtomView a = mu.atom(k, i);
        const TestFunctionEval ev = phi.evaluate(t, a.x, a.z);
        phi_i[i] = ev.value;
        gen_i[i] = generator_apply(ev, a, theta_k, eta, vp);
      }
    });
    double sp = 0.0, sg = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      sp += phi_i[i];
      sg += gen_i[i];
    }
    mean_phi[k] = sp * mu.weight();
    mean_gen[k] = sg * mu.weight();
  }
  FpkResidual out;
  out.path.assign(n + 1, 0.0);
  const double dt = mu.horizon() / static_cast<double>(n);
  double integral = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    integral += 0.5 * dt * (mean_gen[k - 1] + mean_gen[k]);
    out.path[k] = mean_phi[k] - mean_phi[0] - integral;
    out.sup = std::max(out.sup, std::abs(out.path[k]));
  }
  return out;
}

}  // namespace mfres
