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

// Domain types of the controlled residual-network model
//
//   dX^i = f(t, theta(t), Z^i, X^i, (1/N) sum_j rho(X^j)) dt + eps^i dW^i
//   dZ^i = phi(gamma^i, Z^i) dt + sigma^i dW^i
//
// together with the activation family that realizes f.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfres/error.hpp"

namespace mfres {

/// Dimensions: state d, exogenous input q, noise p, control m, gamma l.
struct Dims {
  std::size_t d = 1;
  std::size_t q = 0;
  std::size_t p = 1;
  std::size_t m = 2;
  std::size_t l = 0;

  bool operator==(const Dims&) const = default;
};

/// Small dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double frobenius_sq() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return s;
  }

  bool operator==(const Matrix&) const = default;
};

/// Per-sample system parameters xi = (epsilon, gamma, sigma).
struct TypeVector {
  Matrix epsilon;              // d x p, diffusion of X
  std::vector<double> gamma;   // l, drift parameter of Z
  Matrix sigma;                // q x p, diffusion of Z

  double norm() const {
    double s = epsilon.frobenius_sq() + sigma.frobenius_sq();
    for (double g : gamma) s += g * g;
    return std::sqrt(s);
  }

  bool operator==(const TypeVector&) const = default;
};

/// One training sample zeta = (X(0), Y(0), Z(0)).
struct TrainingSample {
  std::vector<double> x0;  // d
  std::vector<double> y0;  // d, label
  std::vector<double> z0;  // q
};

enum class ActivationKind { Tanh, Sigmoid, Gaussian, Zero, ConstantDrift, AffineTest };

/// How theta enters the pre-activation u = W x + b + w_z mean(z) + w_eta eta.
///   Diagonal: m = 2d, theta = (W_11, b_1, W_22, b_2, ...); for d = 1 this is
///             f = g(theta_1 x + theta_2).
///   Dense:    m = d*d + d, theta = (W row-major, b).
enum class Wiring { Diagonal, Dense };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::Tanh;
  Wiring wiring = Wiring::Diagonal;
  double w_z = 0.0;
  double w_eta = 0.0;
  std::vector<double> constant;  // ConstantDrift only, size d
};

/// Batch function rho: R^d -> R.
enum class BatchFunction { TanhMean, Mean, Zero };

/// Exogenous drift phi(gamma, z).
enum class ExogenousDrift { NegGammaZ, Zero };

struct ModelParams {
  ActivationSpec activation;
  BatchFunction rho = BatchFunction::TanhMean;
  ExogenousDrift phi = ExogenousDrift::NegGammaZ;
  double alpha = 1.0;
  double beta = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double T = 1.0;
  Dims dims;
  double K = 4.0;        // sample / type bound
  double K_theta = 5.0;  // parameter box half-width
};

inline std::size_t control_dim_for(Wiring wiring, std::size_t d) {
  return wiring == Wiring::Diagonal ? 2 * d : d * d + d;
}

namespace activation {

inline double value(ActivationKind kind, double u) {
  switch (kind) {
    case ActivationKind::Tanh: return std::tanh(u);
    case ActivationKind::Sigmoid: return 1.0 / (1.0 + std::exp(-u));
    case ActivationKind::Gaussian: return std::exp(-u * u);
    case ActivationKind::AffineTest: return u;
    case ActivationKind::Zero:
    case ActivationKind::ConstantDrift: return 0.0;
  }
  return 0.0;
}

inline double derivative(ActivationKind kind, double u) {
  switch (kind) {
    case ActivationKind::Tanh: {
      const double t = std::tanh(u);
      return 1.0 - t * t;
    }
    case ActivationKind::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-u));
      return s * (1.0 - s);
    }
    case ActivationKind::Gaussian: return -2.0 * u * std::exp(-u * u);
    case ActivationKind::AffineTest: return 1.0;
    case ActivationKind::Zero:
    case ActivationKind::ConstantDrift: return 0.0;
  }
  return 0.0;
}

/// sup_u |g'(u)|
inline double derivative_bound(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Tanh: return 1.0;
    case ActivationKind::Sigmoid: return 0.25;
    case ActivationKind::Gaussian: return std::sqrt(2.0) * std::exp(-0.5);
    case ActivationKind::AffineTest: return 1.0;
    case ActivationKind::Zero:
    case ActivationKind::ConstantDrift: return 0.0;
  }
  return 0.0;
}

inline bool uses_theta(ActivationKind kind) {
  return kind != ActivationKind::Zero && kind != ActivationKind::ConstantDrift;
}

}  // namespace activation

/// Drift value and its partial derivatives at one point.
struct DriftJacobian {
  std::vector<double> f;       // d
  Matrix dx;                   // d x d
  Matrix dtheta;               // d x m
  std::vector<double> deta;    // d
  Matrix dz;                   // d x q

  explicit DriftJacobian(const Dims& dims)
      : f(dims.d), dx(dims.d, dims.d), dtheta(dims.d, dims.m), deta(dims.d), dz(dims.d, dims.q) {}
};

class ValidatedParams;
ValidatedParams validate_params(const ModelParams& p);

/// ModelParams whose invariants have been checked. Only validate_params
/// constructs one; immutable afterwards.
class ValidatedParams {
 public:
  const ModelParams& params() const noexcept { return p_; }
  const ModelParams* operator->() const noexcept { return &p_; }
  const Dims& dims() const noexcept { return p_.dims; }

  /// [f]_Lip over theta in the box and states with |x| <= state_radius:
  /// |f(a) - f(b)| <= L (|dtheta| + |dx| + |dz| + |deta|).
  double drift_lipschitz(double state_radius) const {
    const auto& a = p_.activation;
    const double g1 = activation::derivative_bound(a.kind);
    if (g1 == 0.0) return 0.0;
    const Dims& dm = p_.dims;
    const double weight_entries = a.wiring == Wiring::Diagonal ? static_cast<double>(dm.d)
                                                               : static_cast<double>(dm.d * dm.d);
    const double sqrt_d = std::sqrt(static_cast<double>(dm.d));
    double c = std::max(p_.K_theta * std::sqrt(weight_entries),
                        std::numbers::sqrt2 * std::max(state_radius, 1.0));
    if (dm.q > 0) c = std::max(c, sqrt_d * std::abs(a.w_z) / std::sqrt(static_cast<double>(dm.q)));
    c = std::max(c, sqrt_d * std::abs(a.w_eta));
    return g1 * c;
  }

  /// Default Lipschitz constant, on states bounded by 2K.
  double drift_lipschitz() const { return drift_lipschitz(2.0 * p_.K); }

  double rho_lipschitz() const {
    const double d = static_cast<double>(p_.dims.d);
    return p_.rho == BatchFunction::Zero ? 0.0 : 1.0 / std::sqrt(d);
  }

  double phi_lipschitz() const {
    if (p_.phi == ExogenousDrift::Zero) return 0.0;
    // |gamma1 z1 - gamma2 z2| <= |gamma1||dz| + |z2||dgamma|; reported on |.| <= K.
    return p_.K;
  }

  // Hot-path helpers. All spans must have the documented sizes.

  /// f(t, theta, z, x, eta) -> out (d).
  void drift(std::span<const double> theta, std::span<const double> z,
             std::span<const double> x, double eta, std::span<double> out) const {
    const auto& a = p_.activation;
    const std::size_t d = p_.dims.d;
    switch (a.kind) {
      case ActivationKind::Zero:
        std::fill(out.begin(), out.end(), 0.0);
        return;
      case ActivationKind::ConstantDrift:
        std::copy(a.constant.begin(), a.constant.end(), out.begin());
        return;
      default:
        break;
    }
    const double shift = input_shift(z, eta);
    for (std::size_t r = 0; r < d; ++r) {
      out[r] = activation::value(a.kind, preactivation(theta, x, r) + shift);
    }
  }

  /// Drift and all first-order partials.
  void drift_jacobian(std::span<const double> theta, std::span<const double> z,
                      std::span<const double> x, double eta, DriftJacobian& J) const {
    const auto& a = p_.activation;
    const Dims& dm = p_.dims;
    std::fill(J.dx.data.begin(), J.dx.data.end(), 0.0);
    std::fill(J.dtheta.data.begin(), J.dtheta.data.end(), 0.0);
    std::fill(J.dz.data.begin(), J.dz.data.end(), 0.0);
    std::fill(J.deta.begin(), J.deta.end(), 0.0);
    if (!activation::uses_theta(a.kind)) {
      drift(theta, z, x, eta, J.f);
      return;
    }
    const double shift = input_shift(z, eta);
    for (std::size_t r = 0; r < dm.d; ++r) {
      const double u = preactivation(theta, x, r) + shift;
      J.f[r] = activation::value(a.kind, u);
      const double gp = activation::derivative(a.kind, u);
      if (a.wiring == Wiring::Diagonal) {
        J.dx(r, r) = gp * theta[2 * r];
        J.dtheta(r, 2 * r) = gp * x[r];
        J.dtheta(r, 2 * r + 1) = gp;
      } else {
        for (std::size_t c = 0; c < dm.d; ++c) {
          J.dx(r, c) = gp * theta[r * dm.d + c];
          J.dtheta(r, r * dm.d + c) = gp * x[c];
        }
        J.dtheta(r, dm.d * dm.d + r) = gp;
      }
      J.deta[r] = gp * a.w_eta;
      if (dm.q > 0) {
        const double dzc = gp * a.w_z / static_cast<double>(dm.q);
        for (std::size_t k = 0; k < dm.q; ++k) J.dz(r, k) = dzc;
      }
    }
  }

  double rho(std::span<const double> x) const {
    if (p_.rho == BatchFunction::Zero) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    return p_.rho == BatchFunction::TanhMean ? std::tanh(mean) : mean;
  }

  void rho_gradient(std::span<const double> x, std::span<double> out) const {
    if (p_.rho == BatchFunction::Zero) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    const double n = static_cast<double>(x.size());
    double slope = 1.0 / n;
    if (p_.rho == BatchFunction::TanhMean) {
      double mean = 0.0;
      for (double v : x) mean += v;
      const double t = std::tanh(mean / n);
      slope *= 1.0 - t * t;
    }
    std::fill(out.begin(), out.end(), slope);
  }

  /// phi(gamma, z) -> out (q).
  void exogenous_drift(std::span<const double> gamma, std::span<const double> z,
                       std::span<double> out) const {
    if (p_.phi == ExogenousDrift::Zero) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = -gamma[k] * z[k];
  }

 private:
  friend ValidatedParams validate_params(const ModelParams& p);
  explicit ValidatedParams(ModelParams p) : p_(std::move(p)) {}

  double input_shift(std::span<const double> z, double eta) const {
    const auto& a = p_.activation;
    double s = a.w_eta * eta;
    if (!z.empty() && a.w_z != 0.0) {
      double mean = 0.0;
      for (double v : z) mean += v;
      s += a.w_z * mean / static_cast<double>(z.size());
    }
    return s;
  }

  double preactivation(std::span<const double> theta, std::span<const double> x,
                       std::size_t r) const {
    const std::size_t d = p_.dims.d;
    if (p_.activation.wiring == Wiring::Diagonal) return theta[2 * r] * x[r] + theta[2 * r + 1];
    double u = theta[d * d + r];
    for (std::size_t c = 0; c < d; ++c) u += theta[r * d + c] * x[c];
    return u;
  }

  ModelParams p_;
};

inline ValidatedParams validate_params(const ModelParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(p.alpha) && p.alpha > 0, ErrorKind::NonPositiveWeight, "alpha must be > 0");
  require(finite(p.beta) && p.beta > 0, ErrorKind::NonPositiveWeight, "beta must be > 0");
  require(finite(p.lambda1) && p.lambda1 > 0, ErrorKind::NonPositiveWeight,
          "lambda1 must be > 0");
  require(finite(p.lambda2) && p.lambda2 > 0, ErrorKind::NonPositiveWeight,
          "lambda2 must be > 0");
  require(finite(p.T) && p.T > 0, ErrorKind::NonPositiveWeight, "horizon T must be > 0");
  require(finite(p.K) && p.K > 0, ErrorKind::BoundViolation, "K must be > 0");
  require(finite(p.K_theta) && p.K_theta > 0, ErrorKind::BoundViolation, "K_theta must be > 0");

  const Dims& dm = p.dims;
  require(dm.d >= 1, ErrorKind::DimensionMismatch, "state dimension d must be >= 1");
  require(dm.p >= 1, ErrorKind::DimensionMismatch, "noise dimension p must be >= 1");
  require(dm.m >= 1, ErrorKind::DimensionMismatch, "control dimension m must be >= 1");
  const auto& a = p.activation;
  require(finite(a.w_z) && finite(a.w_eta), ErrorKind::BoundViolation,
          "wiring coefficients must be finite");
  if (activation::uses_theta(a.kind)) {
    require(dm.m == control_dim_for(a.wiring, dm.d), ErrorKind::DimensionMismatch,
            "control dimension m=" + std::to_string(dm.m) + " does not match wiring (expected " +
                std::to_string(control_dim_for(a.wiring, dm.d)) + ")");
  }
  if (a.kind == ActivationKind::ConstantDrift) {
    require(a.constant.size() == dm.d, ErrorKind::DimensionMismatch,
            "constant drift must have d entries");
    for (double c : a.constant) require(finite(c), ErrorKind::BoundViolation, "constant drift");
  }
  if (p.phi == ExogenousDrift::NegGammaZ) {
    require(dm.l == dm.q, ErrorKind::DimensionMismatch,
            "phi(gamma, z) = -gamma*z needs l == q");
  }
  return ValidatedParams(p);
}

/// Checks a sample against the dims and the compact support [-K, K].
inline void validate_sample(const ValidatedParams& vp, const TrainingSample& s) {
  const Dims& dm = vp.dims();
  require(s.x0.size() == dm.d && s.y0.size() == dm.d && s.z0.size() == dm.q,
          ErrorKind::DimensionMismatch, "sample dimensions do not match (d, d, q)");
  const double K = vp->K;
  auto inside = [K](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [K](double c) { return std::isfinite(c) && std::abs(c) <= K; });
  };
  require(inside(s.x0) && inside(s.y0) && inside(s.z0), ErrorKind::BoundViolation,
          "sample coordinate outside [-K, K] with K=" + std::to_string(K));
}

inline void validate_type(const ValidatedParams& vp, const TypeVector& t) {
  const Dims& dm = vp.dims();
  require(t.epsilon.rows == dm.d && t.epsilon.cols == dm.p && t.sigma.rows == dm.q &&
              t.sigma.cols == dm.p && t.gamma.size() == dm.l,
          ErrorKind::DimensionMismatch, "type vector dimensions do not match");
  const double n = t.norm();
  require(std::isfinite(n) && n <= vp->K, ErrorKind::BoundViolation,
          "type vector norm " + std::to_string(n) + " exceeds K");
}

/// Convenience wrapper returning f as a fresh vector.
inline std::vector<double> eval_drift(const ValidatedParams& vp, double /*t*/,
                                      std::span<const double> theta, std::span<const double> z,
                                      std::span<const double> x, double eta) {
  const Dims& dm = vp.dims();
  require(theta.size() == dm.m && z.size() == dm.q && x.size() == dm.d,
          ErrorKind::DimensionMismatch, "eval_drift argument sizes");
  std::vector<double> out(dm.d);
  vp.drift(theta, z, x, eta, out);
  return out;
}

}  // namespace mfres
