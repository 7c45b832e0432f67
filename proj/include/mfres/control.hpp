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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "mfres/error.hpp"

namespace mfres {

/// Weight path theta: piecewise linear on the uniform grid 0 = t_0 < ... < t_M = T,
/// values in R^m. theta' is the per-interval slope.
class ControlGrid {
 public:
  ControlGrid() = default;

  /// Zero path with `intervals` uniform intervals on [0, T].
  ControlGrid(double T, std::size_t intervals, std::size_t m,
              double bound = std::numeric_limits<double>::infinity())
      : T_(T), intervals_(intervals), m_(m), bound_(bound), values_((intervals + 1) * m, 0.0) {}

  static ControlGrid constant(double T, std::size_t intervals, std::span<const double> value,
                              double bound = std::numeric_limits<double>::infinity()) {
    ControlGrid c(T, intervals, value.size(), bound);
    for (std::size_t k = 0; k <= intervals; ++k) std::copy(value.begin(), value.end(), c.node(k).begin());
    return c;
  }

  double horizon() const noexcept { return T_; }
  std::size_t intervals() const noexcept { return intervals_; }
  std::size_t nodes() const noexcept { return intervals_ + 1; }
  std::size_t dim() const noexcept { return m_; }
  double bound() const noexcept { return bound_; }
  void set_bound(double b) noexcept { bound_ = b; }
  double dt() const noexcept { return T_ / static_cast<double>(intervals_); }
  double time(std::size_t k) const noexcept { return T_ * static_cast<double>(k) / static_cast<double>(intervals_); }

  std::span<double> node(std::size_t k) { return {values_.data() + k * m_, m_}; }
  std::span<const double> node(std::size_t k) const { return {values_.data() + k * m_, m_}; }
  double& operator()(std::size_t k, std::size_t j) { return values_[k * m_ + j]; }
  double operator()(std::size_t k, std::size_t j) const { return values_[k * m_ + j]; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Left node index and weight w such that theta(t) = (1-w) theta_k + w theta_{k+1}.
  std::pair<std::size_t, double> locate(double t) const {
    const double s = std::clamp(t / T_, 0.0, 1.0) * static_cast<double>(intervals_);
    auto k = static_cast<std::size_t>(std::floor(s));
    if (k >= intervals_) return {intervals_ - 1, 1.0};
    return {k, s - static_cast<double>(k)};
  }

  /// Same as locate(t_k) for step k of a uniform n_steps grid, computed in
  /// integer arithmetic so aligned grids hit nodes exactly.
  std::pair<std::size_t, double> locate_step(std::size_t k, std::size_t n_steps) const {
    const std::size_t num = k * intervals_;
    std::size_t node = num / n_steps;
    double w = static_cast<double>(num % n_steps) / static_cast<double>(n_steps);
    if (node >= intervals_) return {intervals_ - 1, 1.0};
    return {node, w};
  }

  void value_at(double t, std::span<double> out) const {
    const auto [k, w] = locate(t);
    for (std::size_t j = 0; j < m_; ++j) out[j] = (1.0 - w) * (*this)(k, j) + w * (*this)(k + 1, j);
  }

  bool same_grid(const ControlGrid& o) const noexcept {
    return intervals_ == o.intervals_ && m_ == o.m_ && std::abs(T_ - o.T_) <= 1e-12 * T_;
  }

  double sup_distance(const ControlGrid& o) const {
    require(same_grid(o), ErrorKind::GridMismatch, "sup_distance on different grids");
    double s = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) s = std::max(s, std::abs(values_[i] - o.values_[i]));
    return s;
  }

  double sup_norm() const {
    double s = 0.0;
    for (double v : values_) s = std::max(s, std::abs(v));
    return s;
  }

  bool in_box() const {
    return std::all_of(values_.begin(), values_.end(),
                       [this](double v) { return std::abs(v) <= bound_; });
  }

 private:
  double T_ = 1.0;
  std::size_t intervals_ = 1;
  std::size_t m_ = 1;
  double bound_ = std::numeric_limits<double>::infinity();
  std::vector<double> values_;
};

struct H1Norms {
  double l2_sq = 0.0;       // trapezoid of |theta|^2
  double h1_semi_sq = 0.0;  // sum |dtheta_k|^2 / dt, exact for piecewise-linear theta
};

inline H1Norms control_h1_norms(const ControlGrid& c) {
  require(c.nodes() >= 2, ErrorKind::GridTooSmall, "control grid needs at least 2 points");
  const double dt = c.dt();
  H1Norms out;
  for (std::size_t k = 0; k < c.nodes(); ++k) {
    double sq = 0.0;
    for (double v : c.node(k)) sq += v * v;
    const double w = (k == 0 || k + 1 == c.nodes()) ? 0.5 : 1.0;
    out.l2_sq += w * dt * sq;
  }
  for (std::size_t k = 0; k + 1 < c.nodes(); ++k) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c.dim(); ++j) {
      const double diff = c(k + 1, j) - c(k, j);
      sq += diff * diff;
    }
    out.h1_semi_sq += sq / dt;
  }
  return out;
}

/// Coordinatewise clamp into [-bound, bound]^m.
inline ControlGrid project_to_box(const ControlGrid& c) {
  ControlGrid out = c;
  const double b = c.bound();
  for (double& v : out.values()) v = std::clamp(v, -b, b);
  return out;
}

}  // namespace mfres
