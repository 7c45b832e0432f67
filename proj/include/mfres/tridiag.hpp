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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfres/error.hpp"

namespace mfres {

/// Tridiagonal system lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i].
/// lower[0] and upper[n-1] are ignored.
struct Tridiagonal {
  std::vector<double> lower, diag, upper;

  std::size_t size() const noexcept { return diag.size(); }

  void apply(std::span<const double> x, std::span<double> out) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      double v = diag[i] * x[i];
      if (i > 0) v += lower[i] * x[i - 1];
      if (i + 1 < n) v += upper[i] * x[i + 1];
      out[i] = v;
    }
  }
};

// Thomas algorithm. Stable for the diagonally dominant systems used here.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& sys, std::span<const double> rhs) {
  const std::size_t n = sys.size();
  std::vector<double> c(n), x(n);
  double denom = sys.diag[0];
  require(std::abs(denom) > 1e-300, ErrorKind::SingularSystem, "zero pivot at row 0");
  c[0] = n > 1 ? sys.upper[0] / denom : 0.0;
  x[0] = rhs[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = sys.diag[i] - sys.lower[i] * c[i - 1];
    require(std::abs(denom) > 1e-300 && std::isfinite(denom), ErrorKind::SingularSystem,
            "zero pivot at row " + std::to_string(i));
    c[i] = i + 1 < n ? sys.upper[i] / denom : 0.0;
    x[i] = (rhs[i] - sys.lower[i] * x[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
  return x;
}

/// lambda1 I - lambda2 D^2 on `nodes` uniform nodes with spacing h, Neumann
/// closure by a mirrored ghost node (theta_{-1} = theta_1, theta_{n+1} = theta_{n-1}).
inline Tridiagonal neumann_operator(std::size_t nodes, double h, double lambda1, double lambda2) {
  Tridiagonal op;
  op.lower.assign(nodes, -lambda2 / (h * h));
  op.upper.assign(nodes, -lambda2 / (h * h));
  op.diag.assign(nodes, lambda1 + 2.0 * lambda2 / (h * h));
  if (nodes >= 2) {
    op.upper[0] = -2.0 * lambda2 / (h * h);
    op.lower[nodes - 1] = -2.0 * lambda2 / (h * h);
  }
  return op;
}

}  // namespace mfres
