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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <tuple>

#include "mfres/fpk.hpp"

using namespace mfres;

namespace {

ModelParams scalar_params() {
  ModelParams p;
  p.alpha = 1.0;
  p.beta = 0.5;
  p.lambda1 = 0.5;
  p.lambda2 = 0.05;
  return p;
}

SampleLaw scalar_law(double eps) {
  SampleLaw law;
  law.label_scale = 1.3;
  law.label_shift = 0.2;
  law.type.epsilon = Matrix(1, 1, eps);
  law.type.sigma = Matrix(0, 1);
  return law;
}

ControlGrid cosine_rhs(std::size_t intervals, double lambda1, double lambda2, double T) {
  ControlGrid g(T, intervals, 1);
  const double w = std::numbers::pi / T;
  for (std::size_t k = 0; k < g.nodes(); ++k) g(k, 0) = (lambda1 + lambda2 * w * w) * std::cos(w * g.time(k));
  return g;
}

double cosine_error(const ControlGrid& theta) {
  double e = 0.0;
  const double w = std::numbers::pi / theta.horizon();
  for (std::size_t k = 0; k < theta.nodes(); ++k) e = std::max(e, std::abs(theta(k, 0) - std::cos(w * theta.time(k))));
  return e;
}

}  // namespace

TEST(EstimateG, VanishesForZeroActivation) {
  ModelParams p = scalar_params();
  p.activation.kind = ActivationKind::Zero;
  const ValidatedParams vp = validate_params(p);
  const auto G = estimate_G(ControlGrid::constant(1.0, 8, std::vector<double>{0.5, 0.1}), vp,
                            scalar_law(0.3), 500, 16, 2);
  for (double v : G.values.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(G.max_std_error(), 0.0);
}

// Deterministic oracle: costate p' = -f_x p - 2 beta (x - y), p(T) = 2 alpha (x(T) - y),
// and G = -p grad_theta f / 2, integrated with RK4 on a fine grid.
TEST(EstimateG, NoiselessDegenerateLawMatchesCostateQuadrature) {
  const ModelParams p = scalar_params();
  const ValidatedParams vp = validate_params(p);
  const double a = 0.4, y = 0.9, th1 = 0.8, th2 = -0.3;
  SampleLaw law = scalar_law(0.0);
  law.x_lo = law.x_hi = a;
  law.label_scale = 0.0;
  law.label_shift = y;
  const ControlGrid theta = ControlGrid::constant(1.0, 8, std::vector<double>{th1, th2});
  const auto G = estimate_G(theta, vp, law, 3, 4096, 1);

  auto f = [&](double x) { return std::tanh(th1 * x + th2); };
  auto fx = [&](double x) { return th1 * (1.0 - f(x) * f(x)); };
  const std::size_t m = 2 * 8192;
  const double h = 1.0 / m;
  std::vector<double> x(m + 1);
  x[0] = a;
  for (std::size_t k = 0; k < m; ++k) {
    const double k1 = f(x[k]), k2 = f(x[k] + 0.5 * h * k1), k3 = f(x[k] + 0.5 * h * k2), k4 = f(x[k] + h * k3);
    x[k + 1] = x[k] + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  // Backward RK4 with step 2h, midpoints read from the forward grid.
  std::vector<double> pc(m + 1);
  pc[m] = 2.0 * p.alpha * (x[m] - y);
  auto rhs = [&](std::size_t k, double q) { return -fx(x[k]) * q - 2.0 * p.beta * (x[k] - y); };
  for (std::size_t k = m; k >= 2; k -= 2) {
    const double H = -2.0 * h;
    const double k1 = rhs(k, pc[k]), k2 = rhs(k - 1, pc[k] + 0.5 * H * k1);
    const double k3 = rhs(k - 1, pc[k] + 0.5 * H * k2), k4 = rhs(k - 2, pc[k] + H * k3);
    pc[k - 2] = pc[k] + H / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  for (std::size_t node = 0; node <= 8; ++node) {
    const std::size_t k = node * (m / 8);
    const double gp = 1.0 - f(x[k]) * f(x[k]);
    EXPECT_NEAR(G.values(node, 0), -0.5 * pc[k] * gp * x[k], 2e-3) << "node " << node;
    EXPECT_NEAR(G.values(node, 1), -0.5 * pc[k] * gp, 2e-3) << "node " << node;
  }
  EXPECT_LT(G.max_std_error(), 1e-14);
}

TEST(EstimateG, StdErrorsShrinkAsInverseRootM) {
  const ValidatedParams vp = validate_params(scalar_params());
  const ControlGrid theta = ControlGrid::constant(1.0, 8, std::vector<double>{0.6, 0.1});
  std::vector<double> se;
  for (std::size_t M : {1000, 4000, 16000}) {
    const auto G = estimate_G(theta, vp, scalar_law(0.2), M, 16, 3);
    double s = 0.0;
    for (double v : G.std_errors.values()) s += v;
    se.push_back(s);
  }
  EXPECT_NEAR(se[0] / se[1], 2.0, 0.2);
  EXPECT_NEAR(se[1] / se[2], 2.0, 0.2);
}

TEST(EstimateG, InvariantUnderPathReordering) {
  const ValidatedParams vp = validate_params(scalar_params());
  const ControlGrid theta = ControlGrid::constant(1.0, 4, std::vector<double>{0.6, 0.1});
  const auto aug = simulate_augmented(vp, theta, scalar_law(0.2), 50, 8, 4);
  AugmentedEnsemble rev = aug;
  for (std::size_t i = 0; i < 50; ++i) {
    rev.Y[i] = aug.Y[49 - i];
    for (std::size_t k = 0; k <= 8; ++k) {
      rev.X1[rev.at(i, k)] = aug.X1[aug.at(49 - i, k)];
      rev.X2[rev.at(i, k)] = aug.X2[aug.at(49 - i, k)];
      rev.X3[rev.at(i, k)] = aug.X3[aug.at(49 - i, k)];
      rev.X4[rev.at(i, k)] = aug.X4[aug.at(49 - i, k)];
    }
  }
  const auto a = estimate_G(aug, theta, vp);
  const auto b = estimate_G(rev, theta, vp);
  for (std::size_t i = 0; i < a.values.values().size(); ++i) {
    EXPECT_NEAR(a.values.values()[i], b.values.values()[i], 1e-14);
  }
}

TEST(EstimateG, DeterministicPerSeedAndThreadCount) {
  const ValidatedParams vp = validate_params(scalar_params());
  const ControlGrid theta = ControlGrid::constant(1.0, 4, std::vector<double>{0.6, 0.1});
  const auto a = estimate_G(theta, vp, scalar_law(0.2), 300, 8, 4, ExecPolicy{1});
  const auto b = estimate_G(theta, vp, scalar_law(0.2), 300, 8, 4, ExecPolicy{4});
  EXPECT_EQ(a.values.values(), b.values.values());
  EXPECT_EQ(a.std_errors.values(), b.std_errors.values());
}

TEST(EstimateG, RejectsNonScalarSettingsAndCoarseSimulation) {
  ModelParams p = scalar_params();
  p.activation.w_eta = 0.5;
  try {
    estimate_G(ControlGrid(1.0, 4, 2), validate_params(p), scalar_law(0.2), 10, 8, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigNotExample52);
  }
  const ValidatedParams vp = validate_params(scalar_params());
  const auto aug = simulate_augmented(vp, ControlGrid(1.0, 8, 2), scalar_law(0.2), 10, 4, 1);
  try {
    estimate_G(aug, ControlGrid(1.0, 8, 2), vp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridMismatch);
  }
}

TEST(NeumannBvp, ConstantAndZeroRightHandSides) {
  const auto c = solve_neumann_bvp(ControlGrid::constant(1.0, 10, std::vector<double>{2.0, -1.0}), 0.5, 0.3);
  for (std::size_t k = 0; k < c.nodes(); ++k) {
    EXPECT_NEAR(c(k, 0), 4.0, 1e-12);
    EXPECT_NEAR(c(k, 1), -2.0, 1e-12);
  }
  const auto z = solve_neumann_bvp(ControlGrid(1.0, 10, 2), 0.5, 0.3);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(NeumannBvp, ManufacturedCosineConvergesAtSecondOrder) {
  for (auto [l1, l2, T] : {std::tuple{1.0, 1.0, 1.0}, std::tuple{0.5, 0.05, 1.0}, std::tuple{0.3, 2.0, 2.5}}) {
    std::vector<double> err;
    for (std::size_t n : {16, 32, 64, 128}) err.push_back(cosine_error(solve_neumann_bvp(cosine_rhs(n, l1, l2, T), l1, l2)));
    for (std::size_t i = 0; i + 1 < err.size(); ++i) {
      const double ratio = err[i] / err[i + 1];
      EXPECT_GE(ratio, 3.5);
      EXPECT_LE(ratio, 4.5);
    }
  }
}

TEST(NeumannBvp, BoundaryDerivativesAreSecondOrderSmall) {
  std::vector<double> c;
  for (std::size_t n : {16, 32, 64}) {
    const auto th = solve_neumann_bvp(cosine_rhs(n, 1.0, 1.0, 1.0), 1.0, 1.0);
    const auto b = boundary_derivatives(th);
    const double h = th.dt();
    c.push_back(std::max(b.at_zero, b.at_T) / (h * h));
  }
  // Bounded by C dt^2 with a non-increasing C (the cosine even gives dt^3).
  EXPECT_LE(c[1], c[0]);
  EXPECT_LE(c[2], c[1]);
}

TEST(NeumannBvp, PreservesPositivity) {
  UniformStream u(12);
  for (int trial = 0; trial < 200; ++trial) {
    ControlGrid g(1.0, static_cast<std::size_t>(u.integer(2, 40)), 1);
    for (double& v : g.values()) v = u.next() < 0.3 ? 0.0 : u.uniform(0.0, 5.0);
    const auto th = solve_neumann_bvp(g, u.uniform(0.01, 2.0), u.uniform(0.01, 2.0));
    for (double v : th.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(NeumannBvp, RejectsNonPositiveWeights) {
  try {
    solve_neumann_bvp(ControlGrid(1.0, 4, 1), 0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveWeight);
  }
}

TEST(FixedPoint, ZeroActivationConvergesImmediately) {
  ModelParams p = scalar_params();
  p.activation.kind = ActivationKind::Zero;
  const ValidatedParams vp = validate_params(p);
  FixedPointConfig cfg;
  cfg.mc_paths = 200;
  cfg.n_steps = 16;
  cfg.intervals = 8;
  const auto res = fixed_point_solve(vp, scalar_law(0.3), cfg);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_EQ(res.theta_star.sup_norm(), 0.0);
  EXPECT_EQ(residual_first_order(res.theta_star, res.G, vp).value, 0.0);
}

TEST(FixedPoint, ZeroControlIsFixedWhenStartingAtTheLabels) {
  const ValidatedParams vp = validate_params(scalar_params());
  SampleLaw law = scalar_law(0.0);
  law.label_scale = 1.0;
  law.label_shift = 0.0;
  const auto G = estimate_G(ControlGrid(1.0, 8, 2), vp, law, 100, 16, 5);
  for (double v : G.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(FixedPoint, TraceContractsAndCertificateHolds) {
  const ValidatedParams vp = validate_params(scalar_params());
  FixedPointConfig cfg;
  cfg.damping = 0.5;
  cfg.mc_paths = 4000;
  cfg.n_steps = 32;
  cfg.intervals = 16;
  cfg.outer_iters = 200;
  cfg.outer_tol = 1e-7;
  cfg.seed = 8;
  const auto res = fixed_point_solve(vp, scalar_law(0.2), cfg);
  ASSERT_GE(res.trace.size(), 6u);
  for (std::size_t i = res.trace.size() - 5; i < res.trace.size(); ++i) {
    EXPECT_LT(res.trace[i], res.trace[i - 1]);
  }
  EXPECT_FALSE(res.projection_active);
  const auto r = residual_first_order(res.theta_star, res.G, vp);
  const double h = res.theta_star.dt();
  EXPECT_LE(r.value, cfg.outer_tol * (vp->lambda1 + vp->lambda2 / (h * h)) + 3.0 * r.max_std_error);

  ControlGrid other = res.theta_star;
  UniformStream u(3);
  for (double& v : other.values()) v += u.uniform(-0.5, 0.5);
  const auto r_other = residual_first_order(other, vp, scalar_law(0.2), cfg.mc_paths, cfg.n_steps,
                                            fixed_point_seed(cfg, 0));
  EXPECT_GT(r_other.value, r.value);
}

TEST(FixedPoint, RefreshedSeedsUseNewNoiseEachIteration) {
  FixedPointConfig cfg;
  cfg.seed = 5;
  EXPECT_EQ(fixed_point_seed(cfg, 0), fixed_point_seed(cfg, 3));
  cfg.seed_policy = SeedPolicy::Refreshed;
  EXPECT_NE(fixed_point_seed(cfg, 0), fixed_point_seed(cfg, 3));
}

TEST(FixedPoint, ReportsNonConvergenceWithTrace) {
  const ValidatedParams vp = validate_params(scalar_params());
  FixedPointConfig cfg;
  cfg.mc_paths = 200;
  cfg.n_steps = 16;
  cfg.intervals = 8;
  cfg.outer_iters = 2;
  cfg.outer_tol = 1e-12;
  try {
    fixed_point_solve(vp, scalar_law(0.2), cfg);
    FAIL();
  } catch (const NoConvergenceError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoConvergence);
    EXPECT_EQ(e.trace().size(), 2u);
  }
  cfg.damping = 0.0;
  EXPECT_THROW(fixed_point_solve(vp, scalar_law(0.2), cfg), Error);
}
