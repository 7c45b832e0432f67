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

#include <algorithm>
#include <cmath>

#include "mfres/trainer.hpp"

using namespace mfres;

namespace {

struct Problem {
  ModelParams p;
  SampleLaw law;
  std::size_t N = 8;
  std::size_t intervals = 8;
  std::size_t n_steps = 16;
};

Problem random_problem(std::uint64_t seed) {
  UniformStream u(seed);
  Problem pr;
  ModelParams& p = pr.p;
  p.dims.d = static_cast<std::size_t>(u.integer(1, 3));
  p.dims.q = static_cast<std::size_t>(u.integer(0, 1));
  p.dims.l = p.dims.q;
  p.dims.p = static_cast<std::size_t>(u.integer(1, 2));
  p.activation.kind = u.next() < 0.5 ? ActivationKind::Tanh : ActivationKind::Sigmoid;
  p.activation.wiring = u.next() < 0.5 ? Wiring::Diagonal : Wiring::Dense;
  p.dims.m = control_dim_for(p.activation.wiring, p.dims.d);
  p.activation.w_z = u.uniform(-1, 1);
  p.activation.w_eta = u.uniform(-1, 1);
  p.alpha = u.uniform(0.2, 2);
  p.beta = u.uniform(0.2, 2);
  p.lambda1 = u.uniform(0.1, 1);
  p.lambda2 = u.uniform(0.01, 0.5);
  pr.law.label_scale = u.uniform(-1, 1);
  pr.law.label_noise = 0.2;
  pr.law.type.epsilon = Matrix(p.dims.d, p.dims.p, 0.2);
  pr.law.type.gamma.assign(p.dims.l, 1.0);
  pr.law.type.sigma = Matrix(p.dims.q, p.dims.p, 0.1);
  pr.N = static_cast<std::size_t>(u.integer(1, 16));
  pr.intervals = std::size_t{4} << u.integer(0, 4);  // 4..64
  pr.n_steps = pr.intervals * static_cast<std::size_t>(u.integer(1, 2));
  return pr;
}

ControlGrid random_grid(const ValidatedParams& vp, std::size_t intervals, UniformStream& u, double scale) {
  ControlGrid g(vp->T, intervals, vp.dims().m, vp->K_theta);
  for (double& v : g.values()) v = scale * u.normal();
  return g;
}

ControlGrid axpy(const ControlGrid& a, double s, const ControlGrid& b) {
  ControlGrid c = a;
  for (std::size_t i = 0; i < c.values().size(); ++i) c.values()[i] += s * b.values()[i];
  return c;
}

TypeVector scalar_type(double eps) {
  TypeVector t;
  t.epsilon = Matrix(1, 1, eps);
  t.sigma = Matrix(0, 1);
  return t;
}

}  // namespace

TEST(ControlCost, GradientMatchesFiniteDifference) {
  UniformStream u(3);
  ModelParams p;
  p.lambda1 = 0.7;
  p.lambda2 = 0.3;
  const ValidatedParams vp = validate_params(p);
  const ControlGrid theta = random_grid(vp, 10, u, 1.0);
  const ControlGrid dir = random_grid(vp, 10, u, 1.0);
  auto cost = [&](const ControlGrid& t) {
    CostBreakdown c;
    add_control_costs(vp, t, c);
    return c.total;
  };
  const double h = 1e-5;
  const double fd = (cost(axpy(theta, h, dir)) - cost(axpy(theta, -h, dir))) / (2 * h);
  EXPECT_NEAR(control_cost_directional(theta, dir, 0.7, 0.3), fd, 1e-8);
  EXPECT_NEAR(detail::dot(control_cost_gradient(theta, 0.7, 0.3), dir), fd, 1e-8);
}

TEST(Sensitivity, MatchesCentralDifferencesOnRandomConfigs) {
  for (std::uint64_t c = 0; c < 20; ++c) {
    const Problem pr = random_problem(derive_seed(101, "problem", c));
    const ValidatedParams vp = validate_params(pr.p);
    const Dataset data = make_dataset(vp, pr.law, pr.N, c);
    UniformStream u(c, 7);
    const ControlGrid theta = random_grid(vp, pr.intervals, u, 0.5);
    const ControlGrid dir = random_grid(vp, pr.intervals, u, 1.0);
    const SimConfig sim{pr.n_steps, 1, {}};
    const double h = 1e-5;
    const double fd = (objective_JN(vp, axpy(theta, h, dir), data, sim, 9).total -
                       objective_JN(vp, axpy(theta, -h, dir), data, sim, 9).total) / (2 * h);
    const auto ens = simulate_particles(vp, theta, data.samples, data.types, pr.n_steps,
                                        replication_seed(9, 0), {}, data.ids);
    const double fwd = forward_sensitivity(ens, theta, dir, vp);
    const double adj = detail::dot(gradient_JN(vp, theta, data, sim, 9), dir);
    EXPECT_LE(std::abs(fwd - fd), 1e-4 * std::abs(fd)) << "config " << c;
    EXPECT_LE(std::abs(adj - fd), 1e-4 * std::abs(fd)) << "config " << c;
    EXPECT_NEAR(fwd, adj, 1e-10 * std::max(1.0, std::abs(fwd)));
  }
}

TEST(Sensitivity, ZeroDirectionGivesZero) {
  const Problem pr = random_problem(5);
  const ValidatedParams vp = validate_params(pr.p);
  const Dataset data = make_dataset(vp, pr.law, pr.N, 1);
  UniformStream u(5);
  const ControlGrid theta = random_grid(vp, pr.intervals, u, 0.5);
  const auto ens = simulate_particles(vp, theta, data.samples, data.types, pr.n_steps, 2);
  EXPECT_EQ(forward_sensitivity(ens, theta, ControlGrid(vp->T, pr.intervals, vp.dims().m), vp), 0.0);
}

TEST(Sensitivity, ZeroDynamicsReducesToControlCostDerivative) {
  ModelParams p;
  p.activation.kind = ActivationKind::Zero;
  p.lambda1 = 0.4;
  p.lambda2 = 0.9;
  const ValidatedParams vp = validate_params(p);
  UniformStream u(8);
  const ControlGrid theta = random_grid(vp, 16, u, 1.0);
  const ControlGrid dir = random_grid(vp, 16, u, 1.0);
  const auto ens = simulate_particles(vp, theta, {{{0.3}, {0.1}, {}}}, {scalar_type(0.5)}, 16, 2);
  // Closed form: trapezoid L2 pairing plus the exact H1 seminorm pairing.
  const double h = theta.dt();
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t k = 0; k < theta.nodes(); ++k) {
    const double w = (k == 0 || k + 1 == theta.nodes()) ? 0.5 * h : h;
    for (std::size_t j = 0; j < 2; ++j) l2 += w * theta(k, j) * dir(k, j);
  }
  for (std::size_t k = 0; k + 1 < theta.nodes(); ++k) {
    for (std::size_t j = 0; j < 2; ++j) h1 += (theta(k + 1, j) - theta(k, j)) * (dir(k + 1, j) - dir(k, j)) / h;
  }
  EXPECT_NEAR(forward_sensitivity(ens, theta, dir, vp), 2 * 0.4 * l2 + 2 * 0.9 * h1, 1e-11);
}

TEST(Gradient, AssembledFromBasisSensitivities) {
  const Problem pr = random_problem(77);
  const ValidatedParams vp = validate_params(pr.p);
  const Dataset data = make_dataset(vp, pr.law, pr.N, 3);
  UniformStream u(77);
  const ControlGrid theta = random_grid(vp, 8, u, 0.5);
  const SimConfig sim{16, 1, {}};
  const ControlGrid g = gradient_JN(vp, theta, data, sim, 4);
  const auto ens = simulate_particles(vp, theta, data.samples, data.types, 16, replication_seed(4, 0),
                                      {}, data.ids);
  for (std::size_t i = 0; i < g.values().size(); ++i) {
    ControlGrid e(vp->T, 8, vp.dims().m);
    e.values()[i] = 1.0;
    EXPECT_NEAR(g.values()[i], forward_sensitivity(ens, theta, e, vp), 1e-10);
  }
}

TEST(Gradient, VanishesAtTheZeroDynamicsOptimum) {
  ModelParams p;
  p.activation.kind = ActivationKind::Zero;
  const ValidatedParams vp = validate_params(p);
  SampleLaw law;
  law.type = scalar_type(0.4);
  const Dataset data = make_dataset(vp, law, 10, 2);
  const ControlGrid g = gradient_JN(vp, ControlGrid(1.0, 8, 2), data, SimConfig{8, 2, {}}, 1);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Train, ZeroDynamicsAtTheLabelsGivesZeroControl) {
  ModelParams p;
  p.activation.kind = ActivationKind::Zero;
  const ValidatedParams vp = validate_params(p);
  Dataset data;
  for (int i = 0; i < 4; ++i) {
    const double x = 0.2 * i - 0.3;
    data.samples.push_back({{x}, {x}, {}});
    data.types.push_back(scalar_type(0.0));
    data.ids.push_back(static_cast<std::uint64_t>(i));
  }
  TrainConfig cfg;
  cfg.intervals = 8;
  cfg.sim.n_steps = 8;
  UniformStream u(1);
  const auto res = train(vp, data, cfg, 3, random_grid(vp, 8, u, 0.5));
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.theta_star.sup_norm(), 1e-5);
  EXPECT_LT(res.history.back().total, 1e-10);
}

TEST(Train, HistoryIsNonIncreasingAndEnergyBoundHolds) {
  ModelParams p;
  p.alpha = 1.0;
  p.beta = 0.5;
  p.lambda1 = 0.5;
  p.lambda2 = 0.05;
  const ValidatedParams vp = validate_params(p);
  SampleLaw law;
  law.label_scale = 1.3;
  law.label_shift = 0.2;
  law.type = scalar_type(0.2);
  const Dataset data = make_dataset(vp, law, 50, 4);
  TrainConfig cfg;
  cfg.intervals = 16;
  cfg.sim.n_steps = 16;
  cfg.max_iters = 60;
  const auto res = train(vp, data, cfg, 5);
  for (std::size_t i = 1; i < res.history.size(); ++i) {
    EXPECT_LE(res.history[i].total, res.history[i - 1].total);
  }
  EXPECT_TRUE(res.energy_bound_holds);
  EXPECT_LE(res.energy_lower, res.history.back().total);
  EXPECT_LE(res.history.back().total, res.cost_at_zero.total);
  EXPECT_TRUE(res.theta_star.in_box());
}

TEST(Train, LargerL2WeightShrinksTheOptimum) {
  SampleLaw law;
  law.label_scale = 1.3;
  law.label_shift = 0.2;
  law.type = scalar_type(0.2);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda1 : {0.1, 1.0, 10.0, 100.0}) {
    ModelParams p;
    p.lambda1 = lambda1;
    p.lambda2 = 0.05;
    const ValidatedParams vp = validate_params(p);
    const Dataset data = make_dataset(vp, law, 20, 4);
    TrainConfig cfg;
    cfg.intervals = 8;
    cfg.sim.n_steps = 8;
    cfg.grad_tol = 1e-8;
    const auto res = train(vp, data, cfg, 5);
    const double s = res.theta_star.sup_norm();
    EXPECT_LT(s, prev) << "lambda1 = " << lambda1;
    prev = s;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Train, PermutingSamplesLeavesTheOptimumUnchanged) {
  ModelParams p;
  p.activation.w_eta = 0.3;
  p.lambda1 = 0.5;
  p.lambda2 = 0.1;
  const ValidatedParams vp = validate_params(p);
  SampleLaw law;
  law.label_scale = 1.3;
  law.type = scalar_type(0.2);
  const Dataset data = make_dataset(vp, law, 12, 4);
  Dataset perm;
  for (std::size_t k = 0; k < 12; ++k) {
    const std::size_t i = (5 * k + 3) % 12;
    perm.samples.push_back(data.samples[i]);
    perm.types.push_back(data.types[i]);
    perm.ids.push_back(data.ids[i]);
  }
  TrainConfig cfg;
  cfg.intervals = 8;
  cfg.sim.n_steps = 8;
  cfg.grad_tol = 1e-7;
  const auto a = train(vp, data, cfg, 6);
  const auto b = train(vp, perm, cfg, 6);
  EXPECT_NEAR(a.history.back().total, b.history.back().total, 1e-10);
  EXPECT_LT(a.theta_star.sup_distance(b.theta_star), 1e-5);
}

TEST(Train, SingleNoiselessSampleConvergesFromRandomStart) {
  ModelParams p;
  p.lambda1 = 0.2;
  p.lambda2 = 0.1;
  const ValidatedParams vp = validate_params(p);
  Dataset data;
  data.samples.push_back({{0.5}, {-0.4}, {}});
  data.types.push_back(scalar_type(0.0));
  data.ids.push_back(0);
  TrainConfig cfg;
  cfg.intervals = 16;
  cfg.sim.n_steps = 32;
  cfg.grad_tol = 1e-6;
  cfg.max_iters = 2000;
  UniformStream u(11);
  const auto res = train(vp, data, cfg, 1, random_grid(vp, 16, u, 1.0));
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.grad_norm_final, 1e-6);
}

TEST(Train, IsDeterministicGivenTheSeed) {
  const ValidatedParams vp = validate_params(ModelParams{});
  SampleLaw law;
  law.type = scalar_type(0.3);
  const Dataset data = make_dataset(vp, law, 10, 1);
  TrainConfig cfg;
  cfg.intervals = 8;
  cfg.sim.n_steps = 8;
  cfg.max_iters = 10;
  const auto a = train(vp, data, cfg, 2);
  cfg.sim.exec.threads = 3;
  const auto b = train(vp, data, cfg, 2);
  EXPECT_EQ(a.theta_star.values(), b.theta_star.values());
}

TEST(Train, ReportsErrors) {
  const ValidatedParams vp = validate_params(ModelParams{});
  SampleLaw law;
  law.type = scalar_type(0.3);
  const Dataset data = make_dataset(vp, law, 4, 1);
  TrainConfig cfg;
  cfg.intervals = 4;
  cfg.sim.n_steps = 4;
  cfg.step_size = 0.0;
  try {
    train(vp, data, cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid);
  }
  cfg.step_size = 1.0;
  cfg.min_step = 2.0;  // line search cannot take a single trial
  try {
    train(vp, data, cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoDescentProgress);
  }
}
