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

// Compares the adjoint gradient with a central difference of J_N along a
// random direction, with the noise held fixed.

#include <cmath>
#include <cstdio>

#include "mfres/mfres.hpp"

int main() {
  using namespace mfres;

  ModelParams p;
  p.dims = Dims{2, 1, 2, 4, 1};
  p.activation.kind = ActivationKind::Sigmoid;
  p.activation.w_z = 0.3;
  p.activation.w_eta = 0.7;
  const ValidatedParams vp = validate_params(p);

  SampleLaw law;
  law.type.epsilon = Matrix(2, 2);
  law.type.epsilon(0, 0) = 0.2;
  law.type.epsilon(1, 1) = 0.3;
  law.type.gamma = {1.0};
  law.type.sigma = Matrix(1, 2);
  law.type.sigma(0, 1) = 0.4;
  law.label_noise = 0.1;
  const Dataset data = make_dataset(vp, law, 12, 7);

  SimConfig sim;
  sim.n_steps = 48;
  const std::uint64_t seed = 11;

  UniformStream u(derive_seed(3, "gradient-check"));
  ControlGrid theta(vp->T, 24, vp.dims().m), dir(vp->T, 24, vp.dims().m);
  for (double& v : theta.values()) v = u.uniform(-1, 1);
  for (double& v : dir.values()) v = u.uniform(-1, 1);

  const ControlGrid g = gradient_JN(vp, theta, data, sim, seed);
  double adjoint = 0.0;
  for (std::size_t i = 0; i < g.values().size(); ++i) adjoint += g.values()[i] * dir.values()[i];

  std::printf("      h   central difference   relative error\n");
  for (double h : {1e-2, 1e-3, 1e-4, 1e-5}) {
    ControlGrid plus = theta, minus = theta;
    for (std::size_t i = 0; i < dir.values().size(); ++i) {
      plus.values()[i] += h * dir.values()[i];
      minus.values()[i] -= h * dir.values()[i];
    }
    const double fd = (objective_JN(vp, plus, data, sim, seed).total -
                       objective_JN(vp, minus, data, sim, seed).total) / (2.0 * h);
    std::printf("%7.0e   %18.12f   %.3e\n", h, fd, std::abs(fd - adjoint) / std::abs(adjoint));
  }
  std::printf("adjoint   %18.12f\n", adjoint);
  return 0;
}
