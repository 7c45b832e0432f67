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

// Trains a scalar residual network on a small sample and prints the cost
// before and after.

#include <cstdio>

#include "mfres/mfres.hpp"

int main() {
  using namespace mfres;

  ModelParams p;
  p.dims = Dims{1, 1, 1, 2, 1};
  p.activation.kind = ActivationKind::Tanh;
  p.activation.w_z = 0.5;
  p.lambda1 = 0.5;
  p.lambda2 = 0.05;
  const ValidatedParams vp = validate_params(p);

  SampleLaw law;
  law.label_scale = -1.0;  // learn the reflection y = -x
  law.type.epsilon = Matrix(1, 1);
  law.type.epsilon(0, 0) = 0.2;
  law.type.gamma = {1.0};
  law.type.sigma = Matrix(1, 1);
  law.type.sigma(0, 0) = 0.3;

  const Dataset data = make_dataset(vp, law, 200, derive_seed(1, "quickstart-samples"));

  TrainConfig cfg;
  cfg.intervals = 16;
  cfg.sim.n_steps = 64;
  cfg.sim.replications = 2;
  const TrainResult res = train(vp, data, cfg, derive_seed(1, "quickstart-noise"));

  std::printf("J_N(0)      = %.6f\n", res.cost_at_zero.total);
  std::printf("J_N(theta*) = %.6f after %d iterations, grad norm %.2e\n", res.history.back().total,
              res.iterations, res.grad_norm_final);
  std::printf("\n   t     W(t)      b(t)\n");
  for (std::size_t k = 0; k < res.theta_star.nodes(); k += 4) {
    std::printf("%5.2f  %8.4f  %8.4f\n", res.theta_star.time(k), res.theta_star(k, 0), res.theta_star(k, 1));
  }
  return 0;
}
