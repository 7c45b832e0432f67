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

// Weak-form FPK residual of the particle system for growing N.

#include <cmath>
#include <cstdio>
#include <vector>

#include "mfres/mfres.hpp"

int main() {
  using namespace mfres;

  ModelParams p;
  p.dims = Dims{1, 1, 1, 2, 1};
  p.activation.w_z = 0.5;
  p.activation.w_eta = 0.5;
  p.beta = 0.5;
  const ValidatedParams vp = validate_params(p);

  SampleLaw law;
  law.type.epsilon = Matrix(1, 1);
  law.type.epsilon(0, 0) = 0.5;
  law.type.gamma = {1.0};
  law.type.sigma = Matrix(1, 1);
  law.type.sigma(0, 0) = 0.3;

  const std::vector<double> w{0.8, 0.1};
  const ControlGrid theta = ControlGrid::constant(vp->T, 32, w);
  // phi = x^2 + x z, cut off far outside the data.
  const TestFunction phi(1, 1, {Monomial{1.0, 0, {2}, {0}}, Monomial{1.0, 0, {1}, {1}}}, 10.0, 12.0);

  std::printf("     N   sup residual (mean of 8 seeds)\n");
  for (std::size_t n : {100, 400, 1600}) {
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 8; ++s) {
      const Dataset data = make_dataset(vp, law, n, derive_seed(5, "fpk-samples", s));
      const auto ens = simulate_particles(vp, theta, data.samples, data.types, 128,
                                          derive_seed(5, "fpk-noise", s), {}, data.ids);
      mean += fpk_residual(empirical_path(ens), theta, phi, vp).sup / 8.0;
    }
    std::printf("%6zu   %.4e\n", n, mean);
  }
  return 0;
}
