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

// Solves the first-order condition of the mean-field problem by damped
// fixed-point iteration and prints the control with its certificate.
//
//   demo_limit_control [config.json]

#include <cstdio>
#include <string>

#include "mfres/experiments.hpp"

int main(int argc, char** argv) {
  using namespace mfres;
  const std::string path = argc > 1 ? argv[1] : MFRES_CONFIG_DIR "/solve_limit.json";
  ExperimentConfig c = load_config(path);
  c.out.clear();
  validate_experiment(c);

  const ValidatedParams vp = validate_params(c.model);
  const SolveLimitReport rep = solve_limit(c, vp, "limit");
  const auto& fp = rep.fixed_point;

  std::printf("%d iterations, last change %.2e\n", fp.iterations, fp.trace.back());
  std::printf("first-order residual %.3e (Monte Carlo std error %.1e)\n", rep.residual.value,
              rep.residual.max_std_error);
  const auto b = boundary_derivatives(fp.theta_star);
  std::printf("|theta'(0)| = %.2e, |theta'(T)| = %.2e\n", b.at_zero, b.at_T);
  std::printf("J^d(theta*) = %.6f +- %.6f\n\n", rep.jd.estimate, rep.jd.std_error);
  std::printf("   t     W(t)      b(t)\n");
  for (std::size_t k = 0; k < fp.theta_star.nodes(); k += 4) {
    std::printf("%5.2f  %8.4f  %8.4f\n", fp.theta_star.time(k), fp.theta_star(k, 0), fp.theta_star(k, 1));
  }
  return 0;
}
