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

// mfres: experiment runner.
//
//   mfres <subcommand> --config FILE [--seed S] [--out DIR] [--n-list a,b,c] [--threads T]
//
// Subcommands: simulate, train, solve-limit, gamma, diagnose-fpk, gradcheck.
// Exit status 0 on success; otherwise the error name is printed to stderr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mfres/experiments.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::size_t> n_list;
  int threads = 1;
  bool dump_trajectories = false;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON experiment config")->required();
  sub->add_option("--seed", o.seed, "override the root seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--n-list", o.n_list, "override the sample-size list")->delimiter(',');
  sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
}

mfres::ExperimentConfig resolve(const std::string& kind, const Options& o) {
  mfres::ExperimentConfig c = mfres::load_config(o.config);
  c.kind = kind;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (!o.n_list.empty()) c.sampling.n_list = o.n_list;
  c.threads = o.threads;
  c.dump_trajectories = o.dump_trajectories;
  mfres::validate_experiment(c);
  return c;
}

int run(const std::string& kind, const mfres::ExperimentConfig& c) {
  using namespace mfres;
  if (kind == "simulate") {
    const auto r = run_simulate(c);
    std::printf("J_N = %.10g\n", r.cost.total);
  } else if (kind == "train") {
    const auto r = run_train(c);
    std::printf("min J_N = %.10g after %d iterations (grad norm %.3g)\n", r.history.back().total,
                r.iterations, r.grad_norm_final);
  } else if (kind == "solve-limit") {
    const auto r = run_solve_limit(c);
    std::printf("fixed point: %d iterations, residual %.3g, J^d = %.10g +- %.2g\n", r.fixed_point.iterations,
                r.residual.value, r.jd.estimate, r.jd.std_error);
  } else if (kind == "gamma") {
    const auto r = run_gamma(c);
    std::printf("spearman(N, gap) = %.4f (p = %.3g), theta improved in %.0f%% of draws\n",
                r.spearman_pooled, r.p_value, 100.0 * r.frac_theta_improved);
  } else if (kind == "diagnose-fpk") {
    const auto r = run_diagnose_fpk(c);
    std::printf("log-log slope = %.4f\n", r.fit.slope);
  } else if (kind == "gradcheck") {
    const auto r = run_gradcheck(c);
    std::printf("worst relative error = %.3g over %zu configurations\n", r.worst_rel_error, r.rows.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field residual network experiments"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::string> kinds{"simulate", "train", "solve-limit", "gamma", "diagnose-fpk", "gradcheck"};
  for (const auto& k : kinds) {
    auto* sub = app.add_subcommand(k, "run the " + k + " experiment");
    add_common(sub, opts);
    if (k == "simulate") sub->add_flag("--dump-trajectories", opts.dump_trajectories, "write trajectories.csv");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    return run(kind, resolve(kind, opts));
  } catch (const mfres::Error& e) {
    std::cerr << e.name() << '\n' << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "InternalError\n" << e.what() << '\n';
    return 3;
  }
}
