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

#include <filesystem>
#include <functional>
#include <fstream>

#include "mfres/experiments.hpp"

using namespace mfres;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::ConfigInvalid;
}

}  // namespace

TEST(Config, ParsesTheShippedGammaConfig) {
  const auto c = load_config(std::string(MFRES_CONFIG_DIR) + "/gamma.json");
  EXPECT_EQ(c.kind, "gamma");
  EXPECT_EQ(c.model.dims.d, 1u);
  EXPECT_EQ(c.model.activation.kind, ActivationKind::Tanh);
  EXPECT_DOUBLE_EQ(c.model.lambda1, 0.5);
  EXPECT_DOUBLE_EQ(c.model.lambda2, 0.05);
  EXPECT_DOUBLE_EQ(c.law.label_scale, 1.3);
  EXPECT_DOUBLE_EQ(c.law.type.epsilon(0, 0), 0.2);
  EXPECT_EQ(c.sampling.n_list, (std::vector<std::size_t>{50, 200, 800, 3200}));
  EXPECT_EQ(c.fixed_point.seed_policy, SeedPolicy::Fixed);
  EXPECT_NO_THROW(validate_params(c.model));
}

TEST(Config, EveryShippedConfigLoadsAndValidates) {
  for (const auto& entry : std::filesystem::directory_iterator(MFRES_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    const auto c = load_config(entry.path().string());
    EXPECT_NO_THROW(validate_params(c.model));
    EXPECT_NO_THROW(validate_experiment(c));
  }
}

TEST(Config, RoundTripKeepsTheHash) {
  const auto c = load_config(std::string(MFRES_CONFIG_DIR) + "/diagnose_fpk.json");
  const auto d = config_from_json(config_to_json(c));
  EXPECT_EQ(config_hash(c), config_hash(d));
  EXPECT_EQ(config_to_json(c), config_to_json(d));
}

TEST(Config, HashIgnoresOutputSettingsOnly) {
  ExperimentConfig c;
  const std::string h = config_hash(c);
  EXPECT_EQ(h.size(), 16u);
  ExperimentConfig d = c;
  d.out = "elsewhere";
  d.threads = 8;
  d.dump_trajectories = true;
  EXPECT_EQ(config_hash(d), h);
  d.seed += 1;
  EXPECT_NE(config_hash(d), h);
}

// Published 64-bit FNV-1a test vectors.
TEST(Config, HashFunctionMatchesReferenceVectors) {
  EXPECT_EQ(detail::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(detail::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(detail::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(kind_of([] { config_from_json(json{{"bogus", 1}}); }), ErrorKind::ConfigInvalid);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"model", {{"lamda1", 1.0}}}}); }), ErrorKind::ConfigInvalid);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"model", {{"activation", {{"kind", "relu"}}}}}}); }),
            ErrorKind::ConfigInvalid);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"seed", "abc"}}); }), ErrorKind::ConfigInvalid);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"law", {{"type", {{"epsilon", {{1.0, 2.0}}}}}}}}); }),
            ErrorKind::ConfigInvalid);
}

TEST(Config, SampleSizesMustIncrease) {
  ExperimentConfig c;
  c.kind = "gamma";
  c.sampling.n_list = {50, 50, 200};
  EXPECT_EQ(kind_of([&] { validate_experiment(c); }), ErrorKind::ConfigInvalid);
  c.sampling.n_list = {200, 50};
  EXPECT_EQ(kind_of([&] { validate_experiment(c); }), ErrorKind::ConfigInvalid);
  c.sampling.n_list = {50, 200};
  EXPECT_NO_THROW(validate_experiment(c));
}

TEST(Config, MissingOrMalformedFilesAreConfigErrors) {
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/config.json"); }), ErrorKind::ConfigInvalid);
  const auto path = std::filesystem::temp_directory_path() / "mfres_bad_config.json";
  std::ofstream(path) << "{ not json";
  EXPECT_EQ(kind_of([&] { load_config(path.string()); }), ErrorKind::ConfigInvalid);
  std::filesystem::remove(path);
}

TEST(Config, DerivedControlAndTestFunction) {
  ExperimentConfig c;
  c.model.dims = {1, 1, 1, 2, 1};
  c.intervals = 4;
  c.theta = {0.8, 0.1};
  const ControlGrid th = config_theta(c);
  EXPECT_EQ(th.nodes(), 5u);
  EXPECT_EQ(th(3, 0), 0.8);
  c.theta = {1.0};
  EXPECT_EQ(kind_of([&] { config_theta(c); }), ErrorKind::DimensionMismatch);
  const TestFunction phi = config_test_function(c);
  const std::vector<double> x{0.5}, z{-2.0};
  EXPECT_NEAR(phi.evaluate(0.0, x, z).value, 0.25 - 1.0, 1e-15);
}

TEST(Output, CsvCarriesTheHashAndFullPrecision) {
  CsvTable t("0123456789abcdef", {"a", "b"});
  t.row({fmt_double(0.1), fmt_double(1.0 / 3.0)});
  EXPECT_EQ(t.str(), "# config_hash=0123456789abcdef\na,b\n0.10000000000000001,0.33333333333333331\n");
  EXPECT_EQ(std::stod(fmt_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_THROW(t.row({"1"}), Error);
}

TEST(Output, AtomicWriteLeavesNoTemporaryFile) {
  const auto dir = std::filesystem::temp_directory_path() / "mfres_atomic_test";
  std::filesystem::remove_all(dir);
  write_atomic(dir.string(), "x.csv", "hello\n");
  std::ifstream in(dir / "x.csv");
  std::string s;
  std::getline(in, s);
  EXPECT_EQ(s, "hello");
  EXPECT_FALSE(std::filesystem::exists(dir / "x.csv.tmp"));
  std::filesystem::remove_all(dir);
}
