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

#include "mfres/rng.hpp"
#include "mfres/stats.hpp"

using namespace mfres;

TEST(Stats, MeanAndSampleDeviation) {
  EXPECT_DOUBLE_EQ(stats::mean({1.0, 2.0, 3.0, 6.0}), 3.0);
  EXPECT_DOUBLE_EQ(stats::stddev({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}), std::sqrt(32.0 / 7.0));
  EXPECT_EQ(stats::stddev({1.5}), 0.0);
  EXPECT_THROW(stats::mean({}), Error);
}

TEST(Stats, TiesShareTheirAverageRank) {
  EXPECT_EQ(stats::ranks({10.0, 20.0, 20.0, 30.0}), (std::vector<double>{1.0, 2.5, 2.5, 4.0}));
  EXPECT_EQ(stats::ranks({3.0, 1.0, 2.0}), (std::vector<double>{3.0, 1.0, 2.0}));
  EXPECT_EQ(stats::ranks({5.0, 5.0, 5.0}), (std::vector<double>{2.0, 2.0, 2.0}));
}

TEST(Stats, CorrelationsOfMonotoneData) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(stats::pearson(x, {3, 5, 7, 9, 11}), 1.0, 1e-15);
  EXPECT_NEAR(stats::pearson(x, {-1, -2, -3, -4, -5}), -1.0, 1e-15);
  EXPECT_NEAR(stats::spearman(x, {1, 8, 27, 64, 125}), 1.0, 1e-15);
  EXPECT_NEAR(stats::spearman(x, {9, 4, 1, 0.5, 0.1}), -1.0, 1e-15);
  // Hand-computed: d = (0, -1, 1, 0, 0), rho = 1 - 6 * 2 / (5 * 24).
  EXPECT_NEAR(stats::spearman(x, {1, 3, 2, 4, 5}), 0.9, 1e-15);
  EXPECT_THROW(stats::pearson({1.0}, {1.0}), Error);
}

// Two-sided 5% critical value of Student's t with 8 degrees of freedom is 2.306004.
TEST(Stats, PValueAgreesWithTabulatedCriticalValue) {
  const double t = 2.306004, df = 8.0;
  const double r = t / std::sqrt(df + t * t);
  EXPECT_NEAR(stats::correlation_p_value(r, 10), 0.05, 1e-6);
  EXPECT_NEAR(stats::correlation_p_value(-r, 10), 0.05, 1e-6);
  EXPECT_NEAR(stats::correlation_p_value(0.0, 10), 1.0, 1e-12);
  EXPECT_EQ(stats::correlation_p_value(1.0, 10), 0.0);
}

// Under independence the p-value is uniform: about 5% of null samples fall below 0.05.
TEST(Stats, PValueIsCalibratedUnderTheNull) {
  UniformStream u(9);
  int hits = 0;
  const int trials = 4000;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> x(12), y(12);
    for (auto& v : x) v = u.normal();
    for (auto& v : y) v = u.normal();
    if (stats::correlation_p_value(stats::pearson(x, y), 12) < 0.05) ++hits;
  }
  const double frac = static_cast<double>(hits) / trials;
  EXPECT_NEAR(frac, 0.05, 4.0 * std::sqrt(0.05 * 0.95 / trials));
}

TEST(Stats, LineFitByHand) {
  const auto exact = stats::fit_line({0, 1, 2, 3}, {3, 1, -1, -3});
  EXPECT_NEAR(exact.slope, -2.0, 1e-15);
  EXPECT_NEAR(exact.intercept, 3.0, 1e-15);
  EXPECT_NEAR(exact.slope_std_error, 0.0, 1e-15);
  // Residuals (-0.5, 1, -0.5): rss = 1.5, se = sqrt(1.5 / 1 / 2).
  const auto f = stats::fit_line({0, 1, 2}, {0, 2, 1});
  EXPECT_NEAR(f.slope, 0.5, 1e-15);
  EXPECT_NEAR(f.intercept, 0.5, 1e-15);
  EXPECT_NEAR(f.slope_std_error, std::sqrt(0.75), 1e-15);
}

TEST(Stats, LogLogSlopeOfAPowerLaw) {
  std::vector<double> n{100, 400, 1600, 6400}, y;
  for (double v : n) y.push_back(5.0 / std::sqrt(v));
  EXPECT_NEAR(stats::fit_loglog(n, y).slope, -0.5, 1e-12);
  EXPECT_THROW(stats::fit_loglog({1.0, 2.0}, {0.0, 1.0}), Error);
}
