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
#include <set>

#include "mfres/rng.hpp"

using namespace mfres;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswerVectors) {
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (Philox4x32Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, UniformsLieInHalfOpenUnitInterval) {
  const StreamKey key{7, StreamTag::InitialSamples, 3};
  for (std::uint32_t i = 0; i < 10000; ++i) {
    const auto [a, b] = uniform_pair(key, i, 0);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_GT(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

TEST(Philox, NormalMomentsMatchStandardGaussian) {
  const StreamKey key{11, StreamTag::Brownian, 0};
  const int n = 100000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n / 2; ++i) {
    const auto [a, b] = normal_pair(key, static_cast<std::uint32_t>(i), 0);
    for (double v : {a, b}) {
      s += v;
      s2 += v * v;
      s4 += v * v * v * v;
    }
  }
  EXPECT_NEAR(s / n, 0.0, 0.015);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
}

TEST(Brownian, IncrementsHaveVarianceDt) {
  const double dt = 0.01;
  double s2 = 0.0;
  int count = 0;
  for (std::uint64_t id = 0; id < 200; ++id) {
    for (std::uint32_t k = 0; k < 100; ++k) {
      for (double v : brownian_increments(5, id, k, dt, 3)) {
        s2 += v * v;
        ++count;
      }
    }
  }
  EXPECT_NEAR(s2 / count / dt, 1.0, 0.02);
}

TEST(Brownian, StreamDependsOnlyOnSeedIdAndStep) {
  const auto a = brownian_increments(3, 42, 17, 0.1, 2);
  const auto b = brownian_increments(3, 42, 17, 0.1, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, brownian_increments(3, 43, 17, 0.1, 2));
  EXPECT_NE(a, brownian_increments(3, 42, 18, 0.1, 2));
  EXPECT_NE(a, brownian_increments(4, 42, 17, 0.1, 2));
}

TEST(DeriveSeed, DistinctLabelsAndIndicesGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (const char* label : {"samples", "noise", "replication", "limit-init"}) {
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(99, label, i));
  }
  EXPECT_EQ(seen.size(), 200u);
  EXPECT_EQ(derive_seed(1, "noise", 3), derive_seed(1, "noise", 3));
  EXPECT_NE(derive_seed(1, "noise", 3), derive_seed(2, "noise", 3));
}

TEST(UniformStream, IntegersCoverTheClosedRange) {
  UniformStream u(8);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const int k = u.integer(2, 5);
    ASSERT_GE(k, 2);
    ASSERT_LE(k, 5);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 4u);
}
