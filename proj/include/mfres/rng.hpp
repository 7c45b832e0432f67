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

#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream tag, stream id, counter), so results never depend on
// evaluation order or on how particles are split across threads.
//
// Salmon et al. SC 2011. Parallel random numbers: as easy as 1, 2, 3.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace mfres {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

namespace detail {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void philox_round(Philox4x32Counter& c, const Philox4x32Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

// 53 random bits mapped to (0, 1]; never returns 0 so log() is safe.
constexpr double to_unit_open_left(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(bits & ((1ull << 53) - 1)) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

/// Philox4x32-10 block function.
constexpr Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    detail::philox_round(ctr, key);
  }
  return ctr;
}

/// Independent stream families. Distinct tags never share counters.
enum class StreamTag : std::uint16_t {
  Brownian = 1,
  InitialSamples = 2,
  TypeJitter = 3,
  TestInstances = 4,
};

/// Address of one random stream: a root seed, a family tag and a stable
/// per-stream identifier (for particles this is the per-sample id).
struct StreamKey {
  std::uint64_t seed = 0;
  StreamTag tag = StreamTag::Brownian;
  std::uint64_t id = 0;
};

/// Raw 128-bit block number `index`, sub-block `block`, of a stream.
inline Philox4x32Counter stream_block(const StreamKey& key, std::uint32_t index,
                                      std::uint16_t block) {
  const Philox4x32Counter ctr = {
      index,
      static_cast<std::uint32_t>(block) | (static_cast<std::uint32_t>(key.tag) << 16),
      static_cast<std::uint32_t>(key.id), static_cast<std::uint32_t>(key.id >> 32)};
  const Philox4x32Key k = {static_cast<std::uint32_t>(key.seed),
                           static_cast<std::uint32_t>(key.seed >> 32)};
  return philox4x32(ctr, k);
}

/// Two uniforms in (0, 1].
inline std::pair<double, double> uniform_pair(const StreamKey& key, std::uint32_t index,
                                              std::uint16_t block) {
  const auto r = stream_block(key, index, block);
  return {detail::to_unit_open_left(r[0], r[1]), detail::to_unit_open_left(r[2], r[3])};
}

/// Two independent standard normals (Box-Muller on one Philox block).
inline std::pair<double, double> normal_pair(const StreamKey& key, std::uint32_t index,
                                             std::uint16_t block) {
  const auto [u1, u2] = uniform_pair(key, index, block);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Fills `out` with i.i.d. N(0, dt) entries: the Brownian increment of stream
/// (root_seed, particle_id) over step `step_index`.
inline void brownian_increments(std::uint64_t root_seed, std::uint64_t particle_id,
                                std::uint32_t step_index, double dt, std::span<double> out) {
  const StreamKey key{root_seed, StreamTag::Brownian, particle_id};
  const double scale = std::sqrt(dt);
  for (std::size_t j = 0; j < out.size(); j += 2) {
    const auto [a, b] = normal_pair(key, step_index, static_cast<std::uint16_t>(j / 2));
    out[j] = scale * a;
    if (j + 1 < out.size()) out[j + 1] = scale * b;
  }
}

inline std::vector<double> brownian_increments(std::uint64_t root_seed, std::uint64_t particle_id,
                                               std::uint32_t step_index, double dt,
                                               std::size_t dim) {
  std::vector<double> out(dim);
  brownian_increments(root_seed, particle_id, step_index, dt, out);
  return out;
}

/// Hierarchical seed split: child = Philox(key = root, ctr = (hash(label), index)).
/// Adding a new label never changes the seeds handed out for existing ones.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                 std::uint64_t index = 0) {
  const std::uint64_t h = detail::fnv1a64(label);
  const Philox4x32Counter ctr = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                                 static_cast<std::uint32_t>(index),
                                 static_cast<std::uint32_t>(index >> 32)};
  const Philox4x32Key key = {static_cast<std::uint32_t>(root),
                             static_cast<std::uint32_t>(root >> 32)};
  const auto r = philox4x32(ctr, key);
  return (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
}

/// Sequential uniforms on one stream, for drawing test instances and random
/// configurations reproducibly.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed, std::uint64_t id = 0)
      : key_{seed, StreamTag::TestInstances, id} {}

  /// Uniform in (0, 1].
  double next() {
    if (!has_spare_) {
      const auto [a, b] = uniform_pair(key_, index_++, 0);
      spare_ = b;
      has_spare_ = true;
      return a;
    }
    has_spare_ = false;
    return spare_;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }
  /// Integer in [lo, hi].
  int integer(int lo, int hi) {
    const int span = hi - lo + 1;
    const int k = static_cast<int>(next() * span);
    return lo + (k >= span ? span - 1 : k);
  }
  double normal() {
    const double u1 = next(), u2 = next();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  StreamKey key_;
  std::uint32_t index_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mfres
