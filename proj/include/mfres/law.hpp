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

// Initial sample law: i.i.d. draws, uniform on a sub-box of [-K, K], with
// labels produced by an affine teacher map plus bounded noise.

#include <cstdint>
#include <vector>

#include "mfres/model.hpp"
#include "mfres/rng.hpp"

namespace mfres {

struct SampleLaw {
  double x_lo = -1.0, x_hi = 1.0;  // X(0) ~ U[x_lo, x_hi]^d
  double z_lo = -1.0, z_hi = 1.0;  // Z(0) ~ U[z_lo, z_hi]^q
  double label_scale = 1.0;        // Y(0) = scale * X(0) + shift + noise * U[-1, 1]
  double label_shift = 0.0;
  double label_noise = 0.0;
  TypeVector type;                 // common type xi
  double type_jitter = 0.0;        // entries scaled by 1 + jitter * U[-1, 1], i.i.d. per sample
};

/// Samples [first_id, first_id + n) of the i.i.d. sequence; sample i only
/// depends on (seed, i), so prefixes of larger draws coincide.
inline std::vector<TrainingSample> draw_samples(const ValidatedParams& vp, const SampleLaw& law,
                                                std::size_t n, std::uint64_t seed,
                                                std::uint64_t first_id = 0) {
  const Dims& dm = vp.dims();
  std::vector<TrainingSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const StreamKey key{seed, StreamTag::InitialSamples, first_id + i};
    std::vector<double> u;
    u.reserve(2 * dm.d + dm.q + 2);
    for (std::uint32_t c = 0; u.size() < 2 * dm.d + dm.q; ++c) {
      const auto [a, b] = uniform_pair(key, c, 0);
      u.push_back(a);
      u.push_back(b);
    }
    auto& s = out[i];
    s.x0.resize(dm.d);
    s.y0.resize(dm.d);
    s.z0.resize(dm.q);
    std::size_t at = 0;
    for (auto& v : s.x0) v = law.x_lo + (law.x_hi - law.x_lo) * u[at++];
    for (std::size_t r = 0; r < dm.d; ++r) {
      s.y0[r] = law.label_scale * s.x0[r] + law.label_shift + law.label_noise * (2.0 * u[at++] - 1.0);
    }
    for (auto& v : s.z0) v = law.z_lo + (law.z_hi - law.z_lo) * u[at++];
    validate_sample(vp, s);
  }
  return out;
}

inline std::vector<TypeVector> draw_types(const ValidatedParams& vp, const SampleLaw& law,
                                          std::size_t n, std::uint64_t seed,
                                          std::uint64_t first_id = 0) {
  validate_type(vp, law.type);
  std::vector<TypeVector> out(n, law.type);
  if (law.type_jitter == 0.0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const StreamKey key{seed, StreamTag::TypeJitter, first_id + i};
    std::uint32_t c = 0;
    std::vector<double> u;
    auto next = [&]() {
      if (u.empty()) {
        const auto [a, b] = uniform_pair(key, c++, 0);
        u = {b, a};
      }
      const double v = u.back();
      u.pop_back();
      return 1.0 + law.type_jitter * (2.0 * v - 1.0);
    };
    for (double& e : out[i].epsilon.data) e *= next();
    for (double& g : out[i].gamma) g *= next();
    for (double& s : out[i].sigma.data) s *= next();
    validate_type(vp, out[i]);
  }
  return out;
}

}  // namespace mfres
