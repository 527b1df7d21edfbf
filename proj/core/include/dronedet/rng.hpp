// Copyright 2026 The dronedet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dronedet {

/// Seeded deterministic stream. The engine is std::mt19937_64, whose output
/// sequence is pinned by the standard; the variate mappings below are
/// hand-rolled so the same seed yields bit-identical draws on every build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Gamma(alpha, 1). Marsaglia-Tsang for alpha >= 1, boost by a power of a
  /// uniform for alpha < 1.
  double gamma(double alpha) {
    if (alpha < 1.0) {
      double u = uniform();
      if (u < 0x1.0p-53) u = 0x1.0p-53;
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 0x1.0p-53) u = 0x1.0p-53;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  /// Symmetric Beta(alpha, alpha) draw, used for mixup weights.
  double beta(double alpha) {
    double a = gamma(alpha);
    double b = gamma(alpha);
    double s = a + b;
    if (s <= 0.0) return 0.5;
    return a / s;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dronedet
