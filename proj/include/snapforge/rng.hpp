// SPDX-License-Identifier: MIT
//
// Deterministic random number helpers.
//
// std::mt19937_64 has a fully specified output sequence, so the generator
// itself is portable.  The standard *distributions* are not (their
// algorithms are implementation-defined), which would break the "same seed,
// bitwise identical problem" guarantee across toolchains.  The mappings
// below replace the distributions with fixed arithmetic.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace snapforge {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).  Simple rejection-free modulo is fine for the
  // small n used here; the slight bias is irrelevant for sample generation.
  std::uint64_t uniform_index(std::uint64_t n) { return engine_() % n; }

  // Uniformly distributed direction on the unit sphere (Marsaglia's polar
  // construction, written out so the draw order is pinned down).
  void unit_vector(double out[3]) {
    for (;;) {
      double u = uniform(-1.0, 1.0);
      double v = uniform(-1.0, 1.0);
      double s = u * u + v * v;
      if (s >= 1.0 || s == 0.0) continue;
      double f = 2.0 * std::sqrt(1.0 - s);
      out[0] = u * f;
      out[1] = v * f;
      out[2] = 1.0 - 2.0 * s;
      return;
    }
  }

  // Raw 64-bit draw, for callers that derive their own mapping.
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Uniformly random rotation matrix (row-major 3x3) via a quaternion drawn
// from the subgroup algorithm.  Used by the rotation-invariance oracle.
inline void random_rotation(Rng& rng, double R[3][3]) {
  double u1 = rng.uniform();
  double u2 = rng.uniform();
  double u3 = rng.uniform();
  constexpr double two_pi = 6.283185307179586476925286766559;
  double a = std::sqrt(1.0 - u1) * std::sin(two_pi * u2);
  double b = std::sqrt(1.0 - u1) * std::cos(two_pi * u2);
  double c = std::sqrt(u1) * std::sin(two_pi * u3);
  double d = std::sqrt(u1) * std::cos(two_pi * u3);
  R[0][0] = 1 - 2 * (c * c + d * d);
  R[0][1] = 2 * (b * c - a * d);
  R[0][2] = 2 * (b * d + a * c);
  R[1][0] = 2 * (b * c + a * d);
  R[1][1] = 1 - 2 * (b * b + d * d);
  R[1][2] = 2 * (c * d - a * b);
  R[2][0] = 2 * (b * d - a * c);
  R[2][1] = 2 * (c * d + a * b);
  R[2][2] = 1 - 2 * (b * b + c * c);
}

}  // namespace snapforge
