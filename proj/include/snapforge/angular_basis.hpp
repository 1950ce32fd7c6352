// SPDX-License-Identifier: MIT
//
// Angular basis: 3-sphere projection, radial switching, coupling
// coefficients, and the level-recursive rotation matrices with analytic
// derivatives.
//
// A neighbor displacement is mapped to a point on the unit 3-sphere via the
// Cayley-Klein pair (a, b); the rotation-matrix stack u^t is then built one
// level at a time: each element of level t is a two-term combination of
// elements of level t-1 weighted by sqrt(p/q) factors.  Only rows with
// 2*mb <= t are ever computed directly; the remaining rows follow from the
// index-reversal symmetry (see halfint_index.hpp for the convention).
//
// Everything is done in the integer twoj bookkeeping of halfint_index.hpp.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "snapforge/common.hpp"
#include "snapforge/complex.hpp"
#include "snapforge/halfint_index.hpp"
#include "snapforge/tolerances.hpp"

namespace snapforge {

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;

// Factorials as doubles.  Exact up to 22!, plenty accurate above; the cap
// covers every band limit this library accepts.
inline constexpr int kMaxFactorial = 64;

inline double factorial(int n) {
  static const std::array<double, kMaxFactorial + 1> table = [] {
    std::array<double, kMaxFactorial + 1> t{};
    t[0] = 1.0;
    for (int i = 1; i <= kMaxFactorial; ++i) t[i] = t[i - 1] * i;
    return t;
  }();
  require(n >= 0 && n <= kMaxFactorial, "factorial: argument out of range");
  return table[static_cast<std::size_t>(n)];
}

// sqrt(p/q) lookup used by the level recursion (p, q >= 1).
inline constexpr int kMaxRootPq = 64;

inline double rootpq(int p, int q) {
  static const std::array<double, (kMaxRootPq + 1) * (kMaxRootPq + 1)> table =
      [] {
        std::array<double, (kMaxRootPq + 1) * (kMaxRootPq + 1)> t{};
        for (int pp = 1; pp <= kMaxRootPq; ++pp)
          for (int qq = 1; qq <= kMaxRootPq; ++qq)
            t[pp * (kMaxRootPq + 1) + qq] =
                std::sqrt(static_cast<double>(pp) / static_cast<double>(qq));
        return t;
      }();
  return table[p * (kMaxRootPq + 1) + q];
}

// Triangle normalization of a coupling block.
inline double deltacg(TwoJ j1, TwoJ j2, TwoJ j) {
  double sfaccg = factorial((j1 + j2 + j) / 2 + 1);
  return std::sqrt(factorial((j1 + j2 - j) / 2) * factorial((j1 - j2 + j) / 2) *
                   factorial((-j1 + j2 + j) / 2) / sfaccg);
}

}  // namespace detail

// --- radial switching ------------------------------------------------------

// Smooth cutoff fc(r) together with its radial derivative.  fc is 1 at and
// below rmin0, rolls off as a half cosine, and reaches 0 at rcut.
inline std::pair<double, double> switching_function(double r, double rcut,
                                                    double rmin0) {
  detail::require(rcut > rmin0, "switching_function: Rcut must exceed rmin0");
  if (r <= rmin0) return {1.0, 0.0};
  if (r >= rcut) return {0.0, 0.0};
  const double scale = detail::kPi / (rcut - rmin0);
  const double fc = 0.5 * (std::cos((r - rmin0) * scale) + 1.0);
  const double dfc = -0.5 * std::sin((r - rmin0) * scale) * scale;
  return {fc, dfc};
}

// --- 3-sphere projection ----------------------------------------------------

// A displacement mapped onto the unit 3-sphere: the Cayley-Klein pair (a, b)
// with |a|^2 + |b|^2 = 1, plus the Cartesian gradients of both.
struct SphereMap {
  double r = 0.0;        // |displacement|
  double theta0 = 0.0;   // polar rescaling angle
  double z0 = 0.0;       // r / tan(theta0)
  double rhat[3] = {0, 0, 0};  // unit direction of the displacement
  Complex a, b;
  Complex da[3], db[3];
};

inline SphereMap map_to_3sphere(const double disp[3], double rcut, double rmin0,
                                double rfac0) {
  detail::require(rcut > rmin0, "map_to_3sphere: Rcut must exceed rmin0");
  const double x = disp[0], y = disp[1], z = disp[2];
  const double rsq = x * x + y * y + z * z;
  detail::require(rsq > 0.0, "map_to_3sphere: zero-length displacement");
  const double r = std::sqrt(rsq);
  detail::require(r < rcut, "map_to_3sphere: displacement at or beyond Rcut");

  SphereMap m;
  m.r = r;
  const double rscale0 = rfac0 * detail::kPi / (rcut - rmin0);
  m.theta0 = (r - rmin0) * rscale0;
  m.z0 = r / std::tan(m.theta0);

  const double r0inv = 1.0 / std::sqrt(rsq + m.z0 * m.z0);
  m.a = {r0inv * m.z0, -r0inv * z};
  m.b = {r0inv * y, -r0inv * x};

  // Gradients.  dz0/dr follows from differentiating r/tan(theta0(r)); the
  // remaining pieces are the chain rule through r0inv and the direct
  // dependence of (a, b) on the Cartesian components.
  const double dz0dr =
      m.z0 / r - (r * rscale0) * (rsq + m.z0 * m.z0) / rsq;
  const double dr0invdr = -r0inv * r0inv * r0inv * (r + m.z0 * dz0dr);
  m.rhat[0] = x / r;
  m.rhat[1] = y / r;
  m.rhat[2] = z / r;
  for (int k = 0; k < 3; ++k) {
    const double dr0inv = dr0invdr * m.rhat[k];
    m.da[k] = {dz0dr * m.rhat[k] * r0inv + m.z0 * dr0inv, -z * dr0inv};
    m.db[k] = {y * dr0inv, -x * dr0inv};
  }
  m.da[2].im += -r0inv;
  m.db[0].im += -r0inv;
  m.db[1].re += r0inv;
  return m;
}

// --- coupling coefficients --------------------------------------------------

// Coefficient table laid out per HalfIntIndexMaps::cg_offset: one block per
// coupling tuple (twoj1 >= twoj2, target twoj), indexed row-major by the
// factor projections (m1, m2), m1 in 0..twoj1, m2 in 0..twoj2.
struct CGTable {
  TwoJ twojmax = 0;
  std::vector<double> values;
};

inline CGTable compute_cg_table(TwoJ twojmax, const HalfIntIndexMaps& maps) {
  detail::require(twojmax == maps.twojmax,
                  "compute_cg_table: maps built for a different band limit");
  CGTable cg;
  cg.twojmax = twojmax;
  cg.values.assign(static_cast<std::size_t>(maps.cg_total), 0.0);

  for (const ZTuple& t : maps.z_tuples) {
    const TwoJ j1 = t.twoj1, j2 = t.twoj2, j = t.twoj;
    std::int64_t idx = t.cg_offset;
    for (int m1 = 0; m1 <= j1; ++m1) {
      const int aa2 = 2 * m1 - j1;
      for (int m2 = 0; m2 <= j2; ++m2, ++idx) {
        const int bb2 = 2 * m2 - j2;
        const int m = (aa2 + bb2 + j) / 2;
        if (m < 0 || m > j) continue;  // projection falls outside the target

        double sum = 0.0;
        const int zlo = std::max(0, std::max(-(j - j2 + aa2) / 2,
                                             -(j - j1 - bb2) / 2));
        const int zhi = std::min((j1 + j2 - j) / 2,
                                 std::min((j1 - aa2) / 2, (j2 + bb2) / 2));
        for (int zz = zlo; zz <= zhi; ++zz) {
          const double ifac = (zz % 2) ? -1.0 : 1.0;
          sum += ifac /
                 (detail::factorial(zz) *
                  detail::factorial((j1 + j2 - j) / 2 - zz) *
                  detail::factorial((j1 - aa2) / 2 - zz) *
                  detail::factorial((j2 + bb2) / 2 - zz) *
                  detail::factorial((j - j2 + aa2) / 2 + zz) *
                  detail::factorial((j - j1 - bb2) / 2 + zz));
        }

        const int cc2 = 2 * m - j;
        double norm = std::sqrt(
            detail::factorial((j1 + aa2) / 2) * detail::factorial((j1 - aa2) / 2) *
            detail::factorial((j2 + bb2) / 2) * detail::factorial((j2 - bb2) / 2) *
            detail::factorial((j + cc2) / 2) * detail::factorial((j - cc2) / 2) *
            (j + 1));
        cg.values[static_cast<std::size_t>(idx)] =
            sum * detail::deltacg(j1, j2, j) * norm;
      }
    }
  }
  return cg;
}

// --- rotation-matrix stacks -------------------------------------------------

enum class UStorage { full, half };

// Stack of per-level rotation matrices for one mapped displacement, plus
// (optionally) the Cartesian gradient stack filled by compute_du_matrices.
// The matrices here are unweighted; radial switching and neighbor weights
// are applied where the stack is consumed.
struct WignerStack {
  TwoJ twojmax = 0;
  UStorage storage = UStorage::full;
  std::vector<Complex> u;
  std::array<std::vector<Complex>, 3> du;

  bool has_du() const { return !du[0].empty(); }

  std::int64_t level_offset(TwoJ t) const {
    return storage == UStorage::full ? u_total_elements(t - 1)
                                     : u_half_elements(t - 1);
  }

  // Element (mb, ma) of level t; for half storage only stored rows.
  Complex at(TwoJ t, int mb, int ma) const {
    return u[static_cast<std::size_t>(level_offset(t) + mb * (t + 1) + ma)];
  }
};

namespace detail {

// One wavefront step of the level recursion: builds the rows 2*mb <= t of
// level t (cur) from the half rows of level t-1 (prev).  For even t the
// middle-row operands of the previous level are not stored; they are
// recovered through the index-reversal symmetry, which is exact, so a stack
// assembled from these steps is bit-identical to compressing a full stack.
inline void wigner_u_level_half(Complex a, Complex b, TwoJ t,
                                const Complex* prev, Complex* cur) {
  const int cols = t + 1;
  const int cols_prev = t;
  for (int mb = 0; 2 * mb <= t; ++mb) {
    Complex* row = cur + mb * cols;
    row[0] = {0.0, 0.0};
    const bool mirror_prev = 2 * mb > t - 1;
    for (int ma = 0; ma < t; ++ma) {
      Complex up;
      if (!mirror_prev) {
        up = prev[mb * cols_prev + ma];
      } else {
        Complex s = prev[(t - 1 - mb) * cols_prev + (t - 1 - ma)];
        const double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
        up = {sign * s.re, -sign * s.im};
      }
      double rp = rootpq(t - ma, t - mb);
      row[ma].re += rp * (a.re * up.re + a.im * up.im);
      row[ma].im += rp * (a.re * up.im - a.im * up.re);
      rp = rootpq(ma + 1, t - mb);
      row[ma + 1].re = -rp * (b.re * up.re + b.im * up.im);
      row[ma + 1].im = -rp * (b.re * up.im - b.im * up.re);
    }
  }
}

// Companion step for one Cartesian direction of the gradient: product rule
// through (a, b) with the same wavefront and the same middle-row recovery
// (the gradient stack obeys the same index-reversal symmetry).
inline void wigner_du_level_half(Complex a, Complex b, Complex da, Complex db,
                                 TwoJ t, const Complex* uprev,
                                 const Complex* duprev, Complex* ducur) {
  const int cols = t + 1;
  const int cols_prev = t;
  for (int mb = 0; 2 * mb <= t; ++mb) {
    Complex* row = ducur + mb * cols;
    row[0] = {0.0, 0.0};
    const bool mirror_prev = 2 * mb > t - 1;
    for (int ma = 0; ma < t; ++ma) {
      Complex up, dup;
      if (!mirror_prev) {
        up = uprev[mb * cols_prev + ma];
        dup = duprev[mb * cols_prev + ma];
      } else {
        const std::int64_t src = (t - 1 - mb) * cols_prev + (t - 1 - ma);
        const double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
        Complex su = uprev[src];
        Complex sd = duprev[src];
        up = {sign * su.re, -sign * su.im};
        dup = {sign * sd.re, -sign * sd.im};
      }
      double rp = rootpq(t - ma, t - mb);
      row[ma].re += rp * (da.re * up.re + da.im * up.im +
                          a.re * dup.re + a.im * dup.im);
      row[ma].im += rp * (da.re * up.im - da.im * up.re +
                          a.re * dup.im - a.im * dup.re);
      rp = rootpq(ma + 1, t - mb);
      row[ma + 1].re = -rp * (db.re * up.re + db.im * up.im +
                              b.re * dup.re + b.im * dup.im);
      row[ma + 1].im = -rp * (db.re * up.im - db.im * up.re +
                              b.re * dup.im - b.im * dup.re);
    }
  }
}

// Level recursion for the rotation matrices, writing a full or half stack
// into caller-provided storage (u_total_elements / u_half_elements entries).
inline void wigner_u_recursion(Complex a, Complex b, TwoJ twojmax, bool half,
                               Complex* out) {
  out[0] = {1.0, 0.0};
  std::int64_t off = 1;       // start of current level
  std::int64_t off_prev = 0;  // start of previous level
  for (TwoJ t = 1; t <= twojmax; ++t) {
    const int cols = t + 1;
    Complex* cur = out + off;
    const Complex* prev = out + off_prev;

    // In full storage the previous level's rows 2*mb <= t-1 sit at the same
    // offsets as in half storage, and the mirror pass below reproduces the
    // parity recovery bit-for-bit, so one wavefront serves both forms.
    wigner_u_level_half(a, b, t, prev, cur);

    if (!half) {
      // Mirror the strict rows onto 2*mb > t.
      for (int mb = 0; 2 * mb < t; ++mb)
        for (int ma = 0; ma <= t; ++ma) {
          Complex s = cur[mb * cols + ma];
          const double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
          cur[(t - mb) * cols + (t - ma)] = {sign * s.re, -sign * s.im};
        }
    }

    off_prev = off;
    off += half ? HalfIntIndexMaps::half_block(t)
                : HalfIntIndexMaps::full_block(t);
  }
}

// Gradient recursion (full storage): product rule through (a, b) against a
// full u stack produced by wigner_u_recursion.  Writes the raw gradient of
// the unweighted matrices; radial weighting is applied by callers.
inline void wigner_du_recursion(const SphereMap& m, TwoJ twojmax,
                                const Complex* u, Complex* const du[3]) {
  for (int k = 0; k < 3; ++k) du[k][0] = {0.0, 0.0};
  std::int64_t off = 1;
  std::int64_t off_prev = 0;
  const Complex a = m.a, b = m.b;
  for (TwoJ t = 1; t <= twojmax; ++t) {
    const int cols = t + 1;
    const int cols_prev = t;
    for (int mb = 0; 2 * mb <= t; ++mb) {
      for (int k = 0; k < 3; ++k) du[k][off + mb * cols] = {0.0, 0.0};
      for (int ma = 0; ma < t; ++ma) {
        const std::int64_t ip = off_prev + mb * cols_prev + ma;
        const std::int64_t ic = off + mb * cols + ma;
        const Complex up = u[ip];
        const double rpa = rootpq(t - ma, t - mb);
        const double rpb = rootpq(ma + 1, t - mb);
        for (int k = 0; k < 3; ++k) {
          const Complex dup = du[k][ip];
          const Complex da = m.da[k], db = m.db[k];
          du[k][ic].re += rpa * (da.re * up.re + da.im * up.im +
                                 a.re * dup.re + a.im * dup.im);
          du[k][ic].im += rpa * (da.re * up.im - da.im * up.re +
                                 a.re * dup.im - a.im * dup.re);
          du[k][ic + 1].re = -rpb * (db.re * up.re + db.im * up.im +
                                     b.re * dup.re + b.im * dup.im);
          du[k][ic + 1].im = -rpb * (db.re * up.im - db.im * up.re +
                                     b.re * dup.im - b.im * dup.re);
        }
      }
    }
    for (int mb = 0; 2 * mb < t; ++mb)
      for (int ma = 0; ma <= t; ++ma) {
        const double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
        for (int k = 0; k < 3; ++k) {
          Complex s = du[k][off + mb * cols + ma];
          du[k][off + (t - mb) * cols + (t - ma)] = {sign * s.re, -sign * s.im};
        }
      }
    off_prev = off;
    off += HalfIntIndexMaps::full_block(t);
  }
}

}  // namespace detail

// Rotation-matrix stack for one mapped displacement.  u^0 = [1] exactly.
inline WignerStack compute_u_matrices(const SphereMap& map, TwoJ twojmax,
                                      UStorage storage = UStorage::full) {
  detail::require(twojmax >= 0 && twojmax + 1 <= detail::kMaxRootPq,
                  "compute_u_matrices: band limit out of range");
  WignerStack s;
  s.twojmax = twojmax;
  s.storage = storage;
  s.u.resize(static_cast<std::size_t>(storage == UStorage::full
                                          ? u_total_elements(twojmax)
                                          : u_half_elements(twojmax)));
  detail::wigner_u_recursion(map.a, map.b, twojmax, storage == UStorage::half,
                             s.u.data());
  return s;
}

// Fills ustack.du with the Cartesian gradient of the radially weighted stack
// fc * u, where fc is the (already neighbor-weighted, if desired) switching
// value and dfc_dr its radial derivative:
//
//     du[k] = dfc_dr * rhat_k * u  +  fc * (raw gradient of u).
//
// Requires a full-storage stack; the level-0 gradient is dfc_dr * rhat * u_0.
inline void compute_du_matrices(const SphereMap& map, WignerStack& ustack,
                                TwoJ twojmax, double fc, double dfc_dr) {
  detail::require(ustack.storage == UStorage::full,
                  "compute_du_matrices: full-storage stack required");
  detail::require(ustack.twojmax == twojmax,
                  "compute_du_matrices: band limit mismatch");
  const std::size_t n = ustack.u.size();
  for (int k = 0; k < 3; ++k) ustack.du[k].assign(n, Complex{});
  Complex* du[3] = {ustack.du[0].data(), ustack.du[1].data(),
                    ustack.du[2].data()};
  detail::wigner_du_recursion(map, twojmax, ustack.u.data(), du);

  for (int k = 0; k < 3; ++k) {
    const double dsf = dfc_dr * map.rhat[k];
    for (std::size_t i = 0; i < n; ++i) {
      Complex& d = ustack.du[k][i];
      d.re = dsf * ustack.u[i].re + fc * d.re;
      d.im = dsf * ustack.u[i].im + fc * d.im;
    }
  }
}

}  // namespace snapforge
