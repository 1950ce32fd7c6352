// SPDX-License-Identifier: MIT
//
// Half-integer index bookkeeping.
//
// Angular-momentum levels are tracked by the integer twoj = 2j so that
// half-integer labels never touch floating point.  This module owns every
// index map the pipelines use:
//
//   * flat offsets of the per-level rotation-matrix blocks, in both full
//     (all rows) and half (rows with 2*mb <= twoj) storage,
//   * the canonical bispectrum triple list,
//   * the coupling-product tuple list (all admissible factor pairs and
//     target levels) together with its element and coefficient offsets,
//   * dense (twoj1, twoj2, twoj) lookup tables for both lists.
//
// Row/column convention (used everywhere in this project): a level block of
// order twoj = t is a (t+1) x (t+1) matrix indexed by the projection pair
// (mb, ma), both counted 0..t, stored row-major with mb as the row:
//
//     element(t, mb, ma)  lives at  block_offset[t] + mb*(t+1) + ma.
//
// Half storage keeps the rows with 2*mb <= t; for even t the middle row
// (2*mb == t) is kept in full.  The discarded rows are recovered from
//
//     u(t-mb, t-ma) = (-1)^(ma+mb) * conj(u(mb, ma)).

#pragma once

#include <cstdint>
#include <vector>

#include "snapforge/common.hpp"
#include "snapforge/complex.hpp"

namespace snapforge {

// Integer-doubled angular momentum label (twoj = 2j).
using TwoJ = int;

// A canonical bispectrum triple: twoj >= twoj1 >= twoj2 with
// |twoj1 - twoj2| <= twoj <= twoj1 + twoj2 and twoj1 + twoj2 + twoj even.
struct BispectrumTriple {
  TwoJ twoj1 = 0;
  TwoJ twoj2 = 0;
  TwoJ twoj = 0;

  friend bool operator==(const BispectrumTriple&,
                         const BispectrumTriple&) = default;
};

// One coupling-product tuple: factor levels twoj1 >= twoj2 coupling into
// target level twoj (all admissible targets, not only canonical ones).
// elem_offset locates the tuple's block of (twoj/2+1)*(twoj+1) half-stored
// elements inside a per-atom coupling array; cg_offset locates its
// coefficient block of (twoj1+1)*(twoj2+1) values in the coefficient table.
struct ZTuple {
  TwoJ twoj1 = 0;
  TwoJ twoj2 = 0;
  TwoJ twoj = 0;
  std::int64_t elem_offset = 0;
  std::int64_t cg_offset = 0;
};

struct HalfIntIndexMaps {
  TwoJ twojmax = 0;

  // Flat offsets of level blocks; entry twojmax+1 is the total element count.
  std::vector<std::int64_t> u_block_offset;  // full blocks, (t+1)^2 each
  std::vector<std::int64_t> u_half_offset;   // half blocks, (t/2+1)*(t+1) each

  // Canonical triples in lexicographic (twoj1, twoj2, twoj) order.
  std::vector<BispectrumTriple> z_triples;

  // All coupling tuples in lexicographic (twoj1, twoj2, twoj) order.
  std::vector<ZTuple> z_tuples;
  std::int64_t z_total_elements = 0;

  // Total number of coupling coefficients across all tuples.
  std::int64_t cg_total = 0;

  static HalfIntIndexMaps build(TwoJ twojmax);

  // --- sizes -------------------------------------------------------------

  std::int64_t u_full_total() const { return u_block_offset.back(); }
  std::int64_t u_half_total() const { return u_half_offset.back(); }
  std::int64_t n_triples() const {
    return static_cast<std::int64_t>(z_triples.size());
  }

  static int full_rows(TwoJ t) { return t + 1; }
  static int half_rows(TwoJ t) { return t / 2 + 1; }
  static std::int64_t full_block(TwoJ t) {
    return static_cast<std::int64_t>(t + 1) * (t + 1);
  }
  static std::int64_t half_block(TwoJ t) {
    return static_cast<std::int64_t>(t / 2 + 1) * (t + 1);
  }

  // --- dense lookups -----------------------------------------------------

  // Offset of the coefficient block for (twoj1, twoj2, twoj); -1 when the
  // combination is not admissible or not stored (twoj1 < twoj2).
  std::int64_t cg_offset(TwoJ twoj1, TwoJ twoj2, TwoJ twoj) const {
    return cg_off_flat_[dense_index(twoj1, twoj2, twoj)];
  }

  // Index into z_triples for a canonical triple; -1 otherwise.
  std::int32_t triple_index(TwoJ twoj1, TwoJ twoj2, TwoJ twoj) const {
    return triple_flat_[dense_index(twoj1, twoj2, twoj)];
  }

  // Index into z_tuples; -1 when not admissible.
  std::int32_t tuple_index(TwoJ twoj1, TwoJ twoj2, TwoJ twoj) const {
    return tuple_flat_[dense_index(twoj1, twoj2, twoj)];
  }

 private:
  std::size_t dense_index(TwoJ a, TwoJ b, TwoJ c) const {
    const std::size_t n = static_cast<std::size_t>(twojmax) + 1;
    return (static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)) * n +
           static_cast<std::size_t>(c);
  }

  std::vector<std::int64_t> cg_off_flat_;
  std::vector<std::int32_t> triple_flat_;
  std::vector<std::int32_t> tuple_flat_;
};

// Canonical bispectrum triples for a given band limit, lexicographic in
// (twoj1, twoj2, twoj).
inline std::vector<BispectrumTriple> enumerate_bispectrum_triples(TwoJ twojmax) {
  detail::require(twojmax >= 0, "enumerate_bispectrum_triples: twojmax < 0");
  std::vector<BispectrumTriple> out;
  for (TwoJ j1 = 0; j1 <= twojmax; ++j1)
    for (TwoJ j2 = 0; j2 <= j1; ++j2)
      for (TwoJ j = j1 - j2; j <= (j1 + j2 < twojmax ? j1 + j2 : twojmax);
           j += 2)
        if (j >= j1) out.push_back({j1, j2, j});
  return out;
}

inline std::int64_t u_total_elements(TwoJ twojmax) {
  std::int64_t n = 0;
  for (TwoJ t = 0; t <= twojmax; ++t) n += HalfIntIndexMaps::full_block(t);
  return n;
}

inline std::int64_t u_half_elements(TwoJ twojmax) {
  std::int64_t n = 0;
  for (TwoJ t = 0; t <= twojmax; ++t) n += HalfIntIndexMaps::half_block(t);
  return n;
}

inline HalfIntIndexMaps HalfIntIndexMaps::build(TwoJ twojmax) {
  detail::require(twojmax >= 0, "HalfIntIndexMaps: twojmax < 0");
  HalfIntIndexMaps m;
  m.twojmax = twojmax;

  m.u_block_offset.resize(static_cast<std::size_t>(twojmax) + 2, 0);
  m.u_half_offset.resize(static_cast<std::size_t>(twojmax) + 2, 0);
  for (TwoJ t = 0; t <= twojmax; ++t) {
    m.u_block_offset[t + 1] = m.u_block_offset[t] + full_block(t);
    m.u_half_offset[t + 1] = m.u_half_offset[t] + half_block(t);
  }

  m.z_triples = enumerate_bispectrum_triples(twojmax);

  const std::size_t dense = (static_cast<std::size_t>(twojmax) + 1) *
                            (static_cast<std::size_t>(twojmax) + 1) *
                            (static_cast<std::size_t>(twojmax) + 1);
  m.cg_off_flat_.assign(dense, -1);
  m.triple_flat_.assign(dense, -1);
  m.tuple_flat_.assign(dense, -1);

  for (std::size_t i = 0; i < m.z_triples.size(); ++i) {
    const auto& b = m.z_triples[i];
    m.triple_flat_[m.dense_index(b.twoj1, b.twoj2, b.twoj)] =
        static_cast<std::int32_t>(i);
  }

  // Coupling tuples cover every admissible target, and their coefficient
  // blocks are laid out in the same sweep.
  std::int64_t elem_off = 0;
  std::int64_t cg_off = 0;
  for (TwoJ j1 = 0; j1 <= twojmax; ++j1)
    for (TwoJ j2 = 0; j2 <= j1; ++j2)
      for (TwoJ j = j1 - j2; j <= (j1 + j2 < twojmax ? j1 + j2 : twojmax);
           j += 2) {
        m.cg_off_flat_[m.dense_index(j1, j2, j)] = cg_off;
        m.tuple_flat_[m.dense_index(j1, j2, j)] =
            static_cast<std::int32_t>(m.z_tuples.size());
        m.z_tuples.push_back({j1, j2, j, elem_off, cg_off});
        elem_off += half_block(j);
        cg_off += static_cast<std::int64_t>(j1 + 1) * (j2 + 1);
      }
  m.z_total_elements = elem_off;
  m.cg_total = cg_off;
  return m;
}

// Expands a half-stored stack of level blocks (levels 0..twojmax) to full
// storage using the index-reversal symmetry.  Stored rows are copied
// bit-for-bit; mirrored rows are synthesized.
inline std::vector<Complex> half_to_full_expand(const std::vector<Complex>& half,
                                                TwoJ twojmax) {
  detail::require(static_cast<std::int64_t>(half.size()) ==
                      u_half_elements(twojmax),
                  "half_to_full_expand: wrong input size");
  std::vector<Complex> full(static_cast<std::size_t>(u_total_elements(twojmax)));
  std::int64_t hoff = 0;
  std::int64_t foff = 0;
  for (TwoJ t = 0; t <= twojmax; ++t) {
    const int cols = t + 1;
    for (int mb = 0; mb <= t; ++mb)
      for (int ma = 0; ma <= t; ++ma) {
        if (2 * mb <= t) {
          full[foff + mb * cols + ma] = half[hoff + mb * cols + ma];
        } else {
          Complex src = half[hoff + (t - mb) * cols + (t - ma)];
          double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
          full[foff + mb * cols + ma] = {sign * src.re, -sign * src.im};
        }
      }
    hoff += HalfIntIndexMaps::half_block(t);
    foff += HalfIntIndexMaps::full_block(t);
  }
  return full;
}

// Drops the mirrored rows of a full stack.  Exact inverse of the expansion
// on its image: surviving elements are copied bit-for-bit.
inline std::vector<Complex> full_to_half_compress(const std::vector<Complex>& full,
                                                  TwoJ twojmax) {
  detail::require(static_cast<std::int64_t>(full.size()) ==
                      u_total_elements(twojmax),
                  "full_to_half_compress: wrong input size");
  std::vector<Complex> half(static_cast<std::size_t>(u_half_elements(twojmax)));
  std::int64_t hoff = 0;
  std::int64_t foff = 0;
  for (TwoJ t = 0; t <= twojmax; ++t) {
    const int cols = t + 1;
    for (int mb = 0; 2 * mb <= t; ++mb)
      for (int ma = 0; ma <= t; ++ma)
        half[hoff + mb * cols + ma] = full[foff + mb * cols + ma];
    hoff += HalfIntIndexMaps::half_block(t);
    foff += HalfIntIndexMaps::full_block(t);
  }
  return half;
}

// Loop bounds for one target element (mb, ma) of a coupling tuple
// (twoj1, twoj2, twoj): the factor projections that contribute are
// ma1 in [ma1min, ma1min + na) paired with ma2 = ma2max - (ma1 - ma1min),
// and likewise for the mb side.  All arithmetic is in integer twoj units;
// the divisions are exact because of the parity constraint.
struct ZLoopBounds {
  int ma1min, ma2max, na;
  int mb1min, mb2max, nb;
};

inline ZLoopBounds z_loop_bounds(TwoJ j1, TwoJ j2, TwoJ j, int mb, int ma) {
  ZLoopBounds zb{};
  int t = 2 * ma - j;
  zb.ma1min = t + j1 - j2 < 0 ? 0 : (t + j1 - j2) / 2;
  zb.ma2max = (t - (2 * zb.ma1min - j1) + j2) / 2;
  int hi = (t + j2 + j1) / 2;
  zb.na = (j1 < hi ? j1 : hi) - zb.ma1min + 1;

  t = 2 * mb - j;
  zb.mb1min = t + j1 - j2 < 0 ? 0 : (t + j1 - j2) / 2;
  zb.mb2max = (t - (2 * zb.mb1min - j1) + j2) / 2;
  hi = (t + j2 + j1) / 2;
  zb.nb = (j1 < hi ? j1 : hi) - zb.mb1min + 1;
  return zb;
}

}  // namespace snapforge
