// SPDX-License-Identifier: MIT
//
// Descriptor pipeline stages.
//
// Two force formulations are implemented over the same expansion state:
//
//   reference ("baseline-z"):  U -> Z -> B -> per-pair dU -> three-term dB
//                              -> dE -> forces
//   adjoint:                   U -> Y (beta folded into the coupling sums)
//                              -> per-pair dU : Y contraction -> forces
//
// The adjoint field Y collapses the per-pair triple contraction into one
// precomputed per-atom array, which is what the optimization ladder in
// exec_variants.hpp reshapes and reschedules.  Every stage below takes the
// VariantSpec that controls its storage and scheduling, plus a deterministic
// flag: when set, all accumulation is coerced to atom-ownership order so
// results are bitwise reproducible across variants and worker counts.
//
// Contraction convention: real contractions over a level block use only the
// stored rows 2*mb <= twoj.  Strict rows count twice (their mirrors
// contribute the same real part), the even-level middle row counts once via
// columns ma < twoj/2 doubled plus half of the central element, and the
// total carries an overall factor 2 -- see the half-block identities in
// halfint_index.hpp.

#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snapforge/angular_basis.hpp"
#include "snapforge/common.hpp"
#include "snapforge/complex.hpp"
#include "snapforge/exec_variants.hpp"
#include "snapforge/halfint_index.hpp"
#include "snapforge/layout.hpp"
#include "snapforge/thread_pool.hpp"

namespace snapforge {

// --- problem description ----------------------------------------------------

struct SnapParams {
  TwoJ twojmax = 8;
  double rcut = 4.7;
  double rmin0 = 0.0;
  double rfac0 = 0.99363;
  std::vector<double> weights = {1.0};  // per-type neighbor weights
  double wself = 1.0;                   // central-atom weight
  bool self_contribution = true;        // seed the expansion with the center
  std::vector<double> beta;             // per canonical triple
};

struct Neighbor {
  std::int32_t index = 0;  // atom index of the neighbor
  double disp[3] = {0, 0, 0};  // displacement from the center to the neighbor
};

struct Problem {
  SnapParams params;
  std::vector<std::array<double, 3>> positions;  // empty in synthetic mode
  std::vector<int> types;                        // empty means all type 0
  std::vector<std::vector<Neighbor>> neighbors;  // per atom
  double box_length = 0.0;  // cubic box edge; 0 when not periodic
  std::uint64_t seed = 0;
  bool synthetic = false;

  int natoms() const { return static_cast<int>(neighbors.size()); }

  int max_neighbors() const {
    std::size_t m = 0;
    for (const auto& nl : neighbors) m = nl.size() > m ? nl.size() : m;
    return static_cast<int>(m);
  }

  int type_of(int i) const { return types.empty() ? 0 : types[i]; }

  double weight_of(int i) const {
    return params.weights[static_cast<std::size_t>(type_of(i))];
  }

  // Rejects ill-formed problems: zero-length or out-of-cutoff displacements,
  // dangling neighbor indices, and mismatched per-triple beta.
  void validate() const {
    const int n = natoms();
    detail::require(n > 0, "problem: no atoms");
    detail::require(positions.empty() ||
                        static_cast<int>(positions.size()) == n,
                    "problem: positions/neighbors size mismatch");
    detail::require(types.empty() || static_cast<int>(types.size()) == n,
                    "problem: types/neighbors size mismatch");
    detail::require(!params.weights.empty(), "problem: empty weight table");
    detail::require(params.rcut > params.rmin0,
                    "problem: Rcut must exceed rmin0");
    const double rc2 = params.rcut * params.rcut;
    for (int i = 0; i < n; ++i) {
      detail::require(type_of(i) >= 0 &&
                          type_of(i) < static_cast<int>(params.weights.size()),
                      "problem: atom type outside weight table");
      for (const Neighbor& nb : neighbors[i]) {
        detail::require(nb.index >= 0 && nb.index < n,
                        "problem: neighbor index out of range");
        detail::require(nb.index != i, "problem: self neighbor");
        const double r2 = nb.disp[0] * nb.disp[0] + nb.disp[1] * nb.disp[1] +
                          nb.disp[2] * nb.disp[2];
        detail::require(r2 > 0.0, "problem: zero-length neighbor displacement");
        detail::require(r2 < rc2, "problem: neighbor at or beyond Rcut");
      }
    }
    const std::size_t ntrip = enumerate_bispectrum_triples(params.twojmax).size();
    detail::require(params.beta.size() == ntrip,
                    "problem: beta length must match the triple count");
  }
};

struct EnergyReport {
  std::vector<double> per_atom;
  double total = 0.0;
};

// --- pipeline state -----------------------------------------------------------

// All arrays one pipeline invocation materializes, plus an allocation ledger
// used for the memory reports and for enforcing an optional byte budget.
struct DescriptorState {
  int natoms = 0;
  int nbor_stride = 0;  // max neighbors per atom (pair-array row stride)
  TwoJ twojmax = 0;
  bool utot_half = false;

  LayoutView utot_layout;
  LayoutView y_layout;
  RealBuffer ulisttot;
  RealBuffer ylist;
  std::vector<Complex> ulist;   // (atom, neighbor, full index)
  std::vector<Complex> zlist;   // (atom, coupling element)
  std::vector<double> blist;    // (atom, triple)
  std::vector<Complex> dulist;  // (atom, neighbor, half index, direction)
  std::vector<double> delist;   // (atom, neighbor, direction)
  std::vector<double> forces;   // (atom, direction)

  std::int64_t budget_bytes = 0;  // 0 = unlimited
  std::vector<std::pair<std::string, std::int64_t>> array_bytes;

  void record_allocation(const std::string& name, std::int64_t bytes) {
    if (budget_bytes > 0 && total_bytes() + bytes > budget_bytes) {
      throw MemoryBudgetError(
          name + " requires " + std::to_string(bytes) + " bytes (" +
              std::to_string(total_bytes()) + " already allocated, budget " +
              std::to_string(budget_bytes) + ")",
          bytes, budget_bytes);
    }
    array_bytes.emplace_back(name, bytes);
  }

  std::int64_t total_bytes() const {
    std::int64_t n = 0;
    for (const auto& [name, b] : array_bytes) n += b;
    return n;
  }

  std::int64_t bytes_for(const std::string& name) const {
    for (const auto& [nm, b] : array_bytes)
      if (nm == name) return b;
    return 0;
  }
};

// --- internal helpers ---------------------------------------------------------

namespace detail {

inline void atomic_add(double& x, double v) {
  std::atomic_ref<double>(x).fetch_add(v, std::memory_order_relaxed);
}

// Read access to Ulisttot through its layout, transparently recovering
// mirrored rows when the array is stored in half form.
struct UtotView {
  const double* base = nullptr;
  const LayoutView* lv = nullptr;
  const HalfIntIndexMaps* maps = nullptr;
  bool half = false;

  Complex get(std::int64_t atom, TwoJ t, int mb, int ma) const {
    if (!half)
      return lv->load(base, atom, maps->u_block_offset[t] + mb * (t + 1) + ma);
    if (2 * mb <= t)
      return lv->load(base, atom, maps->u_half_offset[t] + mb * (t + 1) + ma);
    Complex v = lv->load(
        base, atom, maps->u_half_offset[t] + (t - mb) * (t + 1) + (t - ma));
    const double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
    return {sign * v.re, -sign * v.im};
  }
};

// One coupling element: double CG-weighted product sum over the factor
// projections contributing to target element (mb, ma).
inline Complex z_element(const UtotView& u, std::int64_t atom, const double* cgb,
                         TwoJ j1, TwoJ j2, TwoJ j, int mb, int ma) {
  const ZLoopBounds zb = z_loop_bounds(j1, j2, j, mb, ma);
  Complex zsum{};
  int mb1 = zb.mb1min, mb2 = zb.mb2max;
  std::int64_t icgb = static_cast<std::int64_t>(mb1) * (j2 + 1) + mb2;
  for (int ib = 0; ib < zb.nb; ++ib) {
    Complex suma{};
    int ma1 = zb.ma1min, ma2 = zb.ma2max;
    std::int64_t icga = static_cast<std::int64_t>(ma1) * (j2 + 1) + ma2;
    for (int ia = 0; ia < zb.na; ++ia) {
      const Complex u1 = u.get(atom, j1, mb1, ma1);
      const Complex u2 = u.get(atom, j2, mb2, ma2);
      const double c = cgb[icga];
      suma.re += c * (u1.re * u2.re - u1.im * u2.im);
      suma.im += c * (u1.re * u2.im + u1.im * u2.re);
      ++ma1;
      --ma2;
      icga += j2;
    }
    zsum.re += cgb[icgb] * suma.re;
    zsum.im += cgb[icgb] * suma.im;
    ++mb1;
    --mb2;
    icgb += j2;
  }
  return zsum;
}

// Expands one atom's expansion coefficients into a flat full-form block
// stack.  The coupling loops read every element O(J^2) times; paying the
// mirror reconstruction and layout arithmetic once per element here keeps
// both out of the innermost products.
inline void expand_utot_full(const UtotView& u, std::int64_t atom, TwoJ twojmax,
                             const HalfIntIndexMaps& maps, Complex* out) {
  for (TwoJ t = 0; t <= twojmax; ++t) {
    Complex* blk = out + maps.u_block_offset[t];
    for (int mb = 0; mb <= t; ++mb)
      for (int ma = 0; ma <= t; ++ma)
        blk[mb * (t + 1) + ma] = u.get(atom, t, mb, ma);
  }
}

// z_element against a flat full-form scratch stack (same arithmetic, direct
// loads).  `off1`/`off2` are the block offsets of the two factor levels.
inline Complex z_element(const Complex* ufull, std::int64_t off1,
                         std::int64_t off2, const double* cgb, TwoJ j1, TwoJ j2,
                         TwoJ j, int mb, int ma) {
  const ZLoopBounds zb = z_loop_bounds(j1, j2, j, mb, ma);
  Complex zsum{};
  int mb1 = zb.mb1min, mb2 = zb.mb2max;
  std::int64_t icgb = static_cast<std::int64_t>(mb1) * (j2 + 1) + mb2;
  for (int ib = 0; ib < zb.nb; ++ib) {
    Complex suma{};
    int ma1 = zb.ma1min, ma2 = zb.ma2max;
    std::int64_t icga = static_cast<std::int64_t>(ma1) * (j2 + 1) + ma2;
    const Complex* row1 = ufull + off1 + static_cast<std::int64_t>(mb1) * (j1 + 1);
    const Complex* row2 = ufull + off2 + static_cast<std::int64_t>(mb2) * (j2 + 1);
    for (int ia = 0; ia < zb.na; ++ia) {
      const Complex u1 = row1[ma1];
      const Complex u2 = row2[ma2];
      const double c = cgb[icga];
      suma.re += c * (u1.re * u2.re - u1.im * u2.im);
      suma.im += c * (u1.re * u2.im + u1.im * u2.re);
      ++ma1;
      --ma2;
      icga += j2;
    }
    zsum.re += cgb[icgb] * suma.re;
    zsum.im += cgb[icgb] * suma.im;
    ++mb1;
    --mb2;
    icgb += j2;
  }
  return zsum;
}

// Half-block real contraction sum_{mb,ma} Re(z * conj(du)) over a full level
// (see the convention note at the top of the file).  `z` points at the half
// rows of level jc; `du` walks the same (mb, ma) order with a configurable
// element stride so it can address both full scratch stacks (stride 1) and
// the direction-interleaved dUlist (stride 3).
inline double zdu_contract(const Complex* z, const Complex* du,
                           std::int64_t du_stride, TwoJ jc) {
  double acc = 0.0;
  const int cols = jc + 1;
  for (int mb = 0; 2 * mb < jc; ++mb) {
    const std::int64_t row = static_cast<std::int64_t>(mb) * cols;
    for (int ma = 0; ma <= jc; ++ma)
      acc += re_mul_conj(z[row + ma], du[(row + ma) * du_stride]);
  }
  if ((jc & 1) == 0) {
    const std::int64_t row = static_cast<std::int64_t>(jc / 2) * cols;
    for (int ma = 0; ma < jc / 2; ++ma)
      acc += re_mul_conj(z[row + ma], du[(row + ma) * du_stride]);
    acc += 0.5 * re_mul_conj(z[row + jc / 2], du[(row + jc / 2) * du_stride]);
  }
  return 2.0 * acc;
}

// Multiplicity-folded beta factor for one coupling tuple feeding the adjoint
// field: canonicalizes (j1, j2 -> j) onto a stored triple and applies the
// symmetry weight, including the dimension ratio when the target level moves
// out of the last slot.
inline double fold_beta(const HalfIntIndexMaps& maps, const double* beta,
                        TwoJ j1, TwoJ j2, TwoJ j) {
  if (j >= j1) {
    const double b = beta[maps.triple_index(j1, j2, j)];
    if (j1 == j) return (j2 == j) ? 3.0 * b : 2.0 * b;
    return b;
  }
  if (j >= j2) {
    const double b = beta[maps.triple_index(j, j2, j1)];
    const double ratio = static_cast<double>(j1 + 1) / static_cast<double>(j + 1);
    return (j2 == j ? 2.0 * b : b) * ratio;
  }
  const double b = beta[maps.triple_index(j2, j, j1)];
  return b * static_cast<double>(j1 + 1) / static_cast<double>(j + 1);
}

// Collapsed (atom, neighbor) traversal order for pair-parallel stages.
inline std::vector<std::pair<std::int32_t, std::int32_t>> pair_schedule(
    const Problem& problem, IndexOrder order) {
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  const int n = problem.natoms();
  std::size_t total = 0;
  for (const auto& nl : problem.neighbors) total += nl.size();
  pairs.reserve(total);
  if (order == IndexOrder::neighbor_fastest) {
    for (std::int32_t i = 0; i < n; ++i)
      for (std::int32_t k = 0;
           k < static_cast<std::int32_t>(problem.neighbors[i].size()); ++k)
        pairs.emplace_back(i, k);
  } else {
    const int stride = problem.max_neighbors();
    for (std::int32_t k = 0; k < stride; ++k)
      for (std::int32_t i = 0; i < n; ++i)
        if (k < static_cast<std::int32_t>(problem.neighbors[i].size()))
          pairs.emplace_back(i, k);
  }
  return pairs;
}

// Radially weighted switching factors for one neighbor.
struct PairWeights {
  double sfac = 0.0;   // w_k * fc(r)
  double dsfac = 0.0;  // w_k * dfc/dr
};

inline PairWeights pair_weights(const Problem& problem, const SphereMap& map,
                                std::int32_t neighbor_index) {
  auto [fc, dfc] = switching_function(map.r, problem.params.rcut,
                                      problem.params.rmin0);
  const double w = problem.weight_of(neighbor_index);
  return {w * fc, w * dfc};
}

}  // namespace detail

// --- stage: expansion accumulation --------------------------------------------

// Accumulates the per-atom expansion Ulisttot (and, when the variant
// materializes it, the raw per-pair stacks Ulist).  Storage form, layout,
// and accumulation strategy come from the variant; deterministic mode forces
// atom-ownership accumulation with neighbors visited in list order.
inline void compute_U(const Problem& problem, const HalfIntIndexMaps& maps,
                      const VariantSpec& variant, bool deterministic,
                      WorkerPool& pool, DescriptorState& state) {
  const SnapParams& prm = problem.params;
  const int natoms = problem.natoms();
  const TwoJ T = prm.twojmax;
  detail::require(maps.twojmax == T, "compute_U: maps/params band mismatch");
  detail::require(!(variant.half_symmetry && variant.materialize_ulist),
                  "compute_U: half-form Ulisttot excludes materialized Ulist");

  state.natoms = natoms;
  state.nbor_stride = problem.max_neighbors();
  state.twojmax = T;
  state.utot_half = variant.half_symmetry;

  const std::int64_t nidx =
      variant.half_symmetry ? maps.u_half_total() : maps.u_full_total();
  state.utot_layout = resolve_layout(variant.layout, natoms, nidx);
  state.record_allocation("Ulisttot", state.utot_layout.bytes());
  state.ulisttot =
      RealBuffer(state.utot_layout.total_doubles(), variant.buffer_alignment());
  state.ulisttot.fill(0.0);

  const std::int64_t nfull = maps.u_full_total();
  if (variant.materialize_ulist) {
    const std::int64_t n =
        static_cast<std::int64_t>(natoms) * state.nbor_stride * nfull;
    state.record_allocation("Ulist",
                            n * static_cast<std::int64_t>(sizeof(Complex)));
    state.ulist.assign(static_cast<std::size_t>(n), Complex{});
  }

  double* base = state.ulisttot.data();
  const LayoutView& lv = state.utot_layout;

  if (prm.self_contribution) {
    for (std::int64_t a = 0; a < natoms; ++a)
      for (TwoJ t = 0; t <= T; ++t) {
        const std::int64_t off = variant.half_symmetry ? maps.u_half_offset[t]
                                                       : maps.u_block_offset[t];
        const int mbmax = variant.half_symmetry ? t / 2 : t;
        for (int mb = 0; mb <= mbmax; ++mb)
          lv.store(base, a, off + mb * (t + 1) + mb, {prm.wself, 0.0});
      }
  }

  // One neighbor's contribution.  `target` is the destination plane (shared
  // or worker-private); `atomic` selects read-modify-write accumulation.
  std::vector<std::vector<Complex>> scratch(
      static_cast<std::size_t>(pool.workers()));
  auto accumulate = [&](int i, int k, std::vector<Complex>& uscr,
                        double* target, bool atomic) {
    const Neighbor& nb = problem.neighbors[i][static_cast<std::size_t>(k)];
    const SphereMap map = map_to_3sphere(nb.disp, prm.rcut, prm.rmin0, prm.rfac0);
    const double sfac = detail::pair_weights(problem, map, nb.index).sfac;
    uscr.resize(static_cast<std::size_t>(nidx));
    detail::wigner_u_recursion(map.a, map.b, T, variant.half_symmetry,
                               uscr.data());
    if (variant.materialize_ulist) {
      Complex* dst = state.ulist.data() +
                     (static_cast<std::int64_t>(i) * state.nbor_stride + k) * nfull;
      for (std::int64_t e = 0; e < nfull; ++e) dst[e] = uscr[e];
    }
    for (std::int64_t e = 0; e < nidx; ++e) {
      const Complex v = sfac * uscr[e];
      if (atomic) {
        detail::atomic_add(target[lv.re_index(i, e)], v.re);
        detail::atomic_add(target[lv.im_index(i, e)], v.im);
      } else {
        target[lv.re_index(i, e)] += v.re;
        target[lv.im_index(i, e)] += v.im;
      }
    }
  };

  const bool pairwise = !deterministic &&
                        variant.parallel_axes != ParallelAxes::atoms &&
                        variant.accumulation != Accumulation::serialized;
  if (!pairwise) {
    pool.parallel_for(natoms, [&](int w, std::int64_t lo, std::int64_t hi) {
      auto& uscr = scratch[static_cast<std::size_t>(w)];
      for (std::int64_t i = lo; i < hi; ++i)
        for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k)
          accumulate(static_cast<int>(i), static_cast<int>(k), uscr, base, false);
    });
  } else if (variant.accumulation == Accumulation::concurrent_rmw) {
    const auto pairs = detail::pair_schedule(problem, variant.index_order);
    pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                      [&](int w, std::int64_t lo, std::int64_t hi) {
                        auto& uscr = scratch[static_cast<std::size_t>(w)];
                        for (std::int64_t p = lo; p < hi; ++p)
                          accumulate(pairs[p].first, pairs[p].second, uscr,
                                     base, true);
                      });
  } else {
    // Privatized: per-worker planes, reduced in worker order.
    const auto pairs = detail::pair_schedule(problem, variant.index_order);
    std::vector<RealBuffer> priv;
    priv.reserve(static_cast<std::size_t>(pool.workers()));
    for (int w = 0; w < pool.workers(); ++w) {
      priv.emplace_back(lv.total_doubles(), variant.buffer_alignment());
      priv.back().fill(0.0);
    }
    pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                      [&](int w, std::int64_t lo, std::int64_t hi) {
                        auto& uscr = scratch[static_cast<std::size_t>(w)];
                        double* mine = priv[static_cast<std::size_t>(w)].data();
                        for (std::int64_t p = lo; p < hi; ++p)
                          accumulate(pairs[p].first, pairs[p].second, uscr,
                                     mine, false);
                      });
    pool.parallel_for(lv.total_doubles(),
                      [&](int, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t s = lo; s < hi; ++s) {
                          double acc = base[s];
                          for (const auto& b : priv) acc += b.data()[s];
                          base[s] = acc;
                        }
                      });
  }
}

// Re-lays Ulisttot between atom-major and index-major storage.  Values are
// copied bit-for-bit; only the stride map changes.
inline void transpose_ulisttot(DescriptorState& state, bool to_atom_fastest,
                               WorkerPool& pool) {
  detail::require(!state.ulisttot.empty(), "transpose_ulisttot: no Ulisttot");
  const LayoutView& src = state.utot_layout;
  LayoutSpec dst_spec;
  dst_spec.atom_fastest = to_atom_fastest;
  dst_spec.split_planes = src.split_planes;
  LayoutView dst = resolve_layout(dst_spec, src.natoms, src.nidx);
  RealBuffer out(dst.total_doubles(), state.ulisttot.alignment());
  out.fill(0.0);
  double* obase = out.data();
  const double* ibase = state.ulisttot.data();
  pool.parallel_for(src.natoms, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t a = lo; a < hi; ++a)
      for (std::int64_t e = 0; e < src.nidx; ++e)
        dst.store(obase, a, e, src.load(ibase, a, e));
  });
  state.ulisttot = std::move(out);
  state.utot_layout = dst;
}

// --- stage: coupling products (reference pipeline) -----------------------------

// Materializes every coupling element for every atom.  This is the array the
// adjoint formulation exists to eliminate; its footprint is checked against
// the state's byte budget before allocation.
inline void compute_Z(const Problem& problem, const CGTable& cg,
                      const HalfIntIndexMaps& maps, const VariantSpec& variant,
                      WorkerPool& pool, DescriptorState& state) {
  (void)variant;
  const int natoms = problem.natoms();
  const std::int64_t n =
      static_cast<std::int64_t>(natoms) * maps.z_total_elements;
  state.record_allocation("Zlist",
                          n * static_cast<std::int64_t>(sizeof(Complex)));
  state.zlist.assign(static_cast<std::size_t>(n), Complex{});

  const detail::UtotView view{state.ulisttot.data(), &state.utot_layout, &maps,
                              state.utot_half};
  pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t a = lo; a < hi; ++a) {
      Complex* zrow = state.zlist.data() + a * maps.z_total_elements;
      for (const ZTuple& zt : maps.z_tuples) {
        Complex* blk = zrow + zt.elem_offset;
        const double* cgb = cg.values.data() + zt.cg_offset;
        std::int64_t e = 0;
        for (int mb = 0; 2 * mb <= zt.twoj; ++mb)
          for (int ma = 0; ma <= zt.twoj; ++ma, ++e)
            blk[e] = detail::z_element(view, a, cgb, zt.twoj1, zt.twoj2,
                                       zt.twoj, mb, ma);
      }
    }
  });
}

namespace detail {

// Shared core of the two B computations: contracts a triple's coupling
// elements (from `zblk`) against conj(Ulisttot) and reports the real value
// together with the middle-row imaginary residue.  The full-block imaginary
// part reduces exactly to the middle row (strict rows cancel against their
// mirrors), so the residue is a genuine indexing check, not a tautology.
inline std::pair<double, double> b_contract(const Complex* zblk,
                                            const UtotView& u,
                                            std::int64_t atom, TwoJ j) {
  double acc = 0.0, mid_re = 0.0, mid_im = 0.0;
  const int cols = j + 1;
  for (int mb = 0; 2 * mb < j; ++mb)
    for (int ma = 0; ma <= j; ++ma) {
      const Complex uu = u.get(atom, j, mb, ma);
      acc += re_mul_conj(zblk[mb * cols + ma], uu);
    }
  if ((j & 1) == 0) {
    const int mb = j / 2;
    for (int ma = 0; ma <= j; ++ma) {
      const Complex z = zblk[mb * cols + ma];
      const Complex uu = u.get(atom, j, mb, ma);
      mid_re += re_mul_conj(z, uu);
      mid_im += z.im * uu.re - z.re * uu.im;
    }
  }
  return {2.0 * acc + mid_re, std::abs(mid_im)};
}

// b_contract against a flat full-form level block (same arithmetic, direct
// loads).  `ublk` points at the target level within an expanded scratch stack.
inline std::pair<double, double> b_contract(const Complex* zblk,
                                            const Complex* ublk, TwoJ j) {
  double acc = 0.0, mid_re = 0.0, mid_im = 0.0;
  const int cols = j + 1;
  for (int mb = 0; 2 * mb < j; ++mb)
    for (int ma = 0; ma <= j; ++ma) {
      const Complex uu = ublk[mb * cols + ma];
      acc += re_mul_conj(zblk[mb * cols + ma], uu);
    }
  if ((j & 1) == 0) {
    const int mb = j / 2;
    for (int ma = 0; ma <= j; ++ma) {
      const Complex z = zblk[mb * cols + ma];
      const Complex uu = ublk[mb * cols + ma];
      mid_re += re_mul_conj(z, uu);
      mid_im += z.im * uu.re - z.re * uu.im;
    }
  }
  return {2.0 * acc + mid_re, std::abs(mid_im)};
}

inline void check_b_residue(double bval, double residue, TwoJ j1, TwoJ j2,
                            TwoJ j) {
  const double denom = std::abs(bval) > 1.0 ? std::abs(bval) : 1.0;
  if (residue > tol::kBImagResidue * denom)
    throw PipelineError("bispectrum imaginary residue " +
                        std::to_string(residue) + " at triple (" +
                        std::to_string(j1) + "," + std::to_string(j2) + "," +
                        std::to_string(j) + ") exceeds tolerance");
}

}  // namespace detail

// Bispectrum components from materialized coupling products.
inline void compute_B(const Problem& problem, const HalfIntIndexMaps& maps,
                      WorkerPool& pool, DescriptorState& state) {
  detail::require(!state.zlist.empty(), "compute_B: Zlist not materialized");
  const int natoms = problem.natoms();
  const std::int64_t ntrip = maps.n_triples();
  state.record_allocation("Blist", natoms * ntrip *
                                       static_cast<std::int64_t>(sizeof(double)));
  state.blist.assign(static_cast<std::size_t>(natoms * ntrip), 0.0);

  const detail::UtotView view{state.ulisttot.data(), &state.utot_layout, &maps,
                              state.utot_half};
  pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t a = lo; a < hi; ++a) {
      const Complex* zrow = state.zlist.data() + a * maps.z_total_elements;
      for (std::int64_t l = 0; l < ntrip; ++l) {
        const BispectrumTriple& b = maps.z_triples[static_cast<std::size_t>(l)];
        const std::int32_t tix = maps.tuple_index(b.twoj1, b.twoj2, b.twoj);
        const Complex* zblk = zrow + maps.z_tuples[tix].elem_offset;
        auto [bval, residue] = detail::b_contract(zblk, view, a, b.twoj);
        detail::check_b_residue(bval, residue, b.twoj1, b.twoj2, b.twoj);
        state.blist[static_cast<std::size_t>(a * ntrip + l)] = bval;
      }
    }
  });
}

// Bispectrum components straight from Ulisttot: coupling elements are formed
// on the fly and never stored.  This is the energy path of the adjoint
// pipeline; it produces bit-identical values to compute_B.
inline void compute_B_from_U(const Problem& problem, const CGTable& cg,
                             const HalfIntIndexMaps& maps, WorkerPool& pool,
                             DescriptorState& state) {
  detail::require(!state.ulisttot.empty(), "compute_B_from_U: no Ulisttot");
  const int natoms = problem.natoms();
  const std::int64_t ntrip = maps.n_triples();
  state.record_allocation("Blist", natoms * ntrip *
                                       static_cast<std::int64_t>(sizeof(double)));
  state.blist.assign(static_cast<std::size_t>(natoms * ntrip), 0.0);

  const detail::UtotView view{state.ulisttot.data(), &state.utot_layout, &maps,
                              state.utot_half};
  const std::int64_t nfull = maps.u_full_total();
  const TwoJ T = state.twojmax;
  pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
    std::vector<Complex> ufull(static_cast<std::size_t>(nfull));
    std::vector<Complex> zscr;
    for (std::int64_t a = lo; a < hi; ++a) {
      detail::expand_utot_full(view, a, T, maps, ufull.data());
      for (std::int64_t l = 0; l < ntrip; ++l) {
        const BispectrumTriple& b = maps.z_triples[static_cast<std::size_t>(l)];
        const TwoJ j = b.twoj;
        const double* cgb =
            cg.values.data() + maps.cg_offset(b.twoj1, b.twoj2, j);
        const std::int64_t off1 = maps.u_block_offset[b.twoj1];
        const std::int64_t off2 = maps.u_block_offset[b.twoj2];
        zscr.resize(static_cast<std::size_t>(HalfIntIndexMaps::half_block(j)));
        std::int64_t e = 0;
        for (int mb = 0; 2 * mb <= j; ++mb)
          for (int ma = 0; ma <= j; ++ma, ++e)
            zscr[static_cast<std::size_t>(e)] = detail::z_element(
                ufull.data(), off1, off2, cgb, b.twoj1, b.twoj2, j, mb, ma);
        auto [bval, residue] = detail::b_contract(
            zscr.data(), ufull.data() + maps.u_block_offset[j], j);
        detail::check_b_residue(bval, residue, b.twoj1, b.twoj2, j);
        state.blist[static_cast<std::size_t>(a * ntrip + l)] = bval;
      }
    }
  });
}

// Linear energy model over the bispectrum components.
inline EnergyReport compute_energy(const std::vector<double>& blist,
                                   const std::vector<double>& beta,
                                   std::int64_t natoms) {
  const std::int64_t ntrip = static_cast<std::int64_t>(beta.size());
  detail::require(static_cast<std::int64_t>(blist.size()) == natoms * ntrip,
                  "compute_energy: Blist extent mismatch");
  EnergyReport r;
  r.per_atom.resize(static_cast<std::size_t>(natoms), 0.0);
  for (std::int64_t a = 0; a < natoms; ++a) {
    double e = 0.0;
    for (std::int64_t l = 0; l < ntrip; ++l)
      e += beta[static_cast<std::size_t>(l)] *
           blist[static_cast<std::size_t>(a * ntrip + l)];
    r.per_atom[static_cast<std::size_t>(a)] = e;
    r.total += e;
  }
  return r;
}

// --- stage: expansion gradients -------------------------------------------------

// Materializes the radially weighted gradient stacks for every pair, in half
// storage with the three directions interleaved per element.
inline void compute_dU(const Problem& problem, const HalfIntIndexMaps& maps,
                       const VariantSpec& variant, bool deterministic,
                       WorkerPool& pool, DescriptorState& state) {
  const SnapParams& prm = problem.params;
  const int natoms = problem.natoms();
  const TwoJ T = prm.twojmax;
  const std::int64_t nhalf = maps.u_half_total();
  const std::int64_t nfull = maps.u_full_total();
  const std::int64_t n =
      static_cast<std::int64_t>(natoms) * state.nbor_stride * nhalf * 3;
  state.record_allocation("dUlist",
                          n * static_cast<std::int64_t>(sizeof(Complex)));
  state.dulist.assign(static_cast<std::size_t>(n), Complex{});

  struct Scratch {
    std::vector<Complex> u, du0, du1, du2;
  };
  std::vector<Scratch> scratch(static_cast<std::size_t>(pool.workers()));

  auto pair_body = [&](int w, int i, int k) {
    const Neighbor& nb = problem.neighbors[i][static_cast<std::size_t>(k)];
    const SphereMap map = map_to_3sphere(nb.disp, prm.rcut, prm.rmin0, prm.rfac0);
    const auto [sfac, dsfac] = detail::pair_weights(problem, map, nb.index);

    Scratch& s = scratch[static_cast<std::size_t>(w)];
    const Complex* ufull;
    if (variant.materialize_ulist) {
      ufull = state.ulist.data() +
              (static_cast<std::int64_t>(i) * state.nbor_stride + k) * nfull;
    } else {
      s.u.resize(static_cast<std::size_t>(nfull));
      detail::wigner_u_recursion(map.a, map.b, T, false, s.u.data());
      ufull = s.u.data();
    }
    s.du0.resize(static_cast<std::size_t>(nfull));
    s.du1.resize(static_cast<std::size_t>(nfull));
    s.du2.resize(static_cast<std::size_t>(nfull));
    Complex* du[3] = {s.du0.data(), s.du1.data(), s.du2.data()};
    detail::wigner_du_recursion(map, T, ufull, du);

    Complex* dst = state.dulist.data() +
                   (static_cast<std::int64_t>(i) * state.nbor_stride + k) *
                       nhalf * 3;
    for (TwoJ t = 0; t <= T; ++t) {
      const int cols = t + 1;
      for (int mb = 0; 2 * mb <= t; ++mb)
        for (int ma = 0; ma <= t; ++ma) {
          const std::int64_t fidx = maps.u_block_offset[t] + mb * cols + ma;
          const std::int64_t hidx = maps.u_half_offset[t] + mb * cols + ma;
          const Complex uu = ufull[fidx];
          for (int d = 0; d < 3; ++d) {
            const double dsf = dsfac * map.rhat[d];
            dst[hidx * 3 + d] = {dsf * uu.re + sfac * du[d][fidx].re,
                                 dsf * uu.im + sfac * du[d][fidx].im};
          }
        }
    }
  };

  if (deterministic || variant.parallel_axes == ParallelAxes::atoms) {
    pool.parallel_for(natoms, [&](int w, std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i)
        for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k)
          pair_body(w, static_cast<int>(i), static_cast<int>(k));
    });
  } else {
    const auto pairs = detail::pair_schedule(problem, variant.index_order);
    pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                      [&](int w, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t p = lo; p < hi; ++p)
                          pair_body(w, pairs[p].first, pairs[p].second);
                      });
  }
}

// --- stage: reference derivative contraction ------------------------------------

namespace detail {

// Three-term gradient of one bispectrum component for one pair: the target
// level rotates through all three slots, each contracted against the
// coupling products of the other two factor levels (accessed with the factor
// pair sorted, exploiting the coupling symmetry) and scaled by the dimension
// ratio of the displaced slot.
inline void db_pair_triple(const HalfIntIndexMaps& maps, const Complex* zrow,
                           const Complex* const du[3], std::int64_t du_stride,
                           const std::int64_t* du_level_offset,
                           TwoJ j1, TwoJ j2, TwoJ j, double out[3]) {
  const auto tup = [&](TwoJ a, TwoJ b, TwoJ c) {
    return zrow + maps.z_tuples[maps.tuple_index(a > b ? a : b, a > b ? b : a, c)]
                      .elem_offset;
  };
  const Complex* z1 = tup(j1, j2, j);
  const Complex* z2 = tup(j, j2, j1);
  const Complex* z3 = tup(j, j1, j2);
  const double f2 = static_cast<double>(j + 1) / static_cast<double>(j1 + 1);
  const double f3 = static_cast<double>(j + 1) / static_cast<double>(j2 + 1);
  for (int d = 0; d < 3; ++d) {
    const Complex* dud = du[d];
    out[d] = zdu_contract(z1, dud + du_level_offset[j] * du_stride, du_stride, j) +
             f2 * zdu_contract(z2, dud + du_level_offset[j1] * du_stride,
                               du_stride, j1) +
             f3 * zdu_contract(z3, dud + du_level_offset[j2] * du_stride,
                               du_stride, j2);
  }
}

}  // namespace detail

// Materialized per-pair bispectrum gradients (atom, neighbor, triple, 3).
// Consumes the stored coupling products and gradient stacks; mostly used by
// verification paths -- the reference pipeline contracts beta on the fly.
inline std::vector<double> compute_dB(const Problem& problem,
                                      const HalfIntIndexMaps& maps,
                                      const VariantSpec& variant,
                                      WorkerPool& pool, DescriptorState& state) {
  (void)variant;
  const int natoms = problem.natoms();
  const std::int64_t ntrip = maps.n_triples();
  const std::int64_t nhalf = maps.u_half_total();
  detail::require(!state.zlist.empty() &&
                      static_cast<std::int64_t>(state.dulist.size()) ==
                          static_cast<std::int64_t>(natoms) *
                              state.nbor_stride * nhalf * 3,
                  "compute_dB: requires Zlist and dUlist");
  std::vector<double> dblist(
      static_cast<std::size_t>(static_cast<std::int64_t>(natoms) *
                               state.nbor_stride * ntrip * 3),
      0.0);

  pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const Complex* zrow = state.zlist.data() + i * maps.z_total_elements;
      for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k) {
        const Complex* dup =
            state.dulist.data() +
            (i * state.nbor_stride + static_cast<std::int64_t>(k)) * nhalf * 3;
        // Direction d lives at stride 3 starting from dup + d.
        const Complex* du[3] = {dup, dup + 1, dup + 2};
        for (std::int64_t l = 0; l < ntrip; ++l) {
          const BispectrumTriple& b =
              maps.z_triples[static_cast<std::size_t>(l)];
          double out[3];
          detail::db_pair_triple(maps, zrow, du, 3, maps.u_half_offset.data(),
                                 b.twoj1, b.twoj2, b.twoj, out);
          double* dst =
              dblist.data() +
              ((i * state.nbor_stride + static_cast<std::int64_t>(k)) * ntrip +
               l) * 3;
          dst[0] = out[0];
          dst[1] = out[1];
          dst[2] = out[2];
        }
      }
    }
  });
  return dblist;
}

// --- stage: force scatter --------------------------------------------------------

// Folds per-pair energy gradients into per-atom forces with the opposite
// sign on each end of the pair.  Deterministic (and serialized) runs walk
// pairs in canonical order; otherwise the variant's accumulation strategy
// applies.
inline void scatter_forces(const Problem& problem, const VariantSpec& variant,
                           bool deterministic, WorkerPool& pool,
                           DescriptorState& state) {
  const int natoms = problem.natoms();
  detail::require(static_cast<std::int64_t>(state.delist.size()) ==
                      static_cast<std::int64_t>(natoms) * state.nbor_stride * 3,
                  "scatter_forces: no dElist");
  if (state.forces.empty()) {
    state.record_allocation("forces", natoms * 3 *
                                          static_cast<std::int64_t>(sizeof(double)));
  }
  state.forces.assign(static_cast<std::size_t>(natoms) * 3, 0.0);

  auto pair_de = [&](std::int64_t i, std::int64_t k) {
    return state.delist.data() + (i * state.nbor_stride + k) * 3;
  };

  if (deterministic || variant.accumulation == Accumulation::serialized) {
    for (std::int64_t i = 0; i < natoms; ++i)
      for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k) {
        const double* de = pair_de(i, static_cast<std::int64_t>(k));
        const std::int32_t kk = problem.neighbors[i][k].index;
        for (int d = 0; d < 3; ++d) {
          state.forces[static_cast<std::size_t>(i * 3 + d)] += de[d];
          state.forces[static_cast<std::size_t>(kk * 3 + d)] -= de[d];
        }
      }
    return;
  }

  const auto pairs = detail::pair_schedule(problem, variant.index_order);
  if (variant.accumulation == Accumulation::concurrent_rmw) {
    pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                      [&](int, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t p = lo; p < hi; ++p) {
                          const auto [i, k] = pairs[p];
                          const double* de = pair_de(i, k);
                          const std::int32_t kk =
                              problem.neighbors[i][static_cast<std::size_t>(k)]
                                  .index;
                          for (int d = 0; d < 3; ++d) {
                            detail::atomic_add(
                                state.forces[static_cast<std::size_t>(i * 3 + d)],
                                de[d]);
                            detail::atomic_add(
                                state.forces[static_cast<std::size_t>(kk * 3 + d)],
                                -de[d]);
                          }
                        }
                      });
    return;
  }

  // Privatized force planes, reduced in worker order.
  std::vector<std::vector<double>> priv(
      static_cast<std::size_t>(pool.workers()),
      std::vector<double>(static_cast<std::size_t>(natoms) * 3, 0.0));
  pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                    [&](int w, std::int64_t lo, std::int64_t hi) {
                      auto& mine = priv[static_cast<std::size_t>(w)];
                      for (std::int64_t p = lo; p < hi; ++p) {
                        const auto [i, k] = pairs[p];
                        const double* de = pair_de(i, k);
                        const std::int32_t kk =
                            problem.neighbors[i][static_cast<std::size_t>(k)]
                                .index;
                        for (int d = 0; d < 3; ++d) {
                          mine[static_cast<std::size_t>(i * 3 + d)] += de[d];
                          mine[static_cast<std::size_t>(kk * 3 + d)] -= de[d];
                        }
                      }
                    });
  pool.parallel_for(static_cast<std::int64_t>(natoms) * 3,
                    [&](int, std::int64_t lo, std::int64_t hi) {
                      for (std::int64_t s = lo; s < hi; ++s) {
                        double acc = state.forces[static_cast<std::size_t>(s)];
                        for (const auto& b : priv)
                          acc += b[static_cast<std::size_t>(s)];
                        state.forces[static_cast<std::size_t>(s)] = acc;
                      }
                    });
}

// Reference-pipeline force assembly from materialized bispectrum gradients:
// contracts beta into per-pair energy gradients, then scatters.
inline void update_forces_baseline(const Problem& problem,
                                   const std::vector<double>& dblist,
                                   const std::vector<double>& beta,
                                   const VariantSpec& variant,
                                   bool deterministic, WorkerPool& pool,
                                   DescriptorState& state) {
  const int natoms = problem.natoms();
  const std::int64_t ntrip = static_cast<std::int64_t>(beta.size());
  state.record_allocation("dElist", static_cast<std::int64_t>(natoms) *
                                        state.nbor_stride * 3 *
                                        static_cast<std::int64_t>(sizeof(double)));
  state.delist.assign(
      static_cast<std::size_t>(static_cast<std::int64_t>(natoms) *
                               state.nbor_stride * 3),
      0.0);
  pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k) {
        const double* src =
            dblist.data() +
            (i * state.nbor_stride + static_cast<std::int64_t>(k)) * ntrip * 3;
        double de[3] = {0, 0, 0};
        for (std::int64_t l = 0; l < ntrip; ++l)
          for (int d = 0; d < 3; ++d)
            de[d] += beta[static_cast<std::size_t>(l)] * src[l * 3 + d];
        double* dst = state.delist.data() +
                      (i * state.nbor_stride + static_cast<std::int64_t>(k)) * 3;
        dst[0] = de[0];
        dst[1] = de[1];
        dst[2] = de[2];
      }
  });
  scatter_forces(problem, variant, deterministic, pool, state);
}

// Monolithic reference derivative chain: per pair, rebuild the gradient
// stacks in scratch, contract the three-term bispectrum gradient, and fold
// beta immediately -- nothing per-pair is materialized beyond dElist.  This
// is the classic all-in-one force loop the fissioned variants take apart.
// The caller runs scatter_forces afterwards.
inline void baseline_force_chain(const Problem& problem,
                                 const HalfIntIndexMaps& maps,
                                 const VariantSpec& variant, bool deterministic,
                                 WorkerPool& pool, DescriptorState& state) {
  (void)variant;        // always pair-race-free: parallel over atoms
  (void)deterministic;  // per-pair outputs, so order never matters
  const SnapParams& prm = problem.params;
  const int natoms = problem.natoms();
  const TwoJ T = prm.twojmax;
  const std::int64_t ntrip = maps.n_triples();
  const std::int64_t nfull = maps.u_full_total();
  detail::require(!state.zlist.empty() &&
                      static_cast<std::int64_t>(state.ulist.size()) ==
                          static_cast<std::int64_t>(natoms) *
                              state.nbor_stride * nfull,
                  "baseline_force_chain: requires Zlist and Ulist");
  state.record_allocation("dElist", static_cast<std::int64_t>(natoms) *
                                        state.nbor_stride * 3 *
                                        static_cast<std::int64_t>(sizeof(double)));
  state.delist.assign(
      static_cast<std::size_t>(static_cast<std::int64_t>(natoms) *
                               state.nbor_stride * 3),
      0.0);

  struct Scratch {
    std::vector<Complex> du0, du1, du2;
  };
  std::vector<Scratch> scratch(static_cast<std::size_t>(pool.workers()));

  pool.parallel_for(natoms, [&](int w, std::int64_t lo, std::int64_t hi) {
    Scratch& s = scratch[static_cast<std::size_t>(w)];
    s.du0.resize(static_cast<std::size_t>(nfull));
    s.du1.resize(static_cast<std::size_t>(nfull));
    s.du2.resize(static_cast<std::size_t>(nfull));
    for (std::int64_t i = lo; i < hi; ++i) {
      const Complex* zrow = state.zlist.data() + i * maps.z_total_elements;
      for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k) {
        const Neighbor& nb = problem.neighbors[i][k];
        const SphereMap map =
            map_to_3sphere(nb.disp, prm.rcut, prm.rmin0, prm.rfac0);
        const auto [sfac, dsfac] = detail::pair_weights(problem, map, nb.index);
        const Complex* ufull =
            state.ulist.data() +
            (i * state.nbor_stride + static_cast<std::int64_t>(k)) * nfull;
        Complex* du[3] = {s.du0.data(), s.du1.data(), s.du2.data()};
        detail::wigner_du_recursion(map, T, ufull, du);
        // Weight the stored rows in place (the same arithmetic the staged
        // dU stage applies before materializing).
        for (TwoJ t = 0; t <= T; ++t)
          for (int mb = 0; 2 * mb <= t; ++mb)
            for (int ma = 0; ma <= t; ++ma) {
              const std::int64_t f = maps.u_block_offset[t] + mb * (t + 1) + ma;
              const Complex uu = ufull[f];
              for (int d = 0; d < 3; ++d) {
                const double dsf = dsfac * map.rhat[d];
                du[d][f] = {dsf * uu.re + sfac * du[d][f].re,
                            dsf * uu.im + sfac * du[d][f].im};
              }
            }
        double de[3] = {0, 0, 0};
        const Complex* dus[3] = {s.du0.data(), s.du1.data(), s.du2.data()};
        for (std::int64_t l = 0; l < ntrip; ++l) {
          const BispectrumTriple& b =
              maps.z_triples[static_cast<std::size_t>(l)];
          double out[3];
          detail::db_pair_triple(maps, zrow, dus, 1,
                                 maps.u_block_offset.data(), b.twoj1, b.twoj2,
                                 b.twoj, out);
          const double bl = prm.beta[static_cast<std::size_t>(l)];
          de[0] += bl * out[0];
          de[1] += bl * out[1];
          de[2] += bl * out[2];
        }
        double* dst = state.delist.data() +
                      (i * state.nbor_stride + static_cast<std::int64_t>(k)) * 3;
        dst[0] = de[0];
        dst[1] = de[1];
        dst[2] = de[2];
      }
    }
  });
}

// --- stage: adjoint field ---------------------------------------------------------

// Builds the adjoint expansion field: for every coupling tuple the folded
// beta weight times its coupling elements, accumulated into the target
// level's half block.  The coupling products are never materialized.
inline void compute_Y(const Problem& problem, const std::vector<double>& beta,
                      const CGTable& cg, const HalfIntIndexMaps& maps,
                      const VariantSpec& variant, bool deterministic,
                      WorkerPool& pool, DescriptorState& state) {
  detail::require(!state.ulisttot.empty(), "compute_Y: no Ulisttot");
  const int natoms = problem.natoms();
  const std::int64_t nhalf = maps.u_half_total();
  state.y_layout = resolve_layout(variant.layout, natoms, nhalf);
  state.record_allocation("Ylist", state.y_layout.bytes());
  state.ylist =
      RealBuffer(state.y_layout.total_doubles(), variant.buffer_alignment());
  state.ylist.fill(0.0);

  const detail::UtotView uview{state.ulisttot.data(), &state.utot_layout, &maps,
                               state.utot_half};
  const LayoutView& ylv = state.y_layout;
  double* ybase = state.ylist.data();
  const std::int64_t ntup = static_cast<std::int64_t>(maps.z_tuples.size());

  auto tuple_work = [&](std::int64_t a, const ZTuple& zt, double* target,
                        bool atomic) {
    const double betaj =
        detail::fold_beta(maps, beta.data(), zt.twoj1, zt.twoj2, zt.twoj);
    const double* cgb = cg.values.data() + zt.cg_offset;
    const TwoJ j = zt.twoj;
    for (int mb = 0; 2 * mb <= j; ++mb)
      for (int ma = 0; ma <= j; ++ma) {
        const Complex z =
            detail::z_element(uview, a, cgb, zt.twoj1, zt.twoj2, j, mb, ma);
        const std::int64_t idx = maps.u_half_offset[j] + mb * (j + 1) + ma;
        if (atomic) {
          detail::atomic_add(target[ylv.re_index(a, idx)], betaj * z.re);
          detail::atomic_add(target[ylv.im_index(a, idx)], betaj * z.im);
        } else {
          target[ylv.re_index(a, idx)] += betaj * z.re;
          target[ylv.im_index(a, idx)] += betaj * z.im;
        }
      }
  };

  const bool flat = !deterministic &&
                    variant.parallel_axes == ParallelAxes::atoms_neighbors_index &&
                    variant.accumulation != Accumulation::serialized;
  if (!flat) {
    // Atom-owned accumulation.  Each worker expands the atom's coefficients
    // into flat full-form scratch and collects the field in a local half-form
    // block stack, so the coupling loops run on plain contiguous arrays and
    // the variant layout is touched exactly once per element (expand + store).
    // The store order per slot matches the direct accumulation above, keeping
    // results bitwise independent of this staging.
    std::vector<double> folded(maps.z_tuples.size());
    for (std::size_t t = 0; t < maps.z_tuples.size(); ++t)
      folded[t] = detail::fold_beta(maps, beta.data(), maps.z_tuples[t].twoj1,
                                    maps.z_tuples[t].twoj2, maps.z_tuples[t].twoj);
    const std::int64_t nfull = maps.u_full_total();
    const TwoJ T = state.twojmax;
    pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
      std::vector<Complex> ufull(static_cast<std::size_t>(nfull));
      std::vector<Complex> yloc(static_cast<std::size_t>(nhalf));
      for (std::int64_t a = lo; a < hi; ++a) {
        detail::expand_utot_full(uview, a, T, maps, ufull.data());
        std::fill(yloc.begin(), yloc.end(), Complex{});
        for (std::size_t tz = 0; tz < maps.z_tuples.size(); ++tz) {
          const ZTuple& zt = maps.z_tuples[tz];
          const double betaj = folded[tz];
          const double* cgb = cg.values.data() + zt.cg_offset;
          const TwoJ j = zt.twoj;
          const std::int64_t off1 = maps.u_block_offset[zt.twoj1];
          const std::int64_t off2 = maps.u_block_offset[zt.twoj2];
          Complex* ydst = yloc.data() + maps.u_half_offset[j];
          for (int mb = 0; 2 * mb <= j; ++mb)
            for (int ma = 0; ma <= j; ++ma) {
              const Complex z = detail::z_element(ufull.data(), off1, off2,
                                                  cgb, zt.twoj1, zt.twoj2, j,
                                                  mb, ma);
              Complex& y = ydst[mb * (j + 1) + ma];
              y.re += betaj * z.re;
              y.im += betaj * z.im;
            }
        }
        for (std::int64_t idx = 0; idx < nhalf; ++idx) {
          const Complex& y = yloc[static_cast<std::size_t>(idx)];
          ybase[ylv.re_index(a, idx)] = y.re;
          ybase[ylv.im_index(a, idx)] = y.im;
        }
      }
    });
  } else if (variant.accumulation == Accumulation::concurrent_rmw) {
    pool.parallel_for(natoms * ntup, [&](int, std::int64_t lo, std::int64_t hi) {
      for (std::int64_t u = lo; u < hi; ++u)
        tuple_work(u / ntup, maps.z_tuples[static_cast<std::size_t>(u % ntup)],
                   ybase, true);
    });
  } else {
    std::vector<RealBuffer> priv;
    priv.reserve(static_cast<std::size_t>(pool.workers()));
    for (int w = 0; w < pool.workers(); ++w) {
      priv.emplace_back(ylv.total_doubles(), variant.buffer_alignment());
      priv.back().fill(0.0);
    }
    pool.parallel_for(natoms * ntup, [&](int w, std::int64_t lo, std::int64_t hi) {
      double* mine = priv[static_cast<std::size_t>(w)].data();
      for (std::int64_t u = lo; u < hi; ++u)
        tuple_work(u / ntup, maps.z_tuples[static_cast<std::size_t>(u % ntup)],
                   mine, false);
    });
    pool.parallel_for(ylv.total_doubles(),
                      [&](int, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t s = lo; s < hi; ++s) {
                          double acc = ybase[s];
                          for (const auto& b : priv) acc += b.data()[s];
                          ybase[s] = acc;
                        }
                      });
  }
}

// --- stage: adjoint force contraction ----------------------------------------------

// Staged adjoint forces: contract materialized gradient stacks against the
// adjoint field.  Purely per-pair, so any schedule is race-free.
inline void compute_dE_staged(const Problem& problem,
                              const HalfIntIndexMaps& maps,
                              const VariantSpec& variant, WorkerPool& pool,
                              DescriptorState& state) {
  const int natoms = problem.natoms();
  const TwoJ T = state.twojmax;
  const std::int64_t nhalf = maps.u_half_total();
  detail::require(!state.ylist.empty() &&
                      static_cast<std::int64_t>(state.dulist.size()) ==
                          static_cast<std::int64_t>(natoms) *
                              state.nbor_stride * nhalf * 3,
                  "compute_dE_staged: requires dUlist and Ylist");
  state.record_allocation("dElist", static_cast<std::int64_t>(natoms) *
                                        state.nbor_stride * 3 *
                                        static_cast<std::int64_t>(sizeof(double)));
  state.delist.assign(
      static_cast<std::size_t>(static_cast<std::int64_t>(natoms) *
                               state.nbor_stride * 3),
      0.0);
  const LayoutView& ylv = state.y_layout;
  const double* ybase = state.ylist.data();

  auto pair_body = [&](std::int64_t i, std::int64_t k) {
    const Complex* du3 =
        state.dulist.data() + (i * state.nbor_stride + k) * nhalf * 3;
    double acc[3] = {0, 0, 0};
    for (TwoJ t = 0; t <= T; ++t) {
      const int cols = t + 1;
      for (int mb = 0; 2 * mb <= t; ++mb) {
        const bool middle = (2 * mb == t);
        const int ma_end = middle ? t / 2 : t;
        for (int ma = 0; ma <= ma_end; ++ma) {
          const std::int64_t idx = maps.u_half_offset[t] + mb * cols + ma;
          const Complex y = ylv.load(ybase, i, idx);
          const double wgt = (middle && 2 * ma == t) ? 0.5 : 1.0;
          for (int d = 0; d < 3; ++d)
            acc[d] += wgt * re_mul_conj(du3[idx * 3 + d], y);
        }
      }
    }
    double* dst = state.delist.data() + (i * state.nbor_stride + k) * 3;
    dst[0] = 2.0 * acc[0];
    dst[1] = 2.0 * acc[1];
    dst[2] = 2.0 * acc[2];
  };

  if (variant.parallel_axes == ParallelAxes::atoms) {
    pool.parallel_for(natoms, [&](int, std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i)
        for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k)
          pair_body(i, static_cast<std::int64_t>(k));
    });
  } else {
    const auto pairs = detail::pair_schedule(problem, variant.index_order);
    pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                      [&](int, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t p = lo; p < hi; ++p)
                          pair_body(pairs[p].first, pairs[p].second);
                      });
  }
}

// Fused adjoint forces: rebuild the expansion levels and their gradients on
// the fly (one direction at a time, two half-block level buffers each) and
// contract against the adjoint field during the walk.  Nothing per-pair is
// materialized beyond dElist; in benchmark mode the force scatter is fused
// into the same pass.  Returns true when forces were scattered here (the
// caller must run scatter_forces otherwise).
inline bool compute_fused_dE(const Problem& problem,
                             const HalfIntIndexMaps& maps,
                             const VariantSpec& variant, bool deterministic,
                             WorkerPool& pool, DescriptorState& state) {
  detail::require(!state.ylist.empty(), "compute_fused_dE: requires Ylist");
  const SnapParams& prm = problem.params;
  const int natoms = problem.natoms();
  const TwoJ T = prm.twojmax;
  state.record_allocation("dElist", static_cast<std::int64_t>(natoms) *
                                        state.nbor_stride * 3 *
                                        static_cast<std::int64_t>(sizeof(double)));
  state.delist.assign(
      static_cast<std::size_t>(static_cast<std::int64_t>(natoms) *
                               state.nbor_stride * 3),
      0.0);
  const bool fuse_scatter = variant.fuse_dU_with_force && !deterministic;
  if (fuse_scatter) {
    state.record_allocation("forces", natoms * 3 *
                                          static_cast<std::int64_t>(sizeof(double)));
    state.forces.assign(static_cast<std::size_t>(natoms) * 3, 0.0);
  }

  const LayoutView& ylv = state.y_layout;
  const double* ybase = state.ylist.data();
  const std::int64_t nhalf = maps.u_half_total();
  const std::int64_t maxblk = HalfIntIndexMaps::half_block(T);

  struct Scratch {
    std::vector<Complex> u0, u1;
    std::array<std::vector<Complex>, 3> d0, d1;
    std::vector<Complex> yflat;  // adjoint field of the atom last visited
    std::int64_t yatom = -1;
  };
  std::vector<Scratch> scratch(static_cast<std::size_t>(pool.workers()));

  auto pair_body = [&](int w, std::int64_t i, std::int64_t k) {
    const Neighbor& nb = problem.neighbors[i][static_cast<std::size_t>(k)];
    const SphereMap map = map_to_3sphere(nb.disp, prm.rcut, prm.rmin0, prm.rfac0);
    const auto [sfac, dsfac] = detail::pair_weights(problem, map, nb.index);

    Scratch& s = scratch[static_cast<std::size_t>(w)];
    s.u0.resize(static_cast<std::size_t>(maxblk));
    s.u1.resize(static_cast<std::size_t>(maxblk));
    for (int d = 0; d < 3; ++d) {
      s.d0[d].resize(static_cast<std::size_t>(maxblk));
      s.d1[d].resize(static_cast<std::size_t>(maxblk));
    }
    // Pairs arrive grouped by atom under the default traversal, so flattening
    // the atom's adjoint block once serves its whole neighbor run.
    if (s.yatom != i) {
      s.yflat.resize(static_cast<std::size_t>(nhalf));
      for (std::int64_t idx = 0; idx < nhalf; ++idx)
        s.yflat[static_cast<std::size_t>(idx)] = ylv.load(ybase, i, idx);
      s.yatom = i;
    }
    const Complex* yf = s.yflat.data();

    // One recursion walk serves all three directions: the levels themselves
    // are direction-independent, only the gradient stacks differ.
    double dsf[3], acc[3];
    for (int d = 0; d < 3; ++d) {
      dsf[d] = dsfac * map.rhat[d];
      // Level 0: central element, half weight, overall factor 2 at the end.
      acc[d] = 0.5 * dsf[d] * yf[0].re;
    }
    Complex* uprev = s.u0.data();
    Complex* ucur = s.u1.data();
    Complex* dprev[3];
    Complex* dcur[3];
    uprev[0] = {1.0, 0.0};
    for (int d = 0; d < 3; ++d) {
      dprev[d] = s.d0[static_cast<std::size_t>(d)].data();
      dcur[d] = s.d1[static_cast<std::size_t>(d)].data();
      dprev[d][0] = {0.0, 0.0};
    }
    for (TwoJ t = 1; t <= T; ++t) {
      detail::wigner_u_level_half(map.a, map.b, t, uprev, ucur);
      for (int d = 0; d < 3; ++d)
        detail::wigner_du_level_half(map.a, map.b, map.da[d], map.db[d], t,
                                     uprev, dprev[d], dcur[d]);
      const int cols = t + 1;
      const Complex* ylev = yf + maps.u_half_offset[t];
      for (int mb = 0; 2 * mb <= t; ++mb) {
        const bool middle = (2 * mb == t);
        const int ma_end = middle ? t / 2 : t;
        for (int ma = 0; ma <= ma_end; ++ma) {
          const std::int64_t e = mb * cols + ma;
          const Complex y = ylev[e];
          const double wgt = (middle && 2 * ma == t) ? 0.5 : 1.0;
          for (int d = 0; d < 3; ++d) {
            const Complex duw = {dsf[d] * ucur[e].re + sfac * dcur[d][e].re,
                                 dsf[d] * ucur[e].im + sfac * dcur[d][e].im};
            acc[d] += wgt * re_mul_conj(duw, y);
          }
        }
      }
      std::swap(uprev, ucur);
      for (int d = 0; d < 3; ++d) std::swap(dprev[d], dcur[d]);
    }
    double de[3];
    for (int d = 0; d < 3; ++d) de[d] = 2.0 * acc[d];

    double* dst = state.delist.data() + (i * state.nbor_stride + k) * 3;
    dst[0] = de[0];
    dst[1] = de[1];
    dst[2] = de[2];
    if (fuse_scatter) {
      const std::int32_t kk = nb.index;
      for (int d = 0; d < 3; ++d) {
        detail::atomic_add(state.forces[static_cast<std::size_t>(i * 3 + d)],
                           de[d]);
        detail::atomic_add(state.forces[static_cast<std::size_t>(kk * 3 + d)],
                           -de[d]);
      }
    }
  };

  if (deterministic || variant.parallel_axes == ParallelAxes::atoms) {
    pool.parallel_for(natoms, [&](int w, std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i)
        for (std::size_t k = 0; k < problem.neighbors[i].size(); ++k)
          pair_body(w, i, static_cast<std::int64_t>(k));
    });
  } else {
    const auto pairs = detail::pair_schedule(problem, variant.index_order);
    pool.parallel_for(static_cast<std::int64_t>(pairs.size()),
                      [&](int w, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t p = lo; p < hi; ++p)
                          pair_body(w, pairs[p].first, pairs[p].second);
                      });
  }
  return fuse_scatter;
}

}  // namespace snapforge
