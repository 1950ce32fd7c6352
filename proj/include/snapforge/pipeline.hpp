// SPDX-License-Identifier: MIT
//
// End-to-end pipeline orchestration: sequences the stages a variant asks
// for, times each on the monotonic clock, carries the per-array byte ledger
// out of the state, and attaches an analytic work model plus a force
// checksum for cross-run comparison.

#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snapforge/angular_basis.hpp"
#include "snapforge/common.hpp"
#include "snapforge/exec_variants.hpp"
#include "snapforge/halfint_index.hpp"
#include "snapforge/snap_core.hpp"
#include "snapforge/thread_pool.hpp"

namespace snapforge {

// deterministic: atom-ownership accumulation everywhere, bitwise reproducible
// across worker counts and storage variants.  benchmark: the variant's own
// accumulation strategy; results agree only to accumulation-order tolerance.
enum class RunMode { deterministic, benchmark };

struct StageTiming {
  std::string name;
  double ms = 0.0;
  bool force_path = false;  // contributes to force-pipeline grind time
};

// Analytic work model (not hardware counters): floating-point operations and
// array traffic estimated from loop extents, with complex multiply = 6 flops
// and complex add = 2.  Byte traffic counts logical array reads/writes of the
// innermost kernels and ignores caches, so it is a comparison scale between
// variants, not a bandwidth measurement.
struct CounterModel {
  std::int64_t flops = 0;
  std::int64_t bytes_loaded = 0;
  std::int64_t bytes_stored = 0;
};

struct PipelineResult {
  EnergyReport energy;
  std::vector<double> blist;   // per-atom components (when energy was run)
  std::vector<double> forces;  // (atom, direction), logical order
  std::vector<StageTiming> stages;
  std::vector<std::pair<std::string, std::int64_t>> array_bytes;
  std::int64_t total_bytes = 0;
  CounterModel counters;
  std::string force_checksum;
  double force_path_ms = 0.0;
  double total_ms = 0.0;

  double stage_ms(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return s.ms;
    return 0.0;
  }

  std::int64_t bytes_for(const std::string& name) const {
    for (const auto& [nm, b] : array_bytes)
      if (nm == name) return b;
    return 0;
  }
};

namespace detail {

// Layout-invariant content checksum: hashes (re, im) in logical (atom, index)
// order regardless of the physical slot map, so transposed and tiled storage
// of the same values hash identically.
inline std::uint64_t checksum_logical(const LayoutView& lv, const double* base) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](double x) {
    const double v[1] = {x};
    // Chain FNV over each element to keep streaming semantics.
    std::uint64_t bits = fnv1a_bits(v, 1);
    h ^= bits;
    h *= 0x100000001b3ull;
  };
  for (std::int64_t a = 0; a < lv.natoms; ++a)
    for (std::int64_t e = 0; e < lv.nidx; ++e) {
      const Complex v = lv.load(base, a, e);
      mix(v.re);
      mix(v.im);
    }
  return h;
}

// Work-model terms shared by the coupling-product kernels: summed over every
// stored target element, the inner double loop runs nb * na fused
// multiply-accumulate pairs on complex operands.
struct CouplingWork {
  std::int64_t flops_per_atom = 0;
  std::int64_t uloads_per_atom = 0;  // bytes of expansion reads
};

inline CouplingWork coupling_work(const HalfIntIndexMaps& maps) {
  CouplingWork w;
  for (const ZTuple& zt : maps.z_tuples)
    for (int mb = 0; 2 * mb <= zt.twoj; ++mb)
      for (int ma = 0; ma <= zt.twoj; ++ma) {
        const ZLoopBounds zb =
            z_loop_bounds(zt.twoj1, zt.twoj2, zt.twoj, mb, ma);
        // Inner: complex product (6) + scaled accumulate (4); outer: 4.
        w.flops_per_atom += static_cast<std::int64_t>(zb.nb) * (10 * zb.na + 4);
        w.uloads_per_atom +=
            static_cast<std::int64_t>(zb.nb) * zb.na * 2 * 16;
      }
  return w;
}

inline std::int64_t pair_count(const Problem& problem) {
  std::int64_t n = 0;
  for (const auto& nl : problem.neighbors)
    n += static_cast<std::int64_t>(nl.size());
  return n;
}

// Per-variant analytic totals for one force+energy evaluation.
inline CounterModel estimate_counters(const Problem& problem,
                                      const HalfIntIndexMaps& maps,
                                      const VariantSpec& variant,
                                      bool with_energy) {
  CounterModel c;
  const std::int64_t natoms = problem.natoms();
  const std::int64_t pairs = pair_count(problem);
  const std::int64_t nhalf = maps.u_half_total();
  const std::int64_t nfull = maps.u_full_total();
  const std::int64_t nidx = variant.half_symmetry ? nhalf : nfull;
  const std::int64_t ntrip = maps.n_triples();
  const CouplingWork cw = coupling_work(maps);

  // Expansion recursion: ~18 flops per stored element (two complex
  // multiply-accumulates plus the square-root scalings), then a weighted
  // accumulate of 4 flops per stored index.
  c.flops += pairs * (nhalf * 18 + nidx * 4);
  c.bytes_loaded += pairs * nhalf * 16;
  c.bytes_stored += pairs * nidx * 16;

  if (variant.adjoint) {
    // Adjoint field: coupling products plus beta-weighted accumulate.
    c.flops += natoms * (cw.flops_per_atom + nhalf * 4);
    c.bytes_loaded += natoms * cw.uloads_per_atom;
    c.bytes_stored += natoms * nhalf * 16;
    if (variant.fuse_dU_with_force) {
      // Per direction: u and du level walks plus the field contraction.
      c.flops += pairs * 3 * (nhalf * (18 + 30) + nhalf * 11);
      c.bytes_loaded += pairs * 3 * nhalf * 16;  // adjoint field reads
    } else {
      // Materialized gradients (3 directions) then the field contraction.
      c.flops += pairs * (nhalf * 3 * 30 + nhalf * 3 * 6);
      c.bytes_stored += pairs * nhalf * 3 * 16;
      c.flops += pairs * nhalf * 3 * 5;
      c.bytes_loaded += pairs * (nhalf * 3 * 16 + nhalf * 16);
    }
  } else {
    // Reference: materialized coupling products, then per pair the gradient
    // recursion and the three-term contraction per component.
    c.flops += natoms * cw.flops_per_atom;
    c.bytes_loaded += natoms * cw.uloads_per_atom;
    c.bytes_stored += natoms * maps.z_total_elements * 16;
    std::int64_t contract = 0;
    for (const BispectrumTriple& t : maps.z_triples)
      contract += 6 * (HalfIntIndexMaps::half_block(t.twoj) +
                       HalfIntIndexMaps::half_block(t.twoj1) +
                       HalfIntIndexMaps::half_block(t.twoj2));
    c.flops += pairs * (nfull * 3 * 30 + nhalf * 3 * 6 + contract + ntrip * 6);
    c.bytes_loaded += pairs * (2 * contract / 6) * 16;
  }

  if (with_energy) {
    if (variant.adjoint) {
      // Components recomputed from the expansion without stored products.
      c.flops += natoms * (cw.flops_per_atom + ntrip * 8);
    } else {
      std::int64_t bsum = 0;
      for (const BispectrumTriple& t : maps.z_triples)
        bsum += HalfIntIndexMaps::half_block(t.twoj);
      c.flops += natoms * bsum * 6;
      c.bytes_loaded += natoms * bsum * 32;
    }
    c.flops += natoms * ntrip * 2;
  }

  // Force scatter.
  c.flops += pairs * 6;
  c.bytes_loaded += pairs * 24;
  c.bytes_stored += pairs * 48;
  return c;
}

}  // namespace detail

// Runs one full evaluation of the variant's pipeline.  `with_energy` toggles
// the component/energy stages, which are off the force path: benchmark steps
// typically time the force pipeline alone and take the energy from the
// warm-up evaluation.  `budget_bytes` (0 = unlimited) bounds the sum of
// materialized array footprints; exceeding it raises MemoryBudgetError
// before the offending allocation.
inline PipelineResult run_pipeline(const Problem& problem,
                                   const VariantSpec& variant, RunMode mode,
                                   WorkerPool& pool,
                                   std::int64_t budget_bytes = 0,
                                   bool with_energy = true) {
  problem.validate();
  validate_variant(variant);
  const bool det = (mode == RunMode::deterministic);

  const HalfIntIndexMaps maps = HalfIntIndexMaps::build(problem.params.twojmax);
  const CGTable cg = compute_cg_table(problem.params.twojmax, maps);

  DescriptorState state;
  state.budget_bytes = budget_bytes;
  PipelineResult out;

  using clock = std::chrono::steady_clock;
  auto timed = [&](const char* name, bool force_path, auto&& fn) {
    const auto t0 = clock::now();
    fn();
    const auto t1 = clock::now();
    const double ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(
            t1 - t0)
            .count();
    out.stages.push_back({name, ms, force_path});
  };

  timed("U", true, [&] {
    compute_U(problem, maps, variant, det, pool, state);
  });

  if (variant.adjoint) {
    if (variant.transpose_before_Y)
      timed("transpose", true, [&] {
        transpose_ulisttot(state, /*to_atom_fastest=*/false, pool);
      });
    if (with_energy) {
      timed("B", false, [&] {
        compute_B_from_U(problem, cg, maps, pool, state);
      });
      timed("energy", false, [&] {
        out.energy =
            compute_energy(state.blist, problem.params.beta, problem.natoms());
      });
    }
    timed("Y", true, [&] {
      compute_Y(problem, problem.params.beta, cg, maps, variant, det, pool,
                state);
    });
    bool scattered = false;
    if (variant.fuse_dU_with_force) {
      timed("dE", true, [&] {
        scattered = compute_fused_dE(problem, maps, variant, det, pool, state);
      });
    } else {
      timed("dU", true, [&] {
        compute_dU(problem, maps, variant, det, pool, state);
      });
      timed("dE", true, [&] {
        compute_dE_staged(problem, maps, variant, pool, state);
      });
    }
    if (!scattered)
      timed("forces", true, [&] {
        scatter_forces(problem, variant, det, pool, state);
      });
  } else {
    timed("Z", true, [&] {
      compute_Z(problem, cg, maps, variant, pool, state);
    });
    if (with_energy) {
      timed("B", false, [&] { compute_B(problem, maps, pool, state); });
      timed("energy", false, [&] {
        out.energy =
            compute_energy(state.blist, problem.params.beta, problem.natoms());
      });
    }
    timed("dE", true, [&] {
      baseline_force_chain(problem, maps, variant, det, pool, state);
    });
    timed("forces", true, [&] {
      scatter_forces(problem, variant, det, pool, state);
    });
  }

  out.blist = std::move(state.blist);
  out.forces = std::move(state.forces);
  out.array_bytes = state.array_bytes;
  out.total_bytes = state.total_bytes();
  out.counters = detail::estimate_counters(problem, maps, variant, with_energy);
  out.force_checksum = checksum_hex(out.forces);
  for (const auto& s : out.stages) {
    out.total_ms += s.ms;
    if (s.force_path) out.force_path_ms += s.ms;
  }
  return out;
}

}  // namespace snapforge
