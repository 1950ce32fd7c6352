// SPDX-License-Identifier: MIT
//
// Execution-variant descriptions.
//
// A variant is a point in the optimization ladder: the same physics, a
// different schedule/layout/staging combination.  The built-in ladder runs
// from the reference coupling-storage pipeline through successively more
// aggressive adjoint variants to the fully fused kernel.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snapforge/common.hpp"
#include "snapforge/layout.hpp"

namespace snapforge {

enum class Staging { monolithic, fissioned };

// Which loop nest a variant parallelizes: whole atoms, collapsed
// (atom, neighbor) pairs, or additionally the per-atom descriptor index
// space in the adjoint-field stage.
enum class ParallelAxes { atoms, atoms_neighbors, atoms_neighbors_index };

// Ordering of the collapsed pair loop: neighbor-fastest keeps one atom's
// neighbors adjacent; atom-fastest strides atoms innermost.
enum class IndexOrder { neighbor_fastest, atom_fastest };

enum class Accumulation { serialized, privatized, concurrent_rmw };

// Physical layout for the per-atom complex arrays (Ulisttot / Ylist).
struct LayoutSpec {
  std::int64_t tile = 1;      // >1 selects AoSoA lanes of this width
  bool split_planes = false;  // separate real/imaginary planes
  bool atom_fastest = false;  // store with atom as the fastest-moving axis

  std::string label() const {
    std::string s;
    if (tile > 1) {
      s = "aosoa(" + std::to_string(tile) + ")";
      if (split_planes) s += "+split";
    } else if (split_planes) {
      s = "split-real-imag";
    } else {
      s = "interleaved-complex";
    }
    if (atom_fastest) s += "/atom-fastest";
    return s;
  }
};

struct VariantSpec {
  std::string name;
  Staging staging = Staging::fissioned;
  ParallelAxes parallel_axes = ParallelAxes::atoms;
  IndexOrder index_order = IndexOrder::neighbor_fastest;
  LayoutSpec layout;
  bool half_symmetry = false;          // store Ulisttot in half form
  bool transpose_before_Y = false;     // re-lay Ulisttot before the adjoint field
  bool du_fission_per_direction = false;
  bool fuse_dU_with_force = false;     // recompute derivatives inside the force kernel
  bool materialize_ulist = false;
  bool materialize_zlist = false;
  bool materialize_dulist = false;
  Accumulation accumulation = Accumulation::serialized;
  bool aligned_complex = false;        // 64-byte buffers for complex arrays
  bool adjoint = true;                 // false: coupling-storage reference pipeline

  std::size_t buffer_alignment() const { return aligned_complex ? 64 : alignof(double); }
};

// Structural invariants every variant must satisfy before it can run.
inline void validate_variant(const VariantSpec& v) {
  detail::require(!v.name.empty(), "variant: empty name");
  detail::require(v.layout.tile >= 1, "variant: tile must be >= 1");
  detail::require(!(v.fuse_dU_with_force && v.materialize_dulist),
                  "variant: fused force kernel must not materialize dUlist");
  detail::require(!(v.adjoint && v.materialize_zlist),
                  "variant: adjoint pipeline must not materialize Zlist");
  detail::require(v.adjoint || v.materialize_zlist,
                  "variant: reference pipeline requires Zlist");
  detail::require(!(v.half_symmetry && v.materialize_dulist),
                  "variant: half-symmetric Ulisttot is only wired to the fused kernel");
}

// Resolves the physical layout for an (natoms x nidx) array under a variant.
// atom-fastest storage is expressed through the same stride map by widening
// the tile to the whole (padded) atom range.
inline LayoutView resolve_layout(const LayoutSpec& spec, std::int64_t natoms,
                                 std::int64_t nidx) {
  std::int64_t tile = spec.tile;
  if (spec.atom_fastest && tile == 1) tile = natoms > 0 ? natoms : 1;
  return make_layout(natoms, nidx, tile, spec.split_planes);
}

// The built-in ladder, in benchmark order.
inline std::vector<VariantSpec> builtin_variants() {
  std::vector<VariantSpec> out;

  VariantSpec base;
  base.name = "baseline-z";
  base.staging = Staging::monolithic;
  base.parallel_axes = ParallelAxes::atoms;
  base.adjoint = false;
  base.materialize_ulist = true;
  base.materialize_zlist = true;
  base.accumulation = Accumulation::serialized;
  out.push_back(base);

  VariantSpec v1;
  v1.name = "v1";
  v1.staging = Staging::fissioned;
  v1.parallel_axes = ParallelAxes::atoms;
  v1.materialize_ulist = true;
  v1.materialize_dulist = true;
  v1.accumulation = Accumulation::serialized;
  out.push_back(v1);

  VariantSpec v2 = v1;  // collapse the pair loop, accumulate atomically
  v2.name = "v2";
  v2.parallel_axes = ParallelAxes::atoms_neighbors;
  v2.accumulation = Accumulation::concurrent_rmw;
  out.push_back(v2);

  VariantSpec v3 = v2;  // index-major storage for the adjoint field
  v3.name = "v3";
  v3.layout.atom_fastest = true;
  out.push_back(v3);

  VariantSpec v4 = v3;  // atom becomes the fastest collapsed loop index
  v4.name = "v4";
  v4.index_order = IndexOrder::atom_fastest;
  out.push_back(v4);

  VariantSpec v5 = v4;  // adjoint-field work parallelized per (atom, tuple)
  v5.name = "v5";
  v5.parallel_axes = ParallelAxes::atoms_neighbors_index;
  out.push_back(v5);

  VariantSpec v6 = v5;  // re-lay Ulisttot contiguously before the adjoint field
  v6.name = "v6";
  v6.transpose_before_Y = true;
  out.push_back(v6);

  VariantSpec v7 = v6;  // same schedule on 64-byte aligned buffers
  v7.name = "v7";
  v7.aligned_complex = true;
  out.push_back(v7);

  VariantSpec fused;  // everything at once: fission + fusion + packed layout
  fused.name = "fused";
  fused.staging = Staging::fissioned;
  // Atom-major pair traversal keeps each atom's adjoint block hot while its
  // neighbors stream through the fused gradient/force pass.
  fused.parallel_axes = ParallelAxes::atoms_neighbors;
  fused.index_order = IndexOrder::neighbor_fastest;
  fused.layout.tile = 32;
  fused.layout.split_planes = true;
  fused.half_symmetry = true;
  fused.du_fission_per_direction = true;
  fused.fuse_dU_with_force = true;
  fused.accumulation = Accumulation::concurrent_rmw;
  fused.aligned_complex = true;
  out.push_back(fused);

  return out;
}

inline std::vector<std::string> builtin_variant_names() {
  std::vector<std::string> names;
  for (const auto& v : builtin_variants()) names.push_back(v.name);
  return names;
}

inline VariantSpec find_variant(const std::string& name) {
  for (auto& v : builtin_variants())
    if (v.name == name) return v;
  throw InvalidArgument("unknown variant: " + name);
}

}  // namespace snapforge
