// SPDX-License-Identifier: MIT
//
// Stage-level checks for the descriptor pipeline on small clusters where
// every quantity can be recomputed independently: expansion accumulation,
// coupling products against a brute-force double sum, bispectrum storage
// paths, and agreement between the reference and adjoint force chains.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "snapforge/angular_basis.hpp"
#include "snapforge/exec_variants.hpp"
#include "snapforge/halfint_index.hpp"
#include "snapforge/rng.hpp"
#include "snapforge/snap_core.hpp"
#include "snapforge/thread_pool.hpp"
#include "snapforge/tolerances.hpp"
#include "test_support.hpp"

using namespace snapforge;
using testsupport::kRcut;
using testsupport::make_cluster;

namespace {

// Runs the full staged adjoint chain under `variant` and returns the forces.
std::vector<double> adjoint_forces(const Problem& p, const VariantSpec& variant,
                                   bool deterministic, WorkerPool& pool,
                                   DescriptorState& state) {
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(p.params.twojmax);
  CGTable cg = compute_cg_table(p.params.twojmax, maps);
  state = DescriptorState{};
  compute_U(p, maps, variant, deterministic, pool, state);
  if (variant.transpose_before_Y)
    transpose_ulisttot(state, /*to_atom_fastest=*/false, pool);
  compute_Y(p, p.params.beta, cg, maps, variant, deterministic, pool, state);
  bool scattered = false;
  if (variant.fuse_dU_with_force) {
    scattered = compute_fused_dE(p, maps, variant, deterministic, pool, state);
  } else {
    compute_dU(p, maps, variant, deterministic, pool, state);
    compute_dE_staged(p, maps, variant, pool, state);
  }
  if (!scattered) scatter_forces(p, variant, deterministic, pool, state);
  return state.forces;
}

std::vector<double> reference_forces(const Problem& p, bool deterministic,
                                     WorkerPool& pool, DescriptorState& state) {
  const VariantSpec variant = find_variant("baseline-z");
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(p.params.twojmax);
  CGTable cg = compute_cg_table(p.params.twojmax, maps);
  state = DescriptorState{};
  compute_U(p, maps, variant, deterministic, pool, state);
  compute_Z(p, cg, maps, variant, pool, state);
  baseline_force_chain(p, maps, variant, deterministic, pool, state);
  scatter_forces(p, variant, deterministic, pool, state);
  return state.forces;
}

}  // namespace

TEST_CASE("expansion accumulation matches a direct neighbor sum") {
  const TwoJ T = 6;
  Problem p = make_cluster(3, T, 901);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  WorkerPool pool(2);

  // Direct: wself on the diagonal plus explicitly weighted stacks.
  const std::int64_t nfull = maps.u_full_total();
  std::vector<Complex> expect(static_cast<std::size_t>(p.natoms()) * nfull,
                              Complex{});
  for (int i = 0; i < p.natoms(); ++i) {
    Complex* row = expect.data() + static_cast<std::int64_t>(i) * nfull;
    for (TwoJ t = 0; t <= T; ++t)
      for (int mb = 0; mb <= t; ++mb)
        row[maps.u_block_offset[t] + mb * (t + 1) + mb] = {1.0, 0.0};
    std::vector<Complex> stack(static_cast<std::size_t>(nfull));
    for (const Neighbor& nb : p.neighbors[static_cast<std::size_t>(i)]) {
      SphereMap m = map_to_3sphere(nb.disp, kRcut, 0.0, p.params.rfac0);
      auto [fc, dfc] = switching_function(m.r, kRcut, 0.0);
      (void)dfc;
      detail::wigner_u_recursion(m.a, m.b, T, false, stack.data());
      for (std::int64_t e = 0; e < nfull; ++e) {
        row[e].re += fc * stack[e].re;
        row[e].im += fc * stack[e].im;
      }
    }
  }

  // Every storage form must reproduce those values through the view.
  for (const char* name : {"baseline-z", "v3", "fused"}) {
    const VariantSpec v = find_variant(name);
    DescriptorState state;
    compute_U(p, maps, v, /*deterministic=*/true, pool, state);
    const detail::UtotView view{state.ulisttot.data(), &state.utot_layout,
                                &maps, state.utot_half};
    double worst = 0.0;
    for (int i = 0; i < p.natoms(); ++i)
      for (TwoJ t = 0; t <= T; ++t)
        for (int mb = 0; mb <= t; ++mb)
          for (int ma = 0; ma <= t; ++ma) {
            const Complex got = view.get(i, t, mb, ma);
            const Complex want =
                expect[static_cast<std::size_t>(
                    static_cast<std::int64_t>(i) * nfull +
                    maps.u_block_offset[t] + mb * (t + 1) + ma)];
            worst = std::max(worst, std::abs(got.re - want.re));
            worst = std::max(worst, std::abs(got.im - want.im));
          }
    INFO("variant " << name);
    CHECK(worst == 0.0);  // same arithmetic order: bitwise
  }
}

TEST_CASE("coupling products match a brute-force double sum") {
  const TwoJ T = 6;
  Problem p = make_cluster(2, T, 902);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  CGTable cg = compute_cg_table(T, maps);
  WorkerPool pool(1);
  const VariantSpec v = find_variant("baseline-z");
  DescriptorState state;
  compute_U(p, maps, v, true, pool, state);
  compute_Z(p, cg, maps, v, pool, state);

  const detail::UtotView view{state.ulisttot.data(), &state.utot_layout, &maps,
                              state.utot_half};
  // Brute force: loop over every projection pair of the factor levels and
  // keep those whose magnetic numbers add up to the target's.
  for (const ZTuple& zt : maps.z_tuples) {
    const TwoJ j1 = zt.twoj1, j2 = zt.twoj2, j = zt.twoj;
    const double* cgb = cg.values.data() + zt.cg_offset;
    const Complex* blk = state.zlist.data() + zt.elem_offset;
    for (int mb = 0; 2 * mb <= j; ++mb)
      for (int ma = 0; ma <= j; ++ma) {
        Complex zbrute{};
        for (int mb1 = 0; mb1 <= j1; ++mb1)
          for (int mb2 = 0; mb2 <= j2; ++mb2) {
            if ((2 * mb1 - j1) + (2 * mb2 - j2) != 2 * mb - j) continue;
            Complex inner{};
            for (int ma1 = 0; ma1 <= j1; ++ma1)
              for (int ma2 = 0; ma2 <= j2; ++ma2) {
                if ((2 * ma1 - j1) + (2 * ma2 - j2) != 2 * ma - j) continue;
                const double c = cgb[ma1 * (j2 + 1) + ma2];
                const Complex u1 = view.get(0, j1, mb1, ma1);
                const Complex u2 = view.get(0, j2, mb2, ma2);
                inner.re += c * (u1.re * u2.re - u1.im * u2.im);
                inner.im += c * (u1.re * u2.im + u1.im * u2.re);
              }
            const double c = cgb[mb1 * (j2 + 1) + mb2];
            zbrute.re += c * inner.re;
            zbrute.im += c * inner.im;
          }
        const Complex got = blk[mb * (j + 1) + ma];
        INFO("tuple (" << j1 << "," << j2 << "," << j << ") mb=" << mb
                       << " ma=" << ma);
        CHECK(std::abs(got.re - zbrute.re) < 1e-12);
        CHECK(std::abs(got.im - zbrute.im) < 1e-12);
      }
  }
}

TEST_CASE("single-level bispectrum has a closed form") {
  // With twojmax = 0 the only component is the cube of the scalar
  // expansion: (wself + sum_k w fc(r_k))^3.
  Problem p = make_cluster(3, 0, 903);
  p.params.wself = 1.0;
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(0);
  CGTable cg = compute_cg_table(0, maps);
  WorkerPool pool(1);
  const VariantSpec v = find_variant("baseline-z");
  DescriptorState state;
  compute_U(p, maps, v, true, pool, state);
  compute_Z(p, cg, maps, v, pool, state);
  compute_B(p, maps, pool, state);
  for (int i = 0; i < p.natoms(); ++i) {
    double u0 = 1.0;
    for (const Neighbor& nb : p.neighbors[static_cast<std::size_t>(i)]) {
      const double r = std::sqrt(nb.disp[0] * nb.disp[0] +
                                 nb.disp[1] * nb.disp[1] +
                                 nb.disp[2] * nb.disp[2]);
      u0 += switching_function(r, kRcut, 0.0).first;
    }
    CHECK(state.blist[static_cast<std::size_t>(i)] ==
          Catch::Approx(u0 * u0 * u0).epsilon(1e-14));
  }
}

TEST_CASE("bispectrum agrees bitwise between storage paths") {
  const TwoJ T = 8;
  Problem p = make_cluster(4, T, 904);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  CGTable cg = compute_cg_table(T, maps);
  WorkerPool pool(2);

  // Reference: materialized coupling products over full storage.
  DescriptorState sz;
  const VariantSpec vz = find_variant("baseline-z");
  compute_U(p, maps, vz, true, pool, sz);
  compute_Z(p, cg, maps, vz, pool, sz);
  compute_B(p, maps, pool, sz);

  // Adjoint energy path: on-the-fly products over half storage.
  DescriptorState sy;
  const VariantSpec vy = find_variant("fused");
  compute_U(p, maps, vy, true, pool, sy);
  compute_B_from_U(p, cg, maps, pool, sy);

  REQUIRE(sz.blist.size() == sy.blist.size());
  CHECK(std::memcmp(sz.blist.data(), sy.blist.data(),
                    sz.blist.size() * sizeof(double)) == 0);

  // And the linear energy model sees identical components.
  EnergyReport ez = compute_energy(sz.blist, p.params.beta, p.natoms());
  EnergyReport ey = compute_energy(sy.blist, p.params.beta, p.natoms());
  CHECK(ez.total == ey.total);
}

TEST_CASE("reference force assembly: monolithic equals materialized chain") {
  const TwoJ T = 6;
  Problem p = make_cluster(4, T, 905, /*ntypes=*/2);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  CGTable cg = compute_cg_table(T, maps);
  WorkerPool pool(2);
  const VariantSpec vz = find_variant("baseline-z");

  DescriptorState mono;
  compute_U(p, maps, vz, true, pool, mono);
  compute_Z(p, cg, maps, vz, pool, mono);
  baseline_force_chain(p, maps, vz, true, pool, mono);
  scatter_forces(p, vz, true, pool, mono);

  // Fissioned equivalent: materialize dUlist and the per-triple gradients,
  // then contract beta.  Same arithmetic order, so bitwise equal.
  VariantSpec vmat = vz;
  vmat.materialize_dulist = true;
  DescriptorState mat;
  compute_U(p, maps, vmat, true, pool, mat);
  compute_Z(p, cg, maps, vmat, pool, mat);
  compute_dU(p, maps, vmat, true, pool, mat);
  std::vector<double> dblist = compute_dB(p, maps, vmat, pool, mat);
  update_forces_baseline(p, dblist, p.params.beta, vmat, true, pool, mat);

  REQUIRE(mono.delist.size() == mat.delist.size());
  CHECK(std::memcmp(mono.delist.data(), mat.delist.data(),
                    mono.delist.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(mono.forces.data(), mat.forces.data(),
                    mono.forces.size() * sizeof(double)) == 0);
}

TEST_CASE("adjoint forces match the reference formulation") {
  for (TwoJ T : {2, 4, 8}) {
    Problem p = make_cluster(5, T, 906 + T);
    WorkerPool pool(2);
    DescriptorState sref, sadj;
    const std::vector<double> fref = reference_forces(p, true, pool, sref);
    const std::vector<double> fadj =
        adjoint_forces(p, find_variant("v1"), true, pool, sadj);
    REQUIRE(fref.size() == fadj.size());
    double worst = 0.0;
    for (std::size_t s = 0; s < fref.size(); ++s)
      worst = std::max(worst, rel_err(fadj[s], fref[s]));
    INFO("twojmax = " << T);
    CHECK(worst < tol::kCrossPipeline);
  }
}

TEST_CASE("fused force kernel matches the staged adjoint") {
  const TwoJ T = 8;
  Problem p = make_cluster(6, T, 910);
  WorkerPool pool(2);
  DescriptorState ss, sf;
  const std::vector<double> fstaged =
      adjoint_forces(p, find_variant("v1"), true, pool, ss);
  const std::vector<double> ffused =
      adjoint_forces(p, find_variant("fused"), true, pool, sf);
  REQUIRE(fstaged.size() == ffused.size());
  double worst = 0.0;
  for (std::size_t s = 0; s < fstaged.size(); ++s)
    worst = std::max(worst, rel_err(ffused[s], fstaged[s]));
  CHECK(worst < tol::kFusedVsStaged);
}

TEST_CASE("zero-weight neighbors contribute nothing") {
  const TwoJ T = 4;
  Problem p = make_cluster(4, T, 907, /*ntypes=*/2);
  p.params.weights[1] = 0.0;  // silence every type-1 neighbor
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  WorkerPool pool(1);
  VariantSpec v = find_variant("v1");
  DescriptorState state;
  compute_U(p, maps, v, true, pool, state);
  compute_dU(p, maps, v, true, pool, state);

  const std::int64_t nhalf = maps.u_half_total();
  bool found = false;
  for (int i = 0; i < p.natoms(); ++i)
    for (std::size_t k = 0; k < p.neighbors[static_cast<std::size_t>(i)].size();
         ++k) {
      if (p.type_of(p.neighbors[static_cast<std::size_t>(i)][k].index) != 1)
        continue;
      found = true;
      const Complex* du =
          state.dulist.data() +
          (static_cast<std::int64_t>(i) * state.nbor_stride +
           static_cast<std::int64_t>(k)) * nhalf * 3;
      for (std::int64_t e = 0; e < nhalf * 3; ++e) {
        CHECK(du[e].re == 0.0);
        CHECK(du[e].im == 0.0);
      }
    }
  REQUIRE(found);
}

TEST_CASE("transpose re-lays values bit-for-bit") {
  const TwoJ T = 6;
  Problem p = make_cluster(4, T, 908);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  WorkerPool pool(2);
  const VariantSpec v6 = find_variant("v6");
  REQUIRE(v6.transpose_before_Y);

  DescriptorState state;
  compute_U(p, maps, v6, true, pool, state);
  std::vector<Complex> before(
      static_cast<std::size_t>(p.natoms()) *
      static_cast<std::size_t>(maps.u_full_total()));
  const detail::UtotView v0{state.ulisttot.data(), &state.utot_layout, &maps,
                            state.utot_half};
  std::size_t e = 0;
  for (int i = 0; i < p.natoms(); ++i)
    for (TwoJ t = 0; t <= T; ++t)
      for (int mb = 0; mb <= t; ++mb)
        for (int ma = 0; ma <= t; ++ma) before[e++] = v0.get(i, t, mb, ma);

  REQUIRE(state.utot_layout.tile > 1);  // index-major before the transpose
  transpose_ulisttot(state, /*to_atom_fastest=*/false, pool);
  REQUIRE(state.utot_layout.tile == 1);  // atom-major after

  const detail::UtotView v1{state.ulisttot.data(), &state.utot_layout, &maps,
                            state.utot_half};
  e = 0;
  for (int i = 0; i < p.natoms(); ++i)
    for (TwoJ t = 0; t <= T; ++t)
      for (int mb = 0; mb <= t; ++mb)
        for (int ma = 0; ma <= t; ++ma) {
          const Complex got = v1.get(i, t, mb, ma);
          REQUIRE(got.re == before[e].re);
          REQUIRE(got.im == before[e].im);
          ++e;
        }
}

TEST_CASE("deterministic accumulation is reproducible across worker counts") {
  const TwoJ T = 8;
  Problem p = make_cluster(6, T, 909);
  for (const char* name : {"v2", "v5", "fused"}) {
    const VariantSpec v = find_variant(name);
    WorkerPool p1(1), p4(4);
    DescriptorState s1, s4;
    const std::vector<double> f1 = adjoint_forces(p, v, true, p1, s1);
    const std::vector<double> f4 = adjoint_forces(p, v, true, p4, s4);
    INFO("variant " << name);
    REQUIRE(f1.size() == f4.size());
    CHECK(std::memcmp(f1.data(), f4.data(), f1.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(s1.ulisttot.data(), s4.ulisttot.data(),
                      static_cast<std::size_t>(s1.utot_layout.total_doubles()) *
                          sizeof(double)) == 0);
  }
}

TEST_CASE("one-hot beta isolates a single component's gradient") {
  // Forces under a one-hot linear model must match the corresponding
  // materialized per-triple gradient, which pins the multiplicity folding
  // in the adjoint field construction.
  const TwoJ T = 4;
  Problem base = make_cluster(3, T, 911);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  const std::int64_t ntrip = maps.n_triples();
  WorkerPool pool(2);

  // Materialized per-triple gradients, computed once.
  VariantSpec vmat = find_variant("baseline-z");
  vmat.materialize_dulist = true;
  CGTable cg = compute_cg_table(T, maps);
  DescriptorState smat;
  compute_U(base, maps, vmat, true, pool, smat);
  compute_Z(base, cg, maps, vmat, pool, smat);
  compute_dU(base, maps, vmat, true, pool, smat);
  const std::vector<double> dblist = compute_dB(base, maps, vmat, pool, smat);

  for (std::int64_t l = 0; l < ntrip; l += 2) {  // every other triple: cheap
    Problem p = base;
    std::fill(p.params.beta.begin(), p.params.beta.end(), 0.0);
    p.params.beta[static_cast<std::size_t>(l)] = 1.0;

    DescriptorState sadj;
    const std::vector<double> fadj =
        adjoint_forces(p, find_variant("v1"), true, pool, sadj);

    DescriptorState sref = smat;  // reuse arrays; only beta changed
    update_forces_baseline(p, dblist, p.params.beta, vmat, true, pool, sref);

    double worst = 0.0;
    for (std::size_t s = 0; s < fadj.size(); ++s)
      worst = std::max(worst, rel_err(fadj[s], sref.forces[s]));
    INFO("triple index " << l);
    CHECK(worst < tol::kCrossPipeline);
  }
}

TEST_CASE("memory ledger enforces the byte budget") {
  const TwoJ T = 8;
  Problem p = make_cluster(4, T, 912);
  HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  CGTable cg = compute_cg_table(T, maps);
  WorkerPool pool(1);
  const VariantSpec vz = find_variant("baseline-z");

  DescriptorState state;
  compute_U(p, maps, vz, true, pool, state);
  const std::int64_t used = state.total_bytes();
  state.budget_bytes = used + 16;  // far too small for the coupling array
  try {
    compute_Z(p, cg, maps, vz, pool, state);
    FAIL("budget violation not detected");
  } catch (const MemoryBudgetError& e) {
    CHECK(e.required_bytes ==
          static_cast<std::int64_t>(p.natoms()) * maps.z_total_elements *
              static_cast<std::int64_t>(sizeof(Complex)));
    CHECK(e.budget_bytes == used + 16);
  }
}
