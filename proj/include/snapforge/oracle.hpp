// SPDX-License-Identifier: MIT
//
// Independent verification oracles.  Everything here is deliberately written
// without the production index maps or recursions (the one shared piece is
// the 3-sphere mapping, whose derivatives the finite-difference force oracle
// validates independently anyway).  All oracles run single-threaded and
// favor clarity over speed.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "snapforge/common.hpp"
#include "snapforge/pipeline.hpp"
#include "snapforge/rng.hpp"
#include "snapforge/tolerances.hpp"

namespace snapforge::oracle {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string context;
};

namespace detail {

inline CheckResult make_check(std::string name, double err, double tolerance,
                              std::string context) {
  return {std::move(name), err, tolerance, err <= tolerance,
          std::move(context)};
}

inline double ofact(int n) {
  // Exact in double for the oracle's range (twoj <= 8 needs at most 16!).
  static const std::array<double, 17> table = [] {
    std::array<double, 17> t{};
    t[0] = 1.0;
    for (int i = 1; i <= 16; ++i) t[static_cast<std::size_t>(i)] =
        t[static_cast<std::size_t>(i - 1)] * i;
    return t;
  }();
  snapforge::detail::require(n >= 0 && n <= 16, "oracle factorial range");
  return table[static_cast<std::size_t>(n)];
}

inline Complex cpow(Complex x, int n) {
  Complex r{1.0, 0.0};
  for (int i = 0; i < n; ++i) r = r * x;
  return r;
}

}  // namespace detail

// Direct factorial-sum evaluation of one expansion level as a function of
// the Cayley-Klein pair: the polynomial-representation matrix of the group
// element [[a, b], [-conj(b), conj(a)]], no recursion involved.  Row-major
// (mb, ma), (twoj+1) x (twoj+1).
inline std::vector<Complex> wigner_direct(TwoJ twoj, Complex a, Complex b) {
  snapforge::detail::require(twoj >= 0 && twoj <= 8,
                             "wigner_direct: valid for twoj <= 8 only");
  const int t = twoj;
  const Complex al = a;
  const Complex be = b;
  const Complex ga = {-b.re, b.im};  // -conj(b)
  const Complex de = conj(a);
  std::vector<Complex> m(static_cast<std::size_t>((t + 1) * (t + 1)));
  for (int mb = 0; mb <= t; ++mb)
    for (int ma = 0; ma <= t; ++ma) {
      const double num = std::sqrt(detail::ofact(mb) * detail::ofact(t - mb) *
                                   detail::ofact(ma) * detail::ofact(t - ma));
      Complex s{};
      const int klo = ma + mb - t > 0 ? ma + mb - t : 0;
      const int khi = ma < mb ? ma : mb;
      for (int k = klo; k <= khi; ++k) {
        const double den = detail::ofact(k) * detail::ofact(ma - k) *
                           detail::ofact(mb - k) *
                           detail::ofact(k - ma - mb + t);
        const Complex term = detail::cpow(al, k) * detail::cpow(ga, ma - k) *
                             detail::cpow(be, mb - k) *
                             detail::cpow(de, k - ma - mb + t);
        s = s + (num / den) * term;
      }
      m[static_cast<std::size_t>(mb * (t + 1) + ma)] = s;
    }
  return m;
}

namespace detail {

// Total energy of a problem whose neighbor displacements are rebuilt from
// `positions` (minimum image when the problem is periodic).  Pairs drifting
// to or past the cutoff are dropped: the switching function is zero there,
// so the energy stays smooth while the displaced geometry stays legal.
inline double energy_from_positions(
    const Problem& problem, const std::vector<std::array<double, 3>>& positions) {
  Problem q = problem;
  q.positions = positions;
  const double L = problem.box_length;
  const double rc2 = problem.params.rcut * problem.params.rcut;
  for (int i = 0; i < q.natoms(); ++i) {
    std::vector<Neighbor> kept;
    kept.reserve(q.neighbors[static_cast<std::size_t>(i)].size());
    for (Neighbor nb : q.neighbors[static_cast<std::size_t>(i)]) {
      double r2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        double x = positions[static_cast<std::size_t>(nb.index)][d] -
                   positions[static_cast<std::size_t>(i)][d];
        if (L > 0.0) x -= L * std::round(x / L);
        nb.disp[d] = x;
        r2 += x * x;
      }
      if (r2 < rc2) kept.push_back(nb);
    }
    q.neighbors[static_cast<std::size_t>(i)] = std::move(kept);
  }
  WorkerPool pool(1);
  const PipelineResult r =
      run_pipeline(q, find_variant("v1"), RunMode::deterministic, pool);
  return r.energy.total;
}

}  // namespace detail

// Central-difference forces from per-coordinate energy perturbations, with
// the neighbor displacements rebuilt at every evaluation.
inline std::vector<double> finite_difference_forces(const Problem& problem,
                                                    double h) {
  snapforge::detail::require(h > 0.0, "finite_difference_forces: h <= 0");
  snapforge::detail::require(problem.natoms() <= 64,
                             "finite_difference_forces: cost-bounded to 64 atoms");
  snapforge::detail::require(!problem.positions.empty(),
                             "finite_difference_forces: needs positions");
  std::vector<double> f(static_cast<std::size_t>(problem.natoms()) * 3, 0.0);
  std::vector<std::array<double, 3>> pos = problem.positions;
  for (int i = 0; i < problem.natoms(); ++i)
    for (int d = 0; d < 3; ++d) {
      const double keep = pos[static_cast<std::size_t>(i)][d];
      pos[static_cast<std::size_t>(i)][d] = keep + h;
      const double ep = detail::energy_from_positions(problem, pos);
      pos[static_cast<std::size_t>(i)][d] = keep - h;
      const double em = detail::energy_from_positions(problem, pos);
      pos[static_cast<std::size_t>(i)][d] = keep;
      f[static_cast<std::size_t>(i * 3 + d)] = -(ep - em) / (2.0 * h);
    }
  return f;
}

// Forces vs. the finite-difference oracle at the stated step.
inline CheckResult finite_difference_check(const Problem& problem,
                                           double h = 0.0) {
  if (h <= 0.0) h = tol::kFdStepFraction * problem.params.rcut;
  WorkerPool pool(1);
  const PipelineResult r =
      run_pipeline(problem, find_variant("v1"), RunMode::deterministic, pool);
  const std::vector<double> fd = finite_difference_forces(problem, h);
  double worst = 0.0;
  for (std::size_t s = 0; s < fd.size(); ++s)
    worst = std::max(worst, rel_err(r.forces[s], fd[s]));
  return detail::make_check(
      "forces-vs-finite-difference", worst, tol::kForceFd,
      "natoms=" + std::to_string(problem.natoms()) +
          " twojmax=" + std::to_string(problem.params.twojmax) +
          " h=" + std::to_string(h));
}

// Rotates every neighbor displacement by a seeded random proper rotation and
// compares the per-atom component lists: they are rotation invariants.
inline CheckResult rotation_invariance_check(const Problem& problem,
                                             std::uint64_t seed) {
  WorkerPool pool(1);
  const VariantSpec v = find_variant("v1");
  const PipelineResult before =
      run_pipeline(problem, v, RunMode::deterministic, pool);

  Rng rng(seed);
  double R[3][3];
  random_rotation(rng, R);
  Problem q = problem;
  for (auto& nl : q.neighbors)
    for (Neighbor& nb : nl) {
      const double x = nb.disp[0], y = nb.disp[1], z = nb.disp[2];
      for (int d = 0; d < 3; ++d)
        nb.disp[d] = R[d][0] * x + R[d][1] * y + R[d][2] * z;
    }
  const PipelineResult after =
      run_pipeline(q, v, RunMode::deterministic, pool);

  double worst = 0.0;
  for (std::size_t s = 0; s < before.blist.size(); ++s)
    worst = std::max(worst, rel_err(after.blist[s], before.blist[s]));
  return detail::make_check(
      "rotation-invariance", worst, tol::kRotationInvariance,
      "natoms=" + std::to_string(problem.natoms()) +
          " twojmax=" + std::to_string(problem.params.twojmax) +
          " seed=" + std::to_string(seed));
}

// Reference (coupling-storage) forces against adjoint-field forces.
inline CheckResult cross_pipeline_check(const Problem& problem) {
  WorkerPool pool(1);
  const PipelineResult rz = run_pipeline(problem, find_variant("baseline-z"),
                                         RunMode::deterministic, pool);
  const PipelineResult ry =
      run_pipeline(problem, find_variant("v1"), RunMode::deterministic, pool);
  double worst = 0.0;
  for (std::size_t s = 0; s < rz.forces.size(); ++s)
    worst = std::max(worst, rel_err(ry.forces[s], rz.forces[s]));
  return detail::make_check(
      "cross-pipeline-forces", worst, tol::kCrossPipeline,
      "natoms=" + std::to_string(problem.natoms()) +
          " twojmax=" + std::to_string(problem.params.twojmax) +
          " seed=" + std::to_string(problem.seed));
}

// Translation invariance of the energy: closed neighbor lists make the
// forces sum to zero in every direction.
inline CheckResult newton_sum_check(const std::vector<double>& forces) {
  double sum[3] = {0, 0, 0};
  double fmax = 0.0;
  for (std::size_t s = 0; s < forces.size(); ++s) {
    sum[s % 3] += forces[s];
    fmax = std::max(fmax, std::abs(forces[s]));
  }
  const double scale = fmax > tol::kAbsFloor ? fmax : tol::kAbsFloor;
  double worst = 0.0;
  for (double d : sum) worst = std::max(worst, std::abs(d) / scale);
  return detail::make_check(
      "newton-force-sum", worst, tol::kNewtonSum,
      "natoms=" + std::to_string(forces.size() / 3));
}

// Production recursion against the direct factorial-sum formula for every
// level within the oracle's range, over seeded random displacements.
inline CheckResult recursion_vs_direct_check(std::uint64_t seed,
                                             int samples = 20) {
  const TwoJ T = 8;
  const double rcut = 4.7, rmin0 = 0.0, rfac0 = 0.99363;
  const HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
  Rng rng(seed);
  std::vector<Complex> u(static_cast<std::size_t>(maps.u_full_total()));
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    double d[3];
    rng.unit_vector(d);
    const double r = rcut * rng.uniform(0.3, 0.95);
    for (double& x : d) x *= r;
    const SphereMap map = map_to_3sphere(d, rcut, rmin0, rfac0);
    snapforge::detail::wigner_u_recursion(map.a, map.b, T, false, u.data());
    for (TwoJ t = 0; t <= T; ++t) {
      const std::vector<Complex> direct = wigner_direct(t, map.a, map.b);
      for (int e = 0; e < (t + 1) * (t + 1); ++e) {
        const Complex got = u[static_cast<std::size_t>(
            maps.u_block_offset[t] + e)];
        const Complex want = direct[static_cast<std::size_t>(e)];
        worst = std::max(worst, std::abs(got.re - want.re));
        worst = std::max(worst, std::abs(got.im - want.im));
      }
    }
  }
  return detail::make_check("recursion-vs-direct", worst, tol::kWignerVsDirect,
                            "samples=" + std::to_string(samples) +
                                " twoj<=8 seed=" + std::to_string(seed));
}

// The default verification suite over one problem.  Skips the (expensive)
// finite-difference check when the problem exceeds its size bound.
inline std::vector<CheckResult> run_default_suite(const Problem& problem,
                                                  std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(recursion_vs_direct_check(seed));
  out.push_back(cross_pipeline_check(problem));
  out.push_back(rotation_invariance_check(problem, seed + 1));
  if (problem.natoms() <= 16 && !problem.positions.empty())
    out.push_back(finite_difference_check(problem));
  WorkerPool pool(1);
  const PipelineResult r =
      run_pipeline(problem, find_variant("v1"), RunMode::deterministic, pool);
  out.push_back(newton_sum_check(r.forces));
  return out;
}

}  // namespace snapforge::oracle
