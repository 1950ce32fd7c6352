// SPDX-License-Identifier: MIT
//
// Walkthrough: build a small periodic problem, evaluate energy and forces
// through both formulations, and run the verification suite on the result.
// Everything here goes through the public headers the way a caller would.

#include <cstdio>

#include "snapforge/snapforge.hpp"

using namespace snapforge;

int main() {
  // A 12-atom periodic box, bisected to an average of ~4 neighbors in range.
  harness::BenchConfig cfg;
  cfg.natoms = 12;
  cfg.nnbor = 4;
  cfg.twojmax = 8;
  cfg.seed = 42;
  cfg.synthetic_neighbors = false;
  const Problem p = harness::generate_physical(cfg);

  std::size_t npairs = 0;
  for (const auto& nl : p.neighbors) npairs += nl.size();
  std::printf("problem: %d atoms, box %.3f, %.1f neighbors/atom, 2J=%d, %zu components\n",
              p.natoms(), p.box_length,
              static_cast<double>(npairs) / p.natoms(), p.params.twojmax,
              p.params.beta.size());

  // Reference formulation: materialized coupling store.
  WorkerPool pool(2);
  const PipelineResult rz =
      run_pipeline(p, find_variant("baseline-z"), RunMode::deterministic, pool);
  // Adjoint formulation, fully fused force path.
  const PipelineResult rf =
      run_pipeline(p, find_variant("fused"), RunMode::deterministic, pool);

  std::printf("\nenergy  baseline-z % .15e\n", rz.energy.total);
  std::printf("energy  fused      % .15e\n", rf.energy.total);
  std::printf("forces  max rel difference %.3e\n\n",
              rel_max_err(rz.forces, rf.forces));

  std::printf("%-6s %14s %14s %14s\n", "atom", "Fx", "Fy", "Fz");
  for (int i = 0; i < p.natoms() && i < 6; ++i)
    std::printf("%-6d % 14.6e % 14.6e % 14.6e\n", i,
                rz.forces[static_cast<std::size_t>(i) * 3],
                rz.forces[static_cast<std::size_t>(i) * 3 + 1],
                rz.forces[static_cast<std::size_t>(i) * 3 + 2]);
  if (p.natoms() > 6) std::printf("  ... (%d more)\n", p.natoms() - 6);

  std::printf("\nper-stage wall (ms), baseline-z then fused:\n");
  for (const auto& s : rz.stages) std::printf("  %-10s %8.3f\n", s.name.c_str(), s.ms);
  std::printf("  --\n");
  for (const auto& s : rf.stages) std::printf("  %-10s %8.3f\n", s.name.c_str(), s.ms);

  // Independent checks: recursion oracle, cross-formulation forces, rotation
  // invariance, finite differences (small problems only), force sum.
  std::printf("\nverification suite:\n");
  int failed = 0;
  for (const oracle::CheckResult& c : oracle::run_default_suite(p, cfg.seed)) {
    std::printf("  [%s] %-28s err %.3e  (tol %.0e)\n",
                c.pass ? "PASS" : "FAIL", c.name.c_str(), c.max_rel_err,
                c.tolerance);
    if (!c.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
