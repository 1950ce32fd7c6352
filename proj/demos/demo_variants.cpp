// SPDX-License-Identifier: MIT
//
// Sweeps the built-in execution ladder on one synthetic problem and prints
// the measured table, then contrasts the storage the two formulations need
// as the band limit grows.  The same data is available from the CLI as
// `snapforge sweep` and `snapforge mem`.

#include <cstdio>

#include "snapforge/snapforge.hpp"

using namespace snapforge;

int main() {
  harness::BenchConfig cfg;
  cfg.natoms = 256;
  cfg.nnbor = 26;
  cfg.twojmax = 8;
  cfg.seed = 9;
  cfg.steps = 3;
  cfg.workers = 4;

  std::printf("sweep: %d atoms, %d neighbors/atom, 2J=%d, %d timed steps, %d workers\n\n",
              cfg.natoms, cfg.nnbor, cfg.twojmax, cfg.steps, cfg.workers);
  const harness::RunReport report = harness::run_benchmark(cfg);

  std::printf("%-11s %12s %14s %9s %12s  %s\n", "variant", "ms/step",
              "Katom-st/s", "speedup", "peak MB", "force checksum");
  for (const harness::VariantRow& row : report.rows) {
    if (!row.ok) {
      std::printf("%-11s failed: %s\n", row.variant.c_str(), row.error.c_str());
      continue;
    }
    std::printf("%-11s %12.3f %14.3f %8.2fx %12.2f  %s%s\n",
                row.variant.c_str(), row.wall_ms_per_step,
                row.katom_steps_per_s, row.speedup_vs_baseline,
                static_cast<double>(row.peak_bytes_total) / (1024.0 * 1024.0),
                row.force_checksum.c_str(), row.unstable ? "  (unstable)" : "");
  }

  // Why the adjoint formulation exists: the coupling store grows much faster
  // with the band limit than the adjoint field it replaces.
  std::printf("\nper-array footprint at 2000 atoms / 26 neighbors:\n");
  std::printf("%-6s %18s %18s %18s\n", "2J", "Zlist (baseline)", "Ylist (adjoint)",
              "fused total");
  for (TwoJ T : {8, 14}) {
    harness::BenchConfig mem = cfg;
    mem.natoms = 2000;
    mem.twojmax = T;
    const auto base = harness::memory_report(mem, "baseline-z");
    const auto adj = harness::memory_report(mem, "v1");
    const auto fus = harness::memory_report(mem, "fused");
    std::printf("%-6d %18lld %18lld %18lld\n", T,
                static_cast<long long>(base.bytes_for("Zlist")),
                static_cast<long long>(adj.bytes_for("Ylist")),
                static_cast<long long>(fus.total_bytes));
  }
  return 0;
}
