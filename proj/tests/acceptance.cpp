// SPDX-License-Identifier: MIT
//
// Acceptance gate: ten go/no-go criteria over the assembled library, printed
// one line each.  Unlike the unit suites this binary exercises the shipping
// surface end to end -- index maps, both pipeline formulations, the variant
// ladder, the verification oracles, and the benchmark harness -- at the
// configurations the project promises to hold.  Exit status is 0 only when
// every criterion passes.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "snapforge/snapforge.hpp"
#include "test_support.hpp"

using namespace snapforge;
using testsupport::make_cluster;

namespace {

struct Gate {
  int failures = 0;
  std::chrono::steady_clock::time_point mark =
      std::chrono::steady_clock::now();

  // One line per criterion: verdict, index, name, measurement summary.
  void line(int idx, const char* name, bool pass, const std::string& detail) {
    const auto now = std::chrono::steady_clock::now();
    const double secs =
        std::chrono::duration<double>(now - mark).count();
    mark = now;
    std::printf("[%s] %2d. %-28s %s  (%.1fs)\n", pass ? "PASS" : "FAIL", idx,
                name, detail.c_str(), secs);
    std::fflush(stdout);
    if (!pass) ++failures;
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Element totals recounted by brute force, independent of the index-map
// bookkeeping: every stored coupling element and every stored half-form
// expansion element, straight from the admissibility rules.
std::int64_t brute_coupling_elements(TwoJ twojmax) {
  std::int64_t total = 0;
  for (TwoJ j1 = 0; j1 <= twojmax; ++j1)
    for (TwoJ j2 = 0; j2 <= j1; ++j2)
      for (TwoJ j = j1 - j2; j <= std::min<TwoJ>(j1 + j2, twojmax); j += 2)
        total += static_cast<std::int64_t>(j / 2 + 1) * (j + 1);
  return total;
}

std::int64_t brute_half_elements(TwoJ twojmax) {
  std::int64_t total = 0;
  for (TwoJ t = 0; t <= twojmax; ++t)
    total += static_cast<std::int64_t>(t / 2 + 1) * (t + 1);
  return total;
}

}  // namespace

int main() {
  std::printf("acceptance gate: 10 criteria\n");
  Gate gate;

  // 1. Component counts at the two published band limits.  Exact integers.
  {
    const std::size_t n8 = enumerate_bispectrum_triples(8).size();
    const std::size_t n14 = enumerate_bispectrum_triples(14).size();
    gate.line(1, "component-counts", n8 == 55 && n14 == 204,
              std::to_string(n8) + " @2J8 (want 55), " + std::to_string(n14) +
                  " @2J14 (want 204)");
  }

  // 2. Cross-formulation force agreement on a spread of seeded problems:
  // clusters with real positions plus fixed-shape synthetic lists, band
  // limits 2, 4, and 8, up to 64 atoms.
  {
    const TwoJ jmax[3] = {2, 4, 8};
    const int sizes[4] = {8, 16, 32, 64};
    int count = 0;
    double worst = 0.0;
    bool ok = true;
    for (int s = 0; s < 15; ++s) {
      const Problem p = make_cluster(sizes[s % 4], jmax[s % 3], 100 + s);
      const oracle::CheckResult r = oracle::cross_pipeline_check(p);
      worst = std::max(worst, r.max_rel_err);
      ok = ok && r.pass;
      ++count;
    }
    for (int s = 15; s < 21; ++s) {
      harness::BenchConfig cfg;
      cfg.natoms = 48;
      cfg.nnbor = 20;
      cfg.twojmax = jmax[s % 3];
      cfg.seed = 120 + static_cast<std::uint64_t>(s);
      const Problem p = harness::generate_synthetic(cfg);
      const oracle::CheckResult r = oracle::cross_pipeline_check(p);
      worst = std::max(worst, r.max_rel_err);
      ok = ok && r.pass;
      ++count;
    }
    gate.line(2, "cross-pipeline-forces", ok,
              std::to_string(count) + " problems, worst rel err " +
                  fmt(worst) + " (tol " + fmt(tol::kCrossPipeline) + ")");
  }

  // 3. Analytic forces vs. central finite differences on 8-atom clusters at
  // band limits 4 and 8, step 1e-6 * Rcut.
  {
    int count = 0;
    double worst = 0.0;
    bool ok = true;
    for (TwoJ T : {4, 8})
      for (int s = 0; s < 3; ++s) {
        const Problem p = make_cluster(8, T, 230 + 10 * T + s);
        const oracle::CheckResult r = oracle::finite_difference_check(p);
        worst = std::max(worst, r.max_rel_err);
        ok = ok && r.pass;
        ++count;
      }
    gate.line(3, "forces-vs-finite-difference", ok,
              std::to_string(count) + " problems, worst rel err " +
                  fmt(worst) + " (tol " + fmt(tol::kForceFd) + ")");
  }

  // 4. Per-atom components invariant under ten seeded random rotations.
  {
    const Problem p = make_cluster(24, 8, 300);
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < 10; ++i) {
      const oracle::CheckResult r =
          oracle::rotation_invariance_check(p, 310 + static_cast<std::uint64_t>(i));
      worst = std::max(worst, r.max_rel_err);
      ok = ok && r.pass;
    }
    gate.line(4, "rotation-invariance", ok,
              "10 rotations, worst rel err " + fmt(worst) + " (tol " +
                  fmt(tol::kRotationInvariance) + ")");
  }

  // 5. Variant physics invariance at 256 atoms / 26 neighbors / 2J8: every
  // ladder entry within 1e-8 of baseline under benchmark scheduling, and
  // within 1e-12 across deterministic (serialized) runs.
  // The fused benchmark result is kept for criterion 7.
  PipelineResult fused_bench;
  double fused_bench_err = 1.0;
  {
    harness::BenchConfig cfg;
    cfg.natoms = 256;
    cfg.nnbor = 26;
    cfg.twojmax = 8;
    cfg.seed = 400;
    const Problem p = harness::generate_synthetic(cfg);
    WorkerPool pool(4);

    const PipelineResult bench_base =
        run_pipeline(p, find_variant("baseline-z"), RunMode::benchmark, pool);
    const PipelineResult det_base = run_pipeline(
        p, find_variant("baseline-z"), RunMode::deterministic, pool);
    double worst_bench = 0.0, worst_det = 0.0;
    for (const VariantSpec& v : builtin_variants()) {
      const PipelineResult rb = run_pipeline(p, v, RunMode::benchmark, pool);
      const double eb = rel_max_err(rb.forces, bench_base.forces);
      worst_bench = std::max(worst_bench, eb);
      if (v.name == "fused") {
        fused_bench = rb;
        fused_bench_err = eb;
      }
      const PipelineResult rd =
          run_pipeline(p, v, RunMode::deterministic, pool);
      worst_det =
          std::max(worst_det, rel_max_err(rd.forces, det_base.forces));
    }
    const bool ok = worst_bench <= tol::kVariantAgreement &&
                    worst_det <= tol::kDeterministicAgreement;
    gate.line(5, "variant-physics-invariance", ok,
              "9 variants: bench err " + fmt(worst_bench) + " (tol " +
                  fmt(tol::kVariantAgreement) + "), det err " +
                  fmt(worst_det) + " (tol " +
                  fmt(tol::kDeterministicAgreement) + ")");
  }

  // 6. Memory scaling: the adjoint field stays strictly below the coupling
  // store at both band limits, the all-in fused footprint undercuts the
  // baseline total, and the element counts behind that ratio match a brute
  // recount of the admissibility rules exactly.
  {
    bool ok = true;
    std::string note;
    for (TwoJ T : {8, 14}) {
      harness::BenchConfig cfg;
      cfg.natoms = 2000;
      cfg.nnbor = 26;
      cfg.twojmax = T;
      const auto base = harness::memory_report(cfg, "baseline-z");
      const auto adj = harness::memory_report(cfg, "v1");
      const auto fus = harness::memory_report(cfg, "fused");
      const std::int64_t zb = base.bytes_for("Zlist");
      const std::int64_t yb = adj.bytes_for("Ylist");
      ok = ok && yb > 0 && yb < zb && fus.total_bytes < base.total_bytes;
      note += "2J" + std::to_string(T) + ": Y " + std::to_string(yb) +
              " < Z " + std::to_string(zb) + "; ";

      const HalfIntIndexMaps maps = HalfIntIndexMaps::build(T);
      ok = ok && maps.z_total_elements == brute_coupling_elements(T) &&
           maps.u_half_total() == brute_half_elements(T);
    }
    gate.line(6, "memory-scaling", ok, note + "element counts exact");
  }

  // 7. Fused storage elimination: its ledger must carry no per-pair
  // expansion or gradient stacks, while its forces stay within the variant
  // tolerance measured in criterion 5.
  {
    const bool no_stacks = !fused_bench.forces.empty() &&
                           fused_bench.bytes_for("Ulist") == 0 &&
                           fused_bench.bytes_for("dUlist") == 0;
    const bool ok = no_stacks && fused_bench_err <= tol::kVariantAgreement;
    gate.line(7, "fused-storage-elimination", ok,
              std::string(no_stacks ? "no Ulist/dUlist entries"
                                    : "per-pair stacks present") +
                  ", force err " + fmt(fused_bench_err));
  }

  // 8. Production recursion against the direct factorial-sum formula.
  {
    const oracle::CheckResult r = oracle::recursion_vs_direct_check(500);
    gate.line(8, "recursion-vs-direct", r.pass,
              "max element err " + fmt(r.max_rel_err) + " (tol " +
                  fmt(tol::kWignerVsDirect) + "), " + r.context);
  }

  // 9. Determinism: one seed, deterministic mode.  Every variant's force
  // checksum must repeat bitwise across two independent runs, and the staged
  // adjoint ladder v1..v7 -- which differs only in layout, traversal order,
  // transposition, and alignment -- must agree bitwise within a run.  The
  // two remaining variants compute forces through different arithmetic and
  // are held to checksum stability, not cross-equality.
  {
    harness::BenchConfig cfg;
    cfg.natoms = 64;
    cfg.nnbor = 14;
    cfg.twojmax = 8;
    cfg.seed = 600;
    bool ok = true;
    std::string ladder_sum;
    std::vector<std::string> first_run;
    for (int run = 0; run < 2; ++run) {
      const Problem p = harness::generate_synthetic(cfg);
      WorkerPool pool(4);
      std::size_t slot = 0;
      for (const VariantSpec& v : builtin_variants()) {
        const PipelineResult r =
            run_pipeline(p, v, RunMode::deterministic, pool);
        if (run == 0)
          first_run.push_back(r.force_checksum);
        else
          ok = ok && r.force_checksum == first_run[slot++];
        if (v.name != "baseline-z" && v.name != "fused") {
          if (ladder_sum.empty()) ladder_sum = r.force_checksum;
          ok = ok && r.force_checksum == ladder_sum;
        }
      }
    }
    gate.line(9, "bitwise-determinism", ok,
              "9 variants stable over 2 runs; ladder checksum " + ladder_sum);
  }

  // 10. Desk-scale performance direction: at 2000 atoms / 26 neighbors /
  // 2J8 with 4 workers, the fused variant must out-grind baseline by at
  // least 1.5x, and the whole ladder sweep must finish inside ten minutes.
  {
    harness::BenchConfig cfg;
    cfg.natoms = 2000;
    cfg.nnbor = 26;
    cfg.twojmax = 8;
    cfg.seed = 700;
    cfg.steps = 2;
    cfg.workers = 4;
    const auto t0 = std::chrono::steady_clock::now();
    const harness::RunReport report = harness::run_benchmark(cfg);
    const double sweep_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    bool ok = sweep_s < 600.0;
    double speedup = 0.0;
    for (const auto& row : report.rows) ok = ok && row.ok;
    if (const harness::VariantRow* fused = report.find("fused")) {
      speedup = fused->speedup_vs_baseline;
      ok = ok && fused->ok && speedup >= 1.5;
    } else {
      ok = false;
    }
    gate.line(10, "fused-grind-speedup", ok,
              "fused " + fmt(speedup) + "x baseline (need 1.5x), sweep " +
                  fmt(sweep_s) + "s (limit 600s)");
  }

  std::printf("%d/10 criteria passed\n", 10 - gate.failures);
  return gate.failures == 0 ? 0 : 1;
}
