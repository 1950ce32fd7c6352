// SPDX-License-Identifier: MIT
//
// Benchmark orchestration: synthetic problem generation, neighbor-list
// construction, variant sweeps, grind-time and memory reporting, and
// machine-readable output.
//
// Reporting conventions
// ---------------------
//   * The warm-up evaluation runs the full pipeline (components + energy)
//     and is excluded from timing.  The timed repetitions run the force
//     pipeline alone, so "wall ms/step" is the cost of one force evaluation.
//   * wall_ms_per_step is the median over the timed repetitions; grind
//     speed (Katom-steps/s) is natoms x steps / total-timed-seconds / 1000.
//   * speedup_vs_baseline divides the reference pipeline's median step time
//     by the variant's.  The reference ("baseline-z") is measured and
//     reported alongside whenever speedups are requested; pass
//     ensure_baseline = false to skip it (speedups then read 0).
//   * CSV and JSON carry the same numeric content; JSON additionally holds
//     per-stage timings, per-array bytes, and the analytic work counters.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "snapforge/common.hpp"
#include "snapforge/exec_variants.hpp"
#include "snapforge/pipeline.hpp"
#include "snapforge/rng.hpp"
#include "snapforge/snap_core.hpp"
#include "snapforge/thread_pool.hpp"

namespace snapforge::harness {

enum class OutputFormat { csv, json };

// One benchmark request: problem shape, run shape, and output routing.
struct BenchConfig {
  int natoms = 2000;
  int nnbor = 26;  // target neighbors per atom
  TwoJ twojmax = 8;
  double rcut = 4.7;
  double rmin0 = 0.0;
  double rfac0 = 0.99363;
  std::uint64_t seed = 12345;
  int steps = 5;                       // timed repetitions (warm-up extra)
  std::vector<std::string> variants;   // empty selects the whole ladder
  int workers = 1;
  bool deterministic = false;
  bool synthetic_neighbors = true;     // fabricate fixed-shape neighbor lists
  bool ensure_baseline = true;         // measure baseline-z for speedups
  std::int64_t budget_bytes = 0;       // 0 = unlimited
  std::string out_path;                // empty = caller's stream
  OutputFormat format = OutputFormat::csv;

  void validate() const {
    detail::require(natoms >= 1, "config: natoms must be >= 1");
    detail::require(nnbor >= 0, "config: neighbor target must be >= 0");
    detail::require(twojmax >= 0, "config: twojmax must be >= 0");
    detail::require(steps >= 1, "config: steps must be >= 1");
    detail::require(workers >= 1, "config: workers must be >= 1");
    detail::require(rcut > rmin0 && rmin0 >= 0.0,
                    "config: need Rcut > rmin0 >= 0");
    for (const auto& name : variants) find_variant(name);  // throws if unknown
  }
};

// --- neighbor lists ---------------------------------------------------------

namespace detail {

inline double wrap_coord(double x, double box) {
  double w = x - box * std::floor(x / box);
  // floor rounding can land exactly on the upper edge; fold it back.
  return w >= box ? w - box : w;
}

inline double min_image(double d, double box) {
  return d - box * std::nearbyint(d / box);
}

// Minimum-image displacement between wrapped coordinates, and the pair
// insertion shared by both construction paths.
inline void insert_pair(std::vector<std::vector<Neighbor>>& lists, int i,
                        int k, const double d[3]) {
  Neighbor fwd;
  fwd.index = k;
  fwd.disp[0] = d[0];
  fwd.disp[1] = d[1];
  fwd.disp[2] = d[2];
  Neighbor rev;
  rev.index = i;
  rev.disp[0] = -d[0];
  rev.disp[1] = -d[1];
  rev.disp[2] = -d[2];
  lists[static_cast<std::size_t>(i)].push_back(fwd);
  lists[static_cast<std::size_t>(k)].push_back(rev);
}

}  // namespace detail

// Periodic neighbor lists by cell decomposition (cell edge >= Rcut).  Each
// pair strictly inside Rcut appears in both atoms' lists with exactly
// negated displacement vectors; a pair at exactly Rcut is excluded.  The
// minimum-image convention requires Rcut <= box/2.  Fewer than three cells
// per edge makes the half stencil ambiguous, so small boxes fall back to a
// direct pair scan with the same arithmetic.  Lists come back sorted by
// neighbor index, which makes the construction order immaterial.
inline std::vector<std::vector<Neighbor>> build_neighborlist(
    const std::vector<std::array<double, 3>>& positions, double box,
    double rcut) {
  snapforge::detail::require(box > 0.0 && rcut > 0.0,
                             "build_neighborlist: box and Rcut must be positive");
  snapforge::detail::require(rcut <= 0.5 * box,
                             "build_neighborlist: Rcut must not exceed box/2");
  const int n = static_cast<int>(positions.size());
  std::vector<std::vector<Neighbor>> lists(static_cast<std::size_t>(n));
  if (n < 2) return lists;

  std::vector<std::array<double, 3>> w(positions.size());
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
          detail::wrap_coord(positions[static_cast<std::size_t>(i)]
                                      [static_cast<std::size_t>(c)],
                             box);

  const double rc2 = rcut * rcut;
  auto try_pair = [&](int i, int k) {
    double d[3];
    for (int c = 0; c < 3; ++c)
      d[c] = detail::min_image(w[static_cast<std::size_t>(k)]
                                [static_cast<std::size_t>(c)] -
                                   w[static_cast<std::size_t>(i)]
                                    [static_cast<std::size_t>(c)],
                               box);
    const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if (r2 < rc2) detail::insert_pair(lists, i, k, d);
  };

  const int ncell = static_cast<int>(std::floor(box / rcut));
  if (ncell < 3) {
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) try_pair(i, k);
  } else {
    const double inv_edge = static_cast<double>(ncell) / box;
    auto cell_of = [&](int i, int c) {
      int idx = static_cast<int>(w[static_cast<std::size_t>(i)]
                                  [static_cast<std::size_t>(c)] *
                                 inv_edge);
      return idx >= ncell ? ncell - 1 : idx;
    };
    std::vector<std::vector<int>> bins(
        static_cast<std::size_t>(ncell) * ncell * ncell);
    for (int i = 0; i < n; ++i) {
      const int cx = cell_of(i, 0), cy = cell_of(i, 1), cz = cell_of(i, 2);
      bins[static_cast<std::size_t>((cz * ncell + cy) * ncell + cx)].push_back(
          i);
    }
    // Half stencil: each unordered adjacent cell pair visited exactly once.
    static constexpr int kOffsets[13][3] = {
        {1, 0, 0},  {-1, 1, 0}, {0, 1, 0},  {1, 1, 0},  {-1, -1, 1},
        {0, -1, 1}, {1, -1, 1}, {-1, 0, 1}, {0, 0, 1},  {1, 0, 1},
        {-1, 1, 1}, {0, 1, 1},  {1, 1, 1}};
    auto wrap_cell = [&](int c) { return (c % ncell + ncell) % ncell; };
    for (int cz = 0; cz < ncell; ++cz)
      for (int cy = 0; cy < ncell; ++cy)
        for (int cx = 0; cx < ncell; ++cx) {
          const auto& home =
              bins[static_cast<std::size_t>((cz * ncell + cy) * ncell + cx)];
          for (std::size_t a = 0; a < home.size(); ++a)
            for (std::size_t b = a + 1; b < home.size(); ++b)
              try_pair(home[a], home[b]);
          for (const auto& off : kOffsets) {
            const int ox = wrap_cell(cx + off[0]);
            const int oy = wrap_cell(cy + off[1]);
            const int oz = wrap_cell(cz + off[2]);
            const auto& other =
                bins[static_cast<std::size_t>((oz * ncell + oy) * ncell + ox)];
            for (int i : home)
              for (int k : other) try_pair(i, k);
          }
        }
  }

  for (auto& nl : lists)
    std::sort(nl.begin(), nl.end(),
              [](const Neighbor& x, const Neighbor& y) {
                return x.index < y.index;
              });
  return lists;
}

// --- problem generation -----------------------------------------------------

namespace detail {

inline std::vector<double> draw_beta(Rng& rng, TwoJ twojmax) {
  const std::size_t ntrip = enumerate_bispectrum_triples(twojmax).size();
  std::vector<double> beta(ntrip);
  for (auto& b : beta) b = rng.uniform(-1.0, 1.0);
  return beta;
}

inline double mean_neighbor_count(
    const std::vector<std::vector<Neighbor>>& lists) {
  std::size_t total = 0;
  for (const auto& nl : lists) total += nl.size();
  return static_cast<double>(total) / static_cast<double>(lists.size());
}

}  // namespace detail

// Fabricated fixed-shape neighbor lists: exactly K displacement vectors per
// atom with uniform directions and radii uniform in (0.3, 0.95) Rcut.  The
// lists are not mutually consistent (atom k's list is not the mirror of
// atom i's), which matches proxy-style benchmarking where array shape, not
// physics, is the point.  Positions stay empty and synthetic is set so the
// finite-difference oracle refuses these problems.
inline Problem generate_synthetic(const BenchConfig& config) {
  Problem p;
  p.params.twojmax = config.twojmax;
  p.params.rcut = config.rcut;
  p.params.rmin0 = config.rmin0;
  p.params.rfac0 = config.rfac0;
  p.seed = config.seed;
  p.synthetic = true;

  Rng rng(config.seed);
  p.params.beta = detail::draw_beta(rng, config.twojmax);
  p.neighbors.resize(static_cast<std::size_t>(config.natoms));
  if (config.natoms < 2) return p;  // a lone atom has nothing to point at

  for (int i = 0; i < config.natoms; ++i) {
    auto& nl = p.neighbors[static_cast<std::size_t>(i)];
    nl.resize(static_cast<std::size_t>(config.nnbor));
    for (int t = 0; t < config.nnbor; ++t) {
      double dir[3];
      rng.unit_vector(dir);
      const double r = config.rcut * rng.uniform(0.3, 0.95);
      Neighbor& nb = nl[static_cast<std::size_t>(t)];
      // Cycle through the other atoms so the index is always a real atom
      // distinct from the center.
      nb.index = static_cast<std::int32_t>(
          (i + 1 + t % (config.natoms - 1)) % config.natoms);
      nb.disp[0] = dir[0] * r;
      nb.disp[1] = dir[1] * r;
      nb.disp[2] = dir[2] * r;
    }
  }
  return p;
}

// Physically consistent problem: atoms uniform in a periodic cubic box whose
// edge is tuned by bisection until the mean neighbor count lands within
// +/-10% of the target.  The fractional coordinates are drawn once and
// rescaled per trial so the bisection is deterministic.  Throws when no
// legal box (Rcut <= box/2) can reach the target.
inline Problem generate_physical(const BenchConfig& config) {
  Problem p;
  p.params.twojmax = config.twojmax;
  p.params.rcut = config.rcut;
  p.params.rmin0 = config.rmin0;
  p.params.rfac0 = config.rfac0;
  p.seed = config.seed;

  Rng rng(config.seed);
  p.params.beta = detail::draw_beta(rng, config.twojmax);

  const int n = config.natoms;
  std::vector<std::array<double, 3>> frac(static_cast<std::size_t>(n));
  for (auto& f : frac) {
    f[0] = rng.uniform();
    f[1] = rng.uniform();
    f[2] = rng.uniform();
  }

  auto place = [&](double box) {
    std::vector<std::array<double, 3>> pos(frac.size());
    for (std::size_t i = 0; i < frac.size(); ++i)
      for (int c = 0; c < 3; ++c)
        pos[i][static_cast<std::size_t>(c)] =
            frac[i][static_cast<std::size_t>(c)] * box;
    return pos;
  };

  if (n == 1) {
    // No pairs to tune; any legal box works.
    p.box_length = 4.0 * config.rcut;
    p.positions = place(p.box_length);
    p.neighbors.resize(1);
    p.validate();
    return p;
  }

  auto mean_at = [&](double box) {
    return detail::mean_neighbor_count(
        build_neighborlist(place(box), box, config.rcut));
  };

  const double target = static_cast<double>(config.nnbor);
  const double tol = 0.1 * target;

  // Ideal-gas estimate seeds the bracket; the dense end is pinned at the
  // minimum-image limit box = 2 Rcut.
  const double sphere =
      4.0 / 3.0 * 3.14159265358979323846 * config.rcut * config.rcut *
      config.rcut;
  double guess = target > 0.0
                     ? std::cbrt(sphere * static_cast<double>(n - 1) / target)
                     : 4.0 * config.rcut;
  double lo = 2.0 * config.rcut;  // densest legal box
  double hi = std::max(4.0 * config.rcut, 4.0 * guess);

  const double lo_mean = mean_at(lo);
  if (lo_mean + tol < target)
    throw InvalidArgument(
        "generate_problem: neighbor target " + std::to_string(config.nnbor) +
        " unreachable: even the densest minimum-image box gives " +
        std::to_string(lo_mean) + " mean neighbors");
  for (int grow = 0; mean_at(hi) > target + tol; ++grow) {
    snapforge::detail::require(grow < 60,
                               "generate_problem: bisection failed to bracket");
    hi *= 2.0;
  }

  double box = hi;
  double mean = mean_at(box);
  for (int it = 0; std::abs(mean - target) > tol; ++it) {
    snapforge::detail::require(
        it < 200, "generate_problem: bisection failed to converge");
    box = 0.5 * (lo + hi);
    mean = mean_at(box);
    if (mean > target)
      lo = box;
    else
      hi = box;
  }

  p.box_length = box;
  p.positions = place(box);
  p.neighbors = build_neighborlist(p.positions, box, config.rcut);
  p.validate();
  return p;
}

// Seeded problem factory.  Same seed and config give a bitwise-identical
// Problem; natoms = 1 yields an empty neighbor list and is valid in both
// modes.
inline Problem generate_problem(const BenchConfig& config) {
  config.validate();
  return config.synthetic_neighbors ? generate_synthetic(config)
                                    : generate_physical(config);
}

// --- memory accounting ------------------------------------------------------

// Analytic per-array footprint for one variant at the configured shape.
struct MemoryReport {
  std::string variant;
  int natoms = 0;
  int nnbor = 0;
  TwoJ twojmax = 0;
  std::vector<std::pair<std::string, std::int64_t>> array_bytes;
  std::int64_t total_bytes = 0;

  std::int64_t bytes_for(const std::string& name) const {
    for (const auto& [nm, b] : array_bytes)
      if (nm == name) return b;
    return 0;
  }
};

// Bytes each pipeline stage would record, computed from index-map extents,
// element sizes, and layout padding -- nothing is allocated.  The entries
// mirror a full evaluation (components and energy included), with the
// neighbor stride taken from the configured target, i.e. the fixed-shape
// synthetic layout.  A pipeline run on such a problem reports exactly these
// numbers, which the tests cross-check against the allocation ledger.
inline MemoryReport memory_report(const BenchConfig& config,
                                  const VariantSpec& v) {
  config.validate();
  validate_variant(v);
  const auto maps = HalfIntIndexMaps::build(config.twojmax);
  const std::int64_t natoms = config.natoms;
  const std::int64_t stride = config.natoms == 1 ? 0 : config.nnbor;
  const std::int64_t ntrip = static_cast<std::int64_t>(
      enumerate_bispectrum_triples(config.twojmax).size());
  constexpr std::int64_t cplx = static_cast<std::int64_t>(sizeof(Complex));
  constexpr std::int64_t real = static_cast<std::int64_t>(sizeof(double));

  MemoryReport r;
  r.variant = v.name;
  r.natoms = config.natoms;
  r.nnbor = config.nnbor;
  r.twojmax = config.twojmax;

  const std::int64_t nidx =
      v.half_symmetry ? maps.u_half_total() : maps.u_full_total();
  r.array_bytes.emplace_back("Ulisttot",
                             resolve_layout(v.layout, natoms, nidx).bytes());
  if (v.materialize_ulist)
    r.array_bytes.emplace_back("Ulist",
                               natoms * stride * maps.u_full_total() * cplx);
  if (!v.adjoint)
    r.array_bytes.emplace_back("Zlist", natoms * maps.z_total_elements * cplx);
  r.array_bytes.emplace_back("Blist", natoms * ntrip * real);
  if (v.adjoint) {
    r.array_bytes.emplace_back(
        "Ylist", resolve_layout(v.layout, natoms, maps.u_half_total()).bytes());
    if (!v.fuse_dU_with_force)
      r.array_bytes.emplace_back(
          "dUlist", natoms * stride * maps.u_half_total() * 3 * cplx);
  }
  r.array_bytes.emplace_back("dElist", natoms * stride * 3 * real);
  r.array_bytes.emplace_back("forces", natoms * 3 * real);

  for (const auto& [nm, b] : r.array_bytes) {
    (void)nm;
    r.total_bytes += b;
  }
  return r;
}

inline MemoryReport memory_report(const BenchConfig& config,
                                  const std::string& variant_name) {
  return memory_report(config, find_variant(variant_name));
}

// --- benchmark runs ---------------------------------------------------------

// grind speed (Katom-steps/s) = natoms x steps / total seconds / 1000.
inline double grind_speed(int natoms, int steps, double total_seconds) {
  if (total_seconds <= 0.0) return 0.0;  // degenerate timer resolution
  return static_cast<double>(natoms) * static_cast<double>(steps) /
         total_seconds / 1000.0;
}

namespace detail {

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Everything that distinguishes one schedule from another, flattened so
// "identical specs under different names" can be detected.
inline std::string spec_fingerprint(const VariantSpec& v) {
  std::ostringstream os;
  os << static_cast<int>(v.staging) << '/' << static_cast<int>(v.parallel_axes)
     << '/' << static_cast<int>(v.index_order) << '/' << v.layout.tile << '/'
     << v.layout.split_planes << '/' << v.layout.atom_fastest << '/'
     << v.half_symmetry << '/' << v.transpose_before_Y << '/'
     << v.du_fission_per_direction << '/' << v.fuse_dU_with_force << '/'
     << v.materialize_ulist << '/' << v.materialize_zlist << '/'
     << v.materialize_dulist << '/' << static_cast<int>(v.accumulation) << '/'
     << v.aligned_complex << '/' << v.adjoint;
  return os.str();
}

}  // namespace detail

// One variant's measured row.  A failed run (e.g. a memory budget hit)
// keeps its error text here and zeroes the measurements; the sweep carries
// on.
struct VariantRow {
  std::string variant;
  bool ok = true;
  std::string error;
  double wall_ms_per_step = 0.0;   // median over timed repetitions
  double katom_steps_per_s = 0.0;  // grind speed over the timed total
  double speedup_vs_baseline = 0.0;
  bool unstable = false;  // an identical-spec twin disagreed by > 20%
  std::int64_t peak_bytes_total = 0;
  std::string force_checksum = "-";
  double energy_total = 0.0;
  std::vector<StageTiming> stage_ms;  // medians; energy stages from warm-up
  std::vector<std::pair<std::string, std::int64_t>> array_bytes;
  CounterModel counters;
};

struct RunReport {
  BenchConfig config;
  std::vector<VariantRow> rows;

  const VariantRow* find(const std::string& name) const {
    for (const auto& r : rows)
      if (r.variant == name) return &r;
    return nullptr;
  }
};

// Runs every requested variant on one generated problem.  The warm-up
// evaluation (excluded from timing) supplies the energy, byte ledger, and
// counters; each timed repetition runs the force pipeline alone.  Pipeline
// failures are reported per row rather than thrown so one over-budget
// variant cannot sink a sweep.
inline RunReport run_benchmark(const BenchConfig& config) {
  config.validate();
  RunReport report;
  report.config = config;

  std::vector<std::string> names =
      config.variants.empty() ? std::vector<std::string>{} : config.variants;
  if (names.empty())
    for (const auto& v : builtin_variants()) names.push_back(v.name);
  const bool have_baseline =
      std::find(names.begin(), names.end(), "baseline-z") != names.end();
  if (config.ensure_baseline && !have_baseline)
    names.insert(names.begin(), "baseline-z");

  const Problem problem = generate_problem(config);
  WorkerPool pool(config.workers);
  const RunMode mode =
      config.deterministic ? RunMode::deterministic : RunMode::benchmark;

  for (const auto& name : names) {
    VariantRow row;
    row.variant = name;
    const VariantSpec spec = find_variant(name);
    try {
      const PipelineResult warm = run_pipeline(problem, spec, mode, pool,
                                               config.budget_bytes,
                                               /*with_energy=*/true);
      std::vector<double> step_ms;
      std::vector<std::vector<StageTiming>> step_stages;
      step_ms.reserve(static_cast<std::size_t>(config.steps));
      for (int s = 0; s < config.steps; ++s) {
        const PipelineResult r = run_pipeline(problem, spec, mode, pool,
                                              config.budget_bytes,
                                              /*with_energy=*/false);
        step_ms.push_back(r.total_ms);
        step_stages.push_back(r.stages);
        row.force_checksum = r.force_checksum;
      }

      row.wall_ms_per_step = detail::median(step_ms);
      double total_s = 0.0;
      for (double ms : step_ms) total_s += ms / 1000.0;
      row.katom_steps_per_s =
          grind_speed(config.natoms, config.steps, total_s);
      row.energy_total = warm.energy.total;
      row.peak_bytes_total = warm.total_bytes;
      row.array_bytes = warm.array_bytes;
      row.counters = warm.counters;

      // Stage medians in the warm-up's stage order; the off-force-path
      // stages (components/energy) only ran in the warm-up.
      for (const auto& ws : warm.stages) {
        std::vector<double> vals;
        for (const auto& stages : step_stages)
          for (const auto& s : stages)
            if (s.name == ws.name) vals.push_back(s.ms);
        row.stage_ms.push_back(
            {ws.name, vals.empty() ? ws.ms : detail::median(vals),
             ws.force_path});
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  // Normalize against the reference pipeline when it ran.
  const VariantRow* base = report.find("baseline-z");
  if (base != nullptr && base->ok && base->wall_ms_per_step > 0.0) {
    for (auto& row : report.rows)
      if (row.ok && row.wall_ms_per_step > 0.0)
        row.speedup_vs_baseline = base->wall_ms_per_step / row.wall_ms_per_step;
  }

  // Identical schedules under different list entries should time the same;
  // a spread beyond 20% flags the measurement as noise-dominated.
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (!report.rows[i].ok) continue;
    const std::string fp_i =
        detail::spec_fingerprint(find_variant(report.rows[i].variant));
    for (std::size_t k = i + 1; k < report.rows.size(); ++k) {
      if (!report.rows[k].ok) continue;
      if (detail::spec_fingerprint(find_variant(report.rows[k].variant)) !=
          fp_i)
        continue;
      const double a = report.rows[i].wall_ms_per_step;
      const double b = report.rows[k].wall_ms_per_step;
      if (a > 0.0 && b > 0.0 && std::abs(a / b - 1.0) > 0.2) {
        report.rows[i].unstable = true;
        report.rows[k].unstable = true;
      }
    }
  }
  return report;
}

// --- report serialization ---------------------------------------------------

namespace detail {

// Shortest-exact double formatting for CSV: %.17g round-trips every finite
// double, so the CSV and JSON forms parse back to identical values.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline constexpr const char* kCsvHeader =
    "variant,natoms,nnbor,twojmax,steps,wall_ms_per_step,katom_steps_per_s,"
    "speedup_vs_baseline,peak_bytes_total,force_checksum";

inline void write_report_csv(const RunReport& report, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const auto& r : report.rows) {
    os << r.variant << ',' << report.config.natoms << ','
       << report.config.nnbor << ',' << report.config.twojmax << ','
       << report.config.steps << ',' << detail::fmt_double(r.wall_ms_per_step)
       << ',' << detail::fmt_double(r.katom_steps_per_s) << ','
       << detail::fmt_double(r.speedup_vs_baseline) << ','
       << r.peak_bytes_total << ',' << r.force_checksum << '\n';
  }
}

inline void write_report_json(const RunReport& report, std::ostream& os) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["config"] = {{"natoms", report.config.natoms},
                 {"nnbor", report.config.nnbor},
                 {"twojmax", report.config.twojmax},
                 {"steps", report.config.steps},
                 {"seed", report.config.seed},
                 {"workers", report.config.workers},
                 {"deterministic", report.config.deterministic},
                 {"synthetic_neighbors", report.config.synthetic_neighbors}};
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["variant"] = r.variant;
    row["natoms"] = report.config.natoms;
    row["nnbor"] = report.config.nnbor;
    row["twojmax"] = report.config.twojmax;
    row["steps"] = report.config.steps;
    row["wall_ms_per_step"] = r.wall_ms_per_step;
    row["katom_steps_per_s"] = r.katom_steps_per_s;
    row["speedup_vs_baseline"] = r.speedup_vs_baseline;
    row["peak_bytes_total"] = r.peak_bytes_total;
    row["force_checksum"] = r.force_checksum;
    row["energy_total"] = r.energy_total;
    row["ok"] = r.ok;
    row["error"] = r.error;
    row["unstable"] = r.unstable;
    auto& stages = row["stage_ms"] = nlohmann::ordered_json::object();
    for (const auto& s : r.stage_ms) stages[s.name] = s.ms;
    auto& arrays = row["array_bytes"] = nlohmann::ordered_json::object();
    for (const auto& [nm, b] : r.array_bytes) arrays[nm] = b;
    row["counters"] = {{"flops", r.counters.flops},
                       {"bytes_loaded", r.counters.bytes_loaded},
                       {"bytes_stored", r.counters.bytes_stored}};
    rows.push_back(std::move(row));
  }
  os << j.dump(2) << '\n';
}

// Routes the report to config.out_path (or the fallback stream when the
// path is empty) in the configured format.
inline void save_report(const RunReport& report, std::ostream& fallback) {
  auto emit = [&](std::ostream& os) {
    if (report.config.format == OutputFormat::csv)
      write_report_csv(report, os);
    else
      write_report_json(report, os);
  };
  if (report.config.out_path.empty()) {
    emit(fallback);
    return;
  }
  std::ofstream file(report.config.out_path);
  snapforge::detail::require(file.good(), "save_report: cannot open '" +
                                              report.config.out_path + "'");
  emit(file);
}

// --- problem file I/O -------------------------------------------------------

// Versioned JSON snapshot of one Problem.  Doubles are written in
// shortest-round-trip form, so a save/load cycle reproduces the problem
// bit-for-bit.
inline nlohmann::ordered_json problem_to_json(const Problem& p) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["seed"] = p.seed;
  j["synthetic"] = p.synthetic;
  j["box_length"] = p.box_length;
  j["params"] = {{"twojmax", p.params.twojmax},
                 {"rcut", p.params.rcut},
                 {"rmin0", p.params.rmin0},
                 {"rfac0", p.params.rfac0},
                 {"weights", p.params.weights},
                 {"wself", p.params.wself},
                 {"self_contribution", p.params.self_contribution},
                 {"beta", p.params.beta}};
  auto& pos = j["positions"] = nlohmann::ordered_json::array();
  for (const auto& x : p.positions) pos.push_back({x[0], x[1], x[2]});
  j["types"] = p.types;
  auto& nbrs = j["neighbors"] = nlohmann::ordered_json::array();
  for (const auto& nl : p.neighbors) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& nb : nl)
      list.push_back({{"index", nb.index},
                      {"disp", {nb.disp[0], nb.disp[1], nb.disp[2]}}});
    nbrs.push_back(std::move(list));
  }
  return j;
}

inline Problem problem_from_json(const nlohmann::json& j) {
  snapforge::detail::require(j.value("schema", 0) == 1,
                             "problem file: unsupported schema");
  Problem p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.synthetic = j.at("synthetic").get<bool>();
  p.box_length = j.at("box_length").get<double>();
  const auto& prm = j.at("params");
  p.params.twojmax = prm.at("twojmax").get<TwoJ>();
  p.params.rcut = prm.at("rcut").get<double>();
  p.params.rmin0 = prm.at("rmin0").get<double>();
  p.params.rfac0 = prm.at("rfac0").get<double>();
  p.params.weights = prm.at("weights").get<std::vector<double>>();
  p.params.wself = prm.at("wself").get<double>();
  p.params.self_contribution = prm.at("self_contribution").get<bool>();
  p.params.beta = prm.at("beta").get<std::vector<double>>();
  for (const auto& x : j.at("positions"))
    p.positions.push_back({x.at(0).get<double>(), x.at(1).get<double>(),
                           x.at(2).get<double>()});
  p.types = j.at("types").get<std::vector<int>>();
  for (const auto& list : j.at("neighbors")) {
    std::vector<Neighbor> nl;
    for (const auto& e : list) {
      Neighbor nb;
      nb.index = e.at("index").get<std::int32_t>();
      const auto& d = e.at("disp");
      nb.disp[0] = d.at(0).get<double>();
      nb.disp[1] = d.at(1).get<double>();
      nb.disp[2] = d.at(2).get<double>();
      nl.push_back(nb);
    }
    p.neighbors.push_back(std::move(nl));
  }
  p.validate();
  return p;
}

inline void save_problem(const Problem& p, const std::string& path) {
  std::ofstream file(path);
  snapforge::detail::require(file.good(),
                             "save_problem: cannot open '" + path + "'");
  file << problem_to_json(p).dump(2) << '\n';
}

inline Problem load_problem(const std::string& path) {
  std::ifstream file(path);
  snapforge::detail::require(file.good(),
                             "load_problem: cannot open '" + path + "'");
  nlohmann::json j;
  file >> j;
  return problem_from_json(j);
}

}  // namespace snapforge::harness
