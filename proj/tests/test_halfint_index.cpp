// SPDX-License-Identifier: MIT
//
// Tests for the half-integer index bookkeeping.  The enumeration tests use
// an independent brute-force filter rather than the library's own loops.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstring>
#include <tuple>
#include <vector>

#include "snapforge/halfint_index.hpp"
#include "snapforge/rng.hpp"

using namespace snapforge;

namespace {

// Brute-force canonical triple filter over the full cube of levels.
std::vector<BispectrumTriple> brute_triples(TwoJ twojmax) {
  std::vector<BispectrumTriple> out;
  for (TwoJ j1 = 0; j1 <= twojmax; ++j1)
    for (TwoJ j2 = 0; j2 <= twojmax; ++j2)
      for (TwoJ j = 0; j <= twojmax; ++j) {
        if (!(j >= j1 && j1 >= j2)) continue;
        if (j < j1 - j2 || j > j1 + j2) continue;
        if ((j1 + j2 + j) % 2 != 0) continue;
        out.push_back({j1, j2, j});
      }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tuple(x.twoj1, x.twoj2, x.twoj) <
           std::tuple(y.twoj1, y.twoj2, y.twoj);
  });
  return out;
}

std::vector<Complex> random_half_stack(TwoJ twojmax, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Complex> h(static_cast<std::size_t>(u_half_elements(twojmax)));
  for (auto& z : h) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return h;
}

}  // namespace

TEST_CASE("canonical triple counts at reference band limits") {
  CHECK(enumerate_bispectrum_triples(0).size() == 1);
  CHECK(enumerate_bispectrum_triples(2).size() == 5);
  CHECK(enumerate_bispectrum_triples(8).size() == 55);
  CHECK(enumerate_bispectrum_triples(14).size() == 204);
}

TEST_CASE("triple enumeration matches the brute-force filter") {
  for (TwoJ t = 0; t <= 20; ++t) {
    auto fast = enumerate_bispectrum_triples(t);
    auto brute = brute_triples(t);
    REQUIRE(fast.size() == brute.size());
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == brute[i]);
  }
}

TEST_CASE("element totals at reference band limits") {
  CHECK(u_total_elements(8) == 285);
  CHECK(u_total_elements(14) == 1240);
  CHECK(u_half_elements(8) == 155);
  CHECK(u_half_elements(1) == 3);
}

TEST_CASE("block offsets are gap-free and end at the totals") {
  for (TwoJ t : {0, 1, 2, 5, 8, 14}) {
    auto m = HalfIntIndexMaps::build(t);
    for (TwoJ lev = 0; lev <= t; ++lev) {
      CHECK(m.u_block_offset[lev + 1] - m.u_block_offset[lev] ==
            HalfIntIndexMaps::full_block(lev));
      CHECK(m.u_half_offset[lev + 1] - m.u_half_offset[lev] ==
            HalfIntIndexMaps::half_block(lev));
    }
    CHECK(m.u_full_total() == u_total_elements(t));
    CHECK(m.u_half_total() == u_half_elements(t));
  }
}

TEST_CASE("half/full round trip is bitwise exact") {
  for (TwoJ t : {0, 1, 2, 3, 5, 8}) {
    auto half = random_half_stack(t, 1234 + static_cast<std::uint64_t>(t));
    auto full = half_to_full_expand(half, t);
    auto back = full_to_half_compress(full, t);
    REQUIRE(back.size() == half.size());
    CHECK(std::memcmp(back.data(), half.data(),
                      half.size() * sizeof(Complex)) == 0);
  }
}

TEST_CASE("expansion fills mirrored rows with the index-reversal symmetry") {
  const TwoJ t = 7;
  auto half = random_half_stack(t, 99);
  auto full = half_to_full_expand(half, t);
  std::int64_t off = 0;
  for (TwoJ lev = 0; lev <= t; ++lev) {
    const int cols = lev + 1;
    for (int mb = 0; mb <= lev; ++mb)
      for (int ma = 0; ma <= lev; ++ma) {
        if (2 * mb <= lev) continue;  // stored rows are copied verbatim
        Complex got = full[off + mb * cols + ma];
        Complex src = full[off + (lev - mb) * cols + (lev - ma)];
        double sign = ((ma + mb) & 1) ? -1.0 : 1.0;
        CHECK(got.re == sign * src.re);
        CHECK(got.im == -sign * src.im);
      }
    off += HalfIntIndexMaps::full_block(lev);
  }
}

TEST_CASE("coupling tuples: admissibility, ordering, and packed offsets") {
  auto m = HalfIntIndexMaps::build(8);
  CHECK(m.z_tuples.size() == 125);
  CHECK(m.z_total_elements == 2386);

  std::int64_t elem = 0, cgo = 0;
  const ZTuple* prev = nullptr;
  for (const auto& zt : m.z_tuples) {
    CHECK(zt.twoj1 >= zt.twoj2);
    CHECK(zt.twoj >= zt.twoj1 - zt.twoj2);
    CHECK(zt.twoj <= std::min(8, zt.twoj1 + zt.twoj2));
    CHECK((zt.twoj1 + zt.twoj2 + zt.twoj) % 2 == 0);
    CHECK(zt.elem_offset == elem);
    CHECK(zt.cg_offset == cgo);
    elem += HalfIntIndexMaps::half_block(zt.twoj);
    cgo += static_cast<std::int64_t>(zt.twoj1 + 1) * (zt.twoj2 + 1);
    if (prev) {
      CHECK(std::tuple(prev->twoj1, prev->twoj2, prev->twoj) <
            std::tuple(zt.twoj1, zt.twoj2, zt.twoj));
    }
    prev = &zt;
  }
  CHECK(elem == m.z_total_elements);
  CHECK(cgo == m.cg_total);
}

TEST_CASE("dense lookups round-trip and reject inadmissible labels") {
  auto m = HalfIntIndexMaps::build(8);
  for (std::size_t i = 0; i < m.z_triples.size(); ++i) {
    const auto& b = m.z_triples[i];
    CHECK(m.triple_index(b.twoj1, b.twoj2, b.twoj) ==
          static_cast<std::int32_t>(i));
  }
  for (std::size_t i = 0; i < m.z_tuples.size(); ++i) {
    const auto& zt = m.z_tuples[i];
    CHECK(m.tuple_index(zt.twoj1, zt.twoj2, zt.twoj) ==
          static_cast<std::int32_t>(i));
    CHECK(m.cg_offset(zt.twoj1, zt.twoj2, zt.twoj) == zt.cg_offset);
  }
  CHECK(m.cg_offset(0, 0, 2) == -1);   // violates the triangle rule
  CHECK(m.cg_offset(1, 2, 1) == -1);   // factors not sorted
  CHECK(m.triple_index(2, 4, 2) == -1);
  CHECK(m.tuple_index(2, 1, 2) == -1);  // odd parity
}

TEST_CASE("coupling loop bounds agree with brute-force projection pairs") {
  auto m = HalfIntIndexMaps::build(8);
  for (const auto& zt : m.z_tuples) {
    const TwoJ j1 = zt.twoj1, j2 = zt.twoj2, j = zt.twoj;
    for (int mb = 0; 2 * mb <= j; ++mb)
      for (int ma = 0; ma <= j; ++ma) {
        auto zb = z_loop_bounds(j1, j2, j, mb, ma);

        // Brute force: factor projections adding up to the target.
        std::vector<std::pair<int, int>> want;
        for (int m1 = 0; m1 <= j1; ++m1)
          for (int m2 = 0; m2 <= j2; ++m2)
            if ((2 * m1 - j1) + (2 * m2 - j2) == 2 * ma - j)
              want.emplace_back(m1, m2);

        std::vector<std::pair<int, int>> got;
        for (int ia = 0; ia < zb.na; ++ia)
          got.emplace_back(zb.ma1min + ia, zb.ma2max - ia);
        CHECK(got == want);

        // The mb side uses the same formulas; spot-check the row bounds.
        std::vector<std::pair<int, int>> wantb;
        for (int m1 = 0; m1 <= j1; ++m1)
          for (int m2 = 0; m2 <= j2; ++m2)
            if ((2 * m1 - j1) + (2 * m2 - j2) == 2 * mb - j)
              wantb.emplace_back(m1, m2);
        std::vector<std::pair<int, int>> gotb;
        for (int ib = 0; ib < zb.nb; ++ib)
          gotb.emplace_back(zb.mb1min + ib, zb.mb2max - ib);
        CHECK(gotb == wantb);
      }
  }
}
