// SPDX-License-Identifier: MIT
//
// Shared fixtures for the test suites: a small-cluster problem builder with
// all-pairs neighbor lists, cheap enough to recompute quantities by hand.

#pragma once

#include <cstdint>
#include <vector>

#include "snapforge/halfint_index.hpp"
#include "snapforge/rng.hpp"
#include "snapforge/snap_core.hpp"

namespace testsupport {

constexpr double kRcut = 4.7;

// Cluster of n atoms in a small cube with all-pairs neighbor lists (no
// periodicity); the first two atoms are pinned close so nobody is isolated.
inline snapforge::Problem make_cluster(int natoms, snapforge::TwoJ twojmax,
                                       std::uint64_t seed, int ntypes = 1) {
  using snapforge::Neighbor;
  snapforge::Problem p;
  p.params.twojmax = twojmax;
  p.params.rcut = kRcut;
  p.seed = seed;
  snapforge::Rng rng(seed);
  p.positions.resize(static_cast<std::size_t>(natoms));
  const double side = 0.8 * kRcut;
  for (auto& pos : p.positions)
    for (int d = 0; d < 3; ++d) pos[d] = rng.uniform(0.0, side);
  p.positions[1] = {p.positions[0][0] + 1.3, p.positions[0][1] + 0.4,
                    p.positions[0][2] - 0.2};
  p.types.resize(static_cast<std::size_t>(natoms));
  p.params.weights.clear();
  for (int t = 0; t < ntypes; ++t)
    p.params.weights.push_back(t == 0 ? 1.0 : rng.uniform(0.2, 0.9));
  for (int i = 0; i < natoms; ++i)
    p.types[static_cast<std::size_t>(i)] = i % ntypes;

  p.neighbors.resize(static_cast<std::size_t>(natoms));
  for (int i = 0; i < natoms; ++i)
    for (int k = 0; k < natoms; ++k) {
      if (i == k) continue;
      Neighbor nb;
      nb.index = k;
      double r2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        nb.disp[d] = p.positions[static_cast<std::size_t>(k)][d] -
                     p.positions[static_cast<std::size_t>(i)][d];
        r2 += nb.disp[d] * nb.disp[d];
      }
      if (r2 > 0.0 && r2 < 0.98 * kRcut * kRcut)
        p.neighbors[static_cast<std::size_t>(i)].push_back(nb);
    }

  const std::size_t ntrip =
      snapforge::enumerate_bispectrum_triples(twojmax).size();
  p.params.beta.resize(ntrip);
  for (auto& b : p.params.beta) b = rng.uniform(-1.0, 1.0);
  p.validate();
  return p;
}

}  // namespace testsupport
