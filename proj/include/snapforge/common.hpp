// SPDX-License-Identifier: MIT
//
// Shared small utilities: error types, argument checking, relative-error
// comparison, and the bitwise checksum used for determinism tests.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "snapforge/tolerances.hpp"

namespace snapforge {

// Thrown for invalid arguments and contract violations at API boundaries.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a pipeline stage cannot run to completion.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a stage would allocate past the configured memory budget.
// Carries the computed requirement so callers can report it.
class MemoryBudgetError : public PipelineError {
 public:
  MemoryBudgetError(const std::string& what, std::int64_t required,
                    std::int64_t budget)
      : PipelineError(what), required_bytes(required), budget_bytes(budget) {}

  std::int64_t required_bytes;
  std::int64_t budget_bytes;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

}  // namespace detail

// Relative error with an absolute floor: |x - y| / max(|x|, |y|, floor).
// The floor keeps comparisons of near-zero quantities meaningful.
inline double rel_err(double x, double y, double floor = tol::kAbsFloor) {
  double denom = std::abs(x) > std::abs(y) ? std::abs(x) : std::abs(y);
  if (denom < floor) denom = floor;
  return std::abs(x - y) / denom;
}

// Max-norm relative error over two equally sized ranges.
inline double rel_max_err(const double* x, const double* y, std::int64_t n,
                          double floor = tol::kAbsFloor) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double e = rel_err(x[i], y[i], floor);
    if (e > worst) worst = e;
  }
  return worst;
}

inline double rel_max_err(const std::vector<double>& x,
                          const std::vector<double>& y,
                          double floor = tol::kAbsFloor) {
  detail::require(x.size() == y.size(), "rel_max_err: size mismatch");
  return rel_max_err(x.data(), y.data(), static_cast<std::int64_t>(x.size()),
                     floor);
}

// FNV-1a over the IEEE-754 bit patterns of a double range.  Used to compare
// force outputs bit-for-bit across runs, layouts, and worker counts.
inline std::uint64_t fnv1a_bits(const double* x, std::int64_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

inline std::string checksum_hex(const std::vector<double>& x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a_bits(x.data(), static_cast<std::int64_t>(x.size()))));
  return std::string(buf);
}

}  // namespace snapforge
