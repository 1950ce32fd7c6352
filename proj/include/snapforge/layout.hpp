// SPDX-License-Identifier: MIT
//
// Physical storage layouts for per-atom complex arrays.
//
// Logically every array in the pipeline is a dense (atom, index) matrix of
// complex values.  Physically the execution variants store it three ways:
//
//   * interleaved, atom-major rows   (tile = 1, re/im adjacent)
//   * interleaved, index-major       (tile = natoms: atom is the fast axis)
//   * AoSoA with lane width `tile`   (atoms blocked into lanes of `tile`)
//
// and orthogonally either interleave re/im per element or split them into
// two planes.  One slot formula covers all of it:
//
//   slot(a, i) = (a / tile) * (nidx * tile) + i * tile + (a % tile)
//
// tile = 1 reduces to a*nidx + i (atom-major), tile = padded atom count
// reduces to i*natoms + a (index-major), anything between is AoSoA.  Atom
// counts that do not divide by the tile are padded up; padded slots exist
// physically, are zero-filled, and are never addressed logically.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "snapforge/common.hpp"
#include "snapforge/complex.hpp"

namespace snapforge {

struct LayoutView {
  std::int64_t natoms = 0;  // logical atom extent
  std::int64_t nidx = 0;    // logical per-atom index extent
  std::int64_t tile = 1;    // atom-lane width of the physical stride map
  bool split_planes = false;

  std::int64_t padded_atoms() const {
    return (natoms + tile - 1) / tile * tile;
  }
  std::int64_t physical_slots() const { return padded_atoms() * nidx; }
  std::int64_t padding_slots() const {
    return (padded_atoms() - natoms) * nidx;
  }
  // Doubles needed to store the array (2 per complex slot).
  std::int64_t total_doubles() const { return 2 * physical_slots(); }
  std::int64_t bytes() const {
    return total_doubles() * static_cast<std::int64_t>(sizeof(double));
  }

  std::int64_t slot(std::int64_t a, std::int64_t i) const {
    return (a / tile) * (nidx * tile) + i * tile + (a % tile);
  }
  std::int64_t re_index(std::int64_t a, std::int64_t i) const {
    return split_planes ? slot(a, i) : 2 * slot(a, i);
  }
  std::int64_t im_index(std::int64_t a, std::int64_t i) const {
    return split_planes ? physical_slots() + slot(a, i) : 2 * slot(a, i) + 1;
  }

  Complex load(const double* base, std::int64_t a, std::int64_t i) const {
    return {base[re_index(a, i)], base[im_index(a, i)]};
  }
  void store(double* base, std::int64_t a, std::int64_t i, Complex v) const {
    base[re_index(a, i)] = v.re;
    base[im_index(a, i)] = v.im;
  }
  void add(double* base, std::int64_t a, std::int64_t i, Complex v) const {
    base[re_index(a, i)] += v.re;
    base[im_index(a, i)] += v.im;
  }
};

inline LayoutView make_layout(std::int64_t natoms, std::int64_t nidx,
                              std::int64_t tile, bool split_planes) {
  detail::require(natoms >= 0 && nidx >= 0, "make_layout: negative extents");
  detail::require(tile >= 1, "make_layout: tile must be >= 1");
  return LayoutView{natoms, nidx, tile, split_planes};
}

// Flat double storage with controllable alignment.  The aligned-complex
// variants request 64-byte buffers; everything else uses malloc's default.
class RealBuffer {
 public:
  RealBuffer() = default;

  explicit RealBuffer(std::int64_t n, std::size_t alignment = alignof(double))
      : n_(n), align_(alignment < alignof(double) ? alignof(double) : alignment) {
    detail::require(n >= 0, "RealBuffer: negative size");
    if (n == 0) return;
    std::size_t bytes = static_cast<std::size_t>(n) * sizeof(double);
    bytes = (bytes + align_ - 1) / align_ * align_;  // aligned_alloc contract
    ptr_ = static_cast<double*>(std::aligned_alloc(align_, bytes));
    if (!ptr_) throw std::bad_alloc();
  }

  RealBuffer(const RealBuffer& o) : RealBuffer(o.n_, o.align_) {
    if (n_ > 0) std::memcpy(ptr_, o.ptr_, static_cast<std::size_t>(n_) * sizeof(double));
  }
  RealBuffer& operator=(const RealBuffer& o) {
    if (this != &o) {
      RealBuffer tmp(o);
      swap(tmp);
    }
    return *this;
  }
  RealBuffer(RealBuffer&& o) noexcept { swap(o); }
  RealBuffer& operator=(RealBuffer&& o) noexcept {
    swap(o);
    return *this;
  }
  ~RealBuffer() { std::free(ptr_); }

  void swap(RealBuffer& o) noexcept {
    std::swap(ptr_, o.ptr_);
    std::swap(n_, o.n_);
    std::swap(align_, o.align_);
  }

  double* data() { return ptr_; }
  const double* data() const { return ptr_; }
  std::int64_t size() const { return n_; }
  std::size_t alignment() const { return align_; }
  bool empty() const { return n_ == 0; }

  void fill(double v) {
    for (std::int64_t i = 0; i < n_; ++i) ptr_[i] = v;
  }

 private:
  double* ptr_ = nullptr;
  std::int64_t n_ = 0;
  std::size_t align_ = alignof(double);
};

// Packs a logical atom-major complex array (values[a * nidx + i]) into
// physical storage for the given layout.  Padded slots come out zero.
inline RealBuffer pack_complex(const std::vector<Complex>& values,
                               const LayoutView& lv,
                               std::size_t alignment = alignof(double)) {
  detail::require(static_cast<std::int64_t>(values.size()) ==
                      lv.natoms * lv.nidx,
                  "pack_complex: logical size mismatch");
  RealBuffer buf(lv.total_doubles(), alignment);
  buf.fill(0.0);
  for (std::int64_t a = 0; a < lv.natoms; ++a)
    for (std::int64_t i = 0; i < lv.nidx; ++i)
      lv.store(buf.data(), a, i, values[a * lv.nidx + i]);
  return buf;
}

// Inverse of pack_complex over the logical extents.
inline std::vector<Complex> unpack_complex(const RealBuffer& buf,
                                           const LayoutView& lv) {
  detail::require(buf.size() == lv.total_doubles(),
                  "unpack_complex: physical size mismatch");
  std::vector<Complex> values(static_cast<std::size_t>(lv.natoms * lv.nidx));
  for (std::int64_t a = 0; a < lv.natoms; ++a)
    for (std::int64_t i = 0; i < lv.nidx; ++i)
      values[a * lv.nidx + i] = lv.load(buf.data(), a, i);
  return values;
}

}  // namespace snapforge
