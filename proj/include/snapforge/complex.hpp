// SPDX-License-Identifier: MIT
//
// Minimal complex value type for the descriptor kernels.
//
// std::complex would work, but the kernels here accumulate through raw
// double planes (interleaved, split, or tiled) and frequently need the
// real/imaginary parts as separate lvalues.  A plain aggregate keeps every
// load and store explicit and lets the hot loops be written the same way
// against all storage layouts.

#pragma once

namespace snapforge {

struct Complex {
  double re = 0.0;
  double im = 0.0;
};

inline constexpr Complex conj(Complex z) { return {z.re, -z.im}; }

inline constexpr Complex operator+(Complex x, Complex y) {
  return {x.re + y.re, x.im + y.im};
}

inline constexpr Complex operator-(Complex x, Complex y) {
  return {x.re - y.re, x.im - y.im};
}

inline constexpr Complex operator*(Complex x, Complex y) {
  return {x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re};
}

inline constexpr Complex operator*(double s, Complex z) {
  return {s * z.re, s * z.im};
}

inline constexpr Complex operator*(Complex z, double s) { return s * z; }

inline constexpr Complex operator-(Complex z) { return {-z.re, -z.im}; }

inline Complex& operator+=(Complex& x, Complex y) {
  x.re += y.re;
  x.im += y.im;
  return x;
}

inline Complex& operator-=(Complex& x, Complex y) {
  x.re -= y.re;
  x.im -= y.im;
  return x;
}

// Re(x * conj(y)): the only part of a product the real-valued contractions
// (bispectrum, energy adjoint) ever need.
inline constexpr double re_mul_conj(Complex x, Complex y) {
  return x.re * y.re + x.im * y.im;
}

}  // namespace snapforge
