#pragma once

// Kernel ABI. Kept free of standard-library templates so that translation
// units compiled for a wider ISA never emit inline functions the linker could
// pick for the baseline build.

#include <cstddef>

namespace mcct::kernels {

enum class Isa { Scalar, Avx2, Neon };

/// Raw-pointer kernel table. Vector translation units only see this ABI.
struct Table {
  Isa isa;
  // max over x[0..n), n >= 1
  double (*max)(const double* x, std::size_t n);
  // ((a0 + a1) + (a2 + a3)) + tail, where a_l sums x[i] for i = l mod 4 below n & ~3
  double (*sum)(const double* x, std::size_t n);
  // out = s * w + b
  void (*affine)(const double* s, const double* w, const double* b, double* out, std::size_t n);
  // out = s / w + b
  void (*inv_affine)(const double* s, const double* w, const double* b, double* out,
                     std::size_t n);
  // out = s * a + b for scalar a, b
  void (*scalar_affine)(const double* s, double a, double b, double* out, std::size_t n);
  // gw += s * r; gb += r
  void (*accumulate_direct)(const double* s, const double* r, double* gw, double* gb,
                            std::size_t n);
  // gw -= (s / (w * w)) * r; gb += r
  void (*accumulate_inverse)(const double* s, const double* r, const double* w, double* gw,
                             double* gb, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x *= a
  void (*scale)(double a, double* x, std::size_t n);
  // out = x * y
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
};

}  // namespace mcct::kernels
