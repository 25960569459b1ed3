#include "mcct/kernels.hpp"

namespace mcct::kernels {
namespace {

double max_scalar(const double* x, std::size_t n) {
  double best = x[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] > best) best = x[i];
  }
  return best;
}

double sum_scalar(const double* x, std::size_t n) {
  const std::size_t body = n & ~std::size_t{3};
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  for (std::size_t i = 0; i < body; i += 4) {
    a0 += x[i];
    a1 += x[i + 1];
    a2 += x[i + 2];
    a3 += x[i + 3];
  }
  double total = (a0 + a1) + (a2 + a3);
  for (std::size_t i = body; i < n; ++i) total += x[i];
  return total;
}

void affine_scalar(const double* s, const double* w, const double* b, double* out,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i] * w[i] + b[i];
}

void inv_affine_scalar(const double* s, const double* w, const double* b, double* out,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i] / w[i] + b[i];
}

void scalar_affine_scalar(const double* s, double a, double b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i] * a + b;
}

void accumulate_direct_scalar(const double* s, const double* r, double* gw, double* gb,
                              std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    gw[i] += s[i] * r[i];
    gb[i] += r[i];
  }
}

void accumulate_inverse_scalar(const double* s, const double* r, const double* w, double* gw,
                               double* gb, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    gw[i] -= (s[i] / (w[i] * w[i])) * r[i];
    gb[i] += r[i];
  }
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void mul_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

constexpr Table kScalar{
    Isa::Scalar,        max_scalar,       sum_scalar,
    affine_scalar,      inv_affine_scalar, scalar_affine_scalar,
    accumulate_direct_scalar, accumulate_inverse_scalar,
    axpy_scalar,        scale_scalar,     mul_scalar,
};

}  // namespace

const Table& scalar_table() noexcept { return kScalar; }

}  // namespace mcct::kernels
