// Built with -mavx2 (no -mfma) on x86-64. Only the raw kernel ABI is visible
// here; see kernel_table.hpp.

#include "variants.hpp"

#if defined(__x86_64__) && defined(__AVX2__)
#include <immintrin.h>

namespace mcct::kernels::detail {
namespace {

double max_avx2(const double* x, std::size_t n) {
  std::size_t i = 0;
  double best = x[0];
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    best = lanes[0];
    for (int l = 1; l < 4; ++l) {
      if (lanes[l] > best) best = lanes[l];
    }
  }
  for (; i < n; ++i) {
    if (x[i] > best) best = x[i];
  }
  return best;
}

double sum_avx2(const double* x, std::size_t n) {
  const std::size_t body = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double a[4];
  _mm256_store_pd(a, acc);
  double total = (a[0] + a[1]) + (a[2] + a[3]);
  for (std::size_t i = body; i < n; ++i) total += x[i];
  return total;
}

void affine_avx2(const double* s, const double* w, const double* b, double* out,
                 std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(prod, _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = s[i] * w[i] + b[i];
}

void inv_affine_avx2(const double* s, const double* w, const double* b, double* out,
                     std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d q = _mm256_div_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(q, _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = s[i] / w[i] + b[i];
}

void scalar_affine_avx2(const double* s, double a, double b, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(s + i), va), vb));
  }
  for (; i < n; ++i) out[i] = s[i] * a + b;
}

void accumulate_direct_avx2(const double* s, const double* r, double* gw, double* gb,
                            std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vr = _mm256_loadu_pd(r + i);
    const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(s + i), vr);
    _mm256_storeu_pd(gw + i, _mm256_add_pd(_mm256_loadu_pd(gw + i), t));
    _mm256_storeu_pd(gb + i, _mm256_add_pd(_mm256_loadu_pd(gb + i), vr));
  }
  for (; i < n; ++i) {
    gw[i] += s[i] * r[i];
    gb[i] += r[i];
  }
}

void accumulate_inverse_avx2(const double* s, const double* r, const double* w, double* gw,
                             double* gb, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vw = _mm256_loadu_pd(w + i);
    const __m256d vr = _mm256_loadu_pd(r + i);
    const __m256d q = _mm256_div_pd(_mm256_loadu_pd(s + i), _mm256_mul_pd(vw, vw));
    _mm256_storeu_pd(gw + i, _mm256_sub_pd(_mm256_loadu_pd(gw + i), _mm256_mul_pd(q, vr)));
    _mm256_storeu_pd(gb + i, _mm256_add_pd(_mm256_loadu_pd(gb + i), vr));
  }
  for (; i < n; ++i) {
    gw[i] -= (s[i] / (w[i] * w[i])) * r[i];
    gb[i] += r[i];
  }
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i,
                     _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  for (; i < n; ++i) x[i] *= a;
}

void mul_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

constexpr Table kAvx2{
    Isa::Avx2,        max_avx2,         sum_avx2,
    affine_avx2,      inv_affine_avx2,  scalar_affine_avx2,
    accumulate_direct_avx2, accumulate_inverse_avx2,
    axpy_avx2,        scale_avx2,       mul_avx2,
};

}  // namespace

const Table* avx2_variant() noexcept { return &kAvx2; }

}  // namespace mcct::kernels::detail

#else

namespace mcct::kernels::detail {
const Table* avx2_variant() noexcept { return nullptr; }
}  // namespace mcct::kernels::detail

#endif
