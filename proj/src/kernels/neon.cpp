#include "variants.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

namespace mcct::kernels::detail {
namespace {

// float64x2_t holds two lanes; a pair of registers reproduces the four-lane
// accumulation order of the scalar reference.

double max_neon(const double* x, std::size_t n) {
  std::size_t i = 0;
  double best = x[0];
  if (n >= 4) {
    float64x2_t lo = vld1q_f64(x);
    float64x2_t hi = vld1q_f64(x + 2);
    for (i = 4; i + 4 <= n; i += 4) {
      lo = vmaxq_f64(lo, vld1q_f64(x + i));
      hi = vmaxq_f64(hi, vld1q_f64(x + i + 2));
    }
    const double lanes[4] = {vgetq_lane_f64(lo, 0), vgetq_lane_f64(lo, 1), vgetq_lane_f64(hi, 0),
                             vgetq_lane_f64(hi, 1)};
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

double sum_neon(const double* x, std::size_t n) {
  const std::size_t body = n & ~std::size_t{3};
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  for (std::size_t i = 0; i < body; i += 4) {
    lo = vaddq_f64(lo, vld1q_f64(x + i));
    hi = vaddq_f64(hi, vld1q_f64(x + i + 2));
  }
  double total = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
                 (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (std::size_t i = body; i < n; ++i) total += x[i];
  return total;
}

void affine_neon(const double* s, const double* w, const double* b, double* out,
                 std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // vmulq + vaddq, never vfmaq: must round like the scalar reference
    float64x2_t prod = vmulq_f64(vld1q_f64(s + i), vld1q_f64(w + i));
    vst1q_f64(out + i, vaddq_f64(prod, vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = s[i] * w[i] + b[i];
}

void inv_affine_neon(const double* s, const double* w, const double* b, double* out,
                     std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t q = vdivq_f64(vld1q_f64(s + i), vld1q_f64(w + i));
    vst1q_f64(out + i, vaddq_f64(q, vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = s[i] / w[i] + b[i];
}

void scalar_affine_neon(const double* s, double a, double b, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vmulq_f64(vld1q_f64(s + i), va), vb));
  for (; i < n; ++i) out[i] = s[i] * a + b;
}

void accumulate_direct_neon(const double* s, const double* r, double* gw, double* gb,
                            std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vr = vld1q_f64(r + i);
    vst1q_f64(gw + i, vaddq_f64(vld1q_f64(gw + i), vmulq_f64(vld1q_f64(s + i), vr)));
    vst1q_f64(gb + i, vaddq_f64(vld1q_f64(gb + i), vr));
  }
  for (; i < n; ++i) {
    gw[i] += s[i] * r[i];
    gb[i] += r[i];
  }
}

void accumulate_inverse_neon(const double* s, const double* r, const double* w, double* gw,
                             double* gb, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vw = vld1q_f64(w + i);
    const float64x2_t vr = vld1q_f64(r + i);
    const float64x2_t q = vdivq_f64(vld1q_f64(s + i), vmulq_f64(vw, vw));
    vst1q_f64(gw + i, vsubq_f64(vld1q_f64(gw + i), vmulq_f64(q, vr)));
    vst1q_f64(gb + i, vaddq_f64(vld1q_f64(gb + i), vr));
  }
  for (; i < n; ++i) {
    gw[i] -= (s[i] / (w[i] * w[i])) * r[i];
    gb[i] += r[i];
  }
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double a, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
  for (; i < n; ++i) x[i] *= a;
}

void mul_neon(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

constexpr Table kNeon{
    Isa::Neon,        max_neon,         sum_neon,
    affine_neon,      inv_affine_neon,  scalar_affine_neon,
    accumulate_direct_neon, accumulate_inverse_neon,
    axpy_neon,        scale_neon,       mul_neon,
};

}  // namespace

const Table* neon_variant() noexcept { return &kNeon; }

}  // namespace mcct::kernels::detail

#else

namespace mcct::kernels::detail {
const Table* neon_variant() noexcept { return nullptr; }
}  // namespace mcct::kernels::detail

#endif
