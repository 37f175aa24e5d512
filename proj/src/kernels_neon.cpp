// NEON variants (aarch64 baseline; no runtime feature check needed there).

#include "psfed/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace psfed::kern {

namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void relu_neon(double* x, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmaxq_f64(vld1q_f64(x + i), zero));
  for (; i < n; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
}

void relu_backward_neon(const double* y, double* g, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(y + i), zero);
    const float64x2_t gv = vld1q_f64(g + i);
    vst1q_f64(g + i, vreinterpretq_f64_u64(
                         vandq_u64(vreinterpretq_u64_f64(gv), mask)));
  }
  for (; i < n; ++i)
    if (y[i] <= 0.0) g[i] = 0.0;
}

}  // namespace

const Ops neon_ops = {dot_neon, axpy_neon, sum_neon, relu_neon,
                      relu_backward_neon};

}  // namespace psfed::kern

#endif  // __aarch64__
