#include <arm_neon.h>

#include "prognos/kernels.h"

namespace prognos::kernels {
namespace {

// Two float64x2 registers hold lanes (0,1) and (2,3).
inline double Horizontal(float64x2_t a01, float64x2_t a23) {
  const float64x2_t pair = vaddq_f64(a01, a23);  // (l0 + l2, l1 + l3)
  return vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
}

double DotNeon(const double* a, const double* b, size_t n) {
  float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a01 = vaddq_f64(a01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    a23 = vaddq_f64(a23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double s = Horizontal(a01, a23);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double SquaredDistanceNeon(const double* a, const double* b, size_t n) {
  float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d01 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t d23 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    a01 = vaddq_f64(a01, vmulq_f64(d01, d01));
    a23 = vaddq_f64(a23, vmulq_f64(d23, d23));
  }
  double s = Horizontal(a01, a23);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double SumNeon(const double* a, size_t n) {
  float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a01 = vaddq_f64(a01, vld1q_f64(a + i));
    a23 = vaddq_f64(a23, vld1q_f64(a + i + 2));
  }
  double s = Horizontal(a01, a23);
  for (; i < n; ++i) s += a[i];
  return s;
}

void AxpyNeon(double alpha, const double* x, double* y, size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

const KernelTable kNeonTable = {DotNeon, SquaredDistanceNeon, SumNeon, AxpyNeon};

}  // namespace

const KernelTable* NeonKernels() { return &kNeonTable; }

}  // namespace prognos::kernels
