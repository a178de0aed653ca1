// aarch64 only; NEON is part of the base ISA there, so no runtime check.

#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace cbdrl::kernels::neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double max(const double* x, std::size_t n) {
  if (n < 2) return x[0];
  float64x2_t m = vld1q_f64(x);
  std::size_t i = 2;
  for (; i + 2 <= n; i += 2) m = vmaxq_f64(m, vld1q_f64(x + i));
  double r = vmaxvq_f64(m);
  for (; i < n; ++i) r = std::max(r, x[i]);
  return r;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void lerp(const double* a, const double* b, double w, double* out,
          std::size_t n) {
  const double keep = 1.0 - w;
  const float64x2_t vk = vdupq_n_f64(keep);
  const float64x2_t vw = vdupq_n_f64(w);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t va = vld1q_f64(a + i);
    const float64x2_t vb = vld1q_f64(b + i);
    const float64x2_t mix = vaddq_f64(vmulq_f64(vk, va), vmulq_f64(vw, vb));
    vst1q_f64(out + i, vbslq_f64(vceqq_f64(va, vb), va, mix));
  }
  for (; i < n; ++i) out[i] = a[i] == b[i] ? a[i] : keep * a[i] + w * b[i];
}

double exp_shifted(const double* x, double shift, double inv_t, double* out,
                   std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(shift);
  const float64x2_t vt = vdupq_n_f64(inv_t);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t z = vmulq_f64(vsubq_f64(vld1q_f64(x + i), vs), vt);
    double lanes[2] = {std::exp(vgetq_lane_f64(z, 0)),
                       std::exp(vgetq_lane_f64(z, 1))};
    const float64x2_t e = vld1q_f64(lanes);
    vst1q_f64(out + i, e);
    acc = vaddq_f64(acc, e);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    out[i] = std::exp((x[i] - shift) * inv_t);
    s += out[i];
  }
  return s;
}

void scale(double s, double* x, std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(vs, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= s;
}

}  // namespace cbdrl::kernels::neon
