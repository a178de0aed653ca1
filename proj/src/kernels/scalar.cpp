#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace cbdrl::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void lerp(const double* a, const double* b, double w, double* out,
          std::size_t n) {
  const double keep = 1.0 - w;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a[i] == b[i] ? a[i] : keep * a[i] + w * b[i];
  }
}

double exp_shifted(const double* x, double shift, double inv_t, double* out,
                   std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp((x[i] - shift) * inv_t);
    acc += out[i];
  }
  return acc;
}

void scale(double s, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

}  // namespace cbdrl::kernels::scalar
