#pragma once

#include <cstddef>

// Declarations of the per-level kernels. Each namespace is defined in its own
// translation unit so that only the vector files get -mavx2/-mfma.

#define CBDRL_DECLARE_KERNELS(ns)                                              \
  namespace cbdrl::kernels::ns {                                               \
  double dot(const double* a, const double* b, std::size_t n);                 \
  double sum(const double* x, std::size_t n);                                  \
  double max(const double* x, std::size_t n);                                  \
  double squared_distance(const double* a, const double* b, std::size_t n);    \
  void axpy(double alpha, const double* x, double* y, std::size_t n);          \
  void lerp(const double* a, const double* b, double w, double* out,           \
            std::size_t n);                                                    \
  double exp_shifted(const double* x, double shift, double inv_t, double* out, \
                     std::size_t n);                                           \
  void scale(double s, double* x, std::size_t n);                              \
  }

CBDRL_DECLARE_KERNELS(scalar)

#if defined(CBDRL_HAVE_AVX2)
CBDRL_DECLARE_KERNELS(avx2)
#endif

#if defined(CBDRL_HAVE_NEON)
CBDRL_DECLARE_KERNELS(neon)
#endif

#undef CBDRL_DECLARE_KERNELS
