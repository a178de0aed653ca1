#pragma once

// Data-parallel inner loops shared by the value backups, the smoothing
// strategies, leader clustering and the linear policies.
//
// Every kernel has a scalar reference implementation. Vector variants
// (AVX2+FMA on x86-64, NEON on aarch64) are compiled into separate
// translation units and chosen once at runtime. The environment variable
// CBDRL_SIMD=scalar|avx2|neon forces a level; tests use set_level().

#include <cstddef>
#include <span>
#include <string_view>

namespace cbdrl::kernels {

enum class Level { scalar, avx2, neon };

std::string_view level_name(Level level);

/// Level currently used by the free functions below.
Level active_level();

/// Best level this binary and CPU support together.
Level detected_level();

/// Whether `level` was compiled in and runs on this CPU.
bool level_available(Level level);

/// Forces a level. Throws std::invalid_argument if it is unavailable.
void set_level(Level level);

// Sizes of paired spans must match; this is checked by the callers that
// accept user data, not here.

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> x);
double max(std::span<const double> x);
/// Lowest index attaining the maximum.
std::size_t argmax(std::span<const double> x);
double squared_distance(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
/// out = (1 - w) * a + w * b; entries with a == b are copied exactly.
void lerp(std::span<const double> a, std::span<const double> b, double w,
          std::span<double> out);
/// out = softmax(x * inv_temperature), max-subtracted.
void softmax(std::span<const double> x, double inv_temperature,
             std::span<double> out);

// Per-level entry points, used by the dispatcher and the equivalence tests.
struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*max)(const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*lerp)(const double*, const double*, double, double*, std::size_t);
  // Writes exp((x - max) * inv_t) into out and returns its sum.
  double (*exp_shifted)(const double*, double, double, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
};

const Table& table(Level level);

}  // namespace cbdrl::kernels
