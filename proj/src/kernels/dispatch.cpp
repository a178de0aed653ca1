#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cbdrl/kernels.hpp"
#include "kernels_impl.hpp"

namespace cbdrl::kernels {
namespace {

#define CBDRL_TABLE(ns)                                                   \
  Table {                                                                 \
    &ns::dot, &ns::sum, &ns::max, &ns::squared_distance, &ns::axpy,       \
        &ns::lerp, &ns::exp_shifted, &ns::scale                           \
  }

const Table kScalar = CBDRL_TABLE(scalar);
#if defined(CBDRL_HAVE_AVX2)
const Table kAvx2 = CBDRL_TABLE(avx2);
#endif
#if defined(CBDRL_HAVE_NEON)
const Table kNeon = CBDRL_TABLE(neon);
#endif

#undef CBDRL_TABLE

bool cpu_has_avx2() {
#if defined(CBDRL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Level parse_level(const std::string& name) {
  if (name == "scalar") return Level::scalar;
  if (name == "avx2") return Level::avx2;
  if (name == "neon") return Level::neon;
  throw std::invalid_argument("CBDRL_SIMD: unknown level '" + name + "'");
}

Level initial_level() {
  if (const char* env = std::getenv("CBDRL_SIMD"); env != nullptr && *env) {
    const Level forced = parse_level(env);
    if (!level_available(forced)) {
      throw std::invalid_argument(std::string("CBDRL_SIMD: level '") + env +
                                  "' is not available on this machine");
    }
    return forced;
  }
  return detected_level();
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

const Table& active() { return table(current().load(std::memory_order_relaxed)); }

}  // namespace

std::string_view level_name(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
  }
  return "unknown";
}

bool level_available(Level level) {
  switch (level) {
    case Level::scalar: return true;
    case Level::avx2: return cpu_has_avx2();
    case Level::neon:
#if defined(CBDRL_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Level detected_level() {
  if (level_available(Level::avx2)) return Level::avx2;
  if (level_available(Level::neon)) return Level::neon;
  return Level::scalar;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

void set_level(Level level) {
  if (!level_available(level)) {
    throw std::invalid_argument("SIMD level '" + std::string(level_name(level)) +
                                "' is not available");
  }
  current().store(level, std::memory_order_relaxed);
}

const Table& table(Level level) {
  switch (level) {
#if defined(CBDRL_HAVE_AVX2)
    case Level::avx2: return kAvx2;
#endif
#if defined(CBDRL_HAVE_NEON)
    case Level::neon: return kNeon;
#endif
    default: break;
  }
  if (level != Level::scalar) {
    throw std::invalid_argument("SIMD level '" + std::string(level_name(level)) +
                                "' was not compiled in");
  }
  return kScalar;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

double max(std::span<const double> x) { return active().max(x.data(), x.size()); }

std::size_t argmax(std::span<const double> x) {
  const double m = max(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == m) return i;
  }
  return 0;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void lerp(std::span<const double> a, std::span<const double> b, double w,
          std::span<double> out) {
  active().lerp(a.data(), b.data(), w, out.data(), a.size());
}

void softmax(std::span<const double> x, double inv_temperature,
             std::span<double> out) {
  const Table& t = active();
  const double shift = t.max(x.data(), x.size());
  const double z = t.exp_shifted(x.data(), shift, inv_temperature, out.data(),
                                 x.size());
  t.scale(1.0 / z, out.data(), out.size());
}

}  // namespace cbdrl::kernels
