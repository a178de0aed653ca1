// Equivalence of every compiled SIMD level against the scalar reference.

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "cbdrl/kernels.hpp"

namespace k = cbdrl::kernels;

namespace {

std::vector<k::Level> available_levels() {
  std::vector<k::Level> out;
  for (const auto level : {k::Level::scalar, k::Level::avx2, k::Level::neon}) {
    if (k::level_available(level)) out.push_back(level);
  }
  return out;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Reductions reorder additions; bound the difference by the magnitude sum.
double reduction_tolerance(const std::vector<double>& terms) {
  double mag = 0.0;
  for (const double t : terms) mag += std::abs(t);
  return 1e-14 * (mag + 1.0);
}

}  // namespace

TEST_CASE("scalar level is always available and detection picks a usable level") {
  CHECK(k::level_available(k::Level::scalar));
  CHECK(k::level_available(k::detected_level()));
  CHECK(k::level_available(k::active_level()));
}

TEST_CASE("vector kernels match the scalar reference on random inputs") {
  std::mt19937_64 rng(20241016);
  const k::Table& ref = k::table(k::Level::scalar);
  for (const auto level : available_levels()) {
    CAPTURE(k::level_name(level));
    const k::Table& t = k::table(level);
    // Lengths cover empty tails, partial lanes and unrolled bodies.
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 257u}) {
      CAPTURE(n);
      const auto a = random_vector(rng, n, 5.0);
      const auto b = random_vector(rng, n, 5.0);
      std::vector<double> products(n);
      for (std::size_t i = 0; i < n; ++i) products[i] = a[i] * b[i];

      CHECK(std::abs(t.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
            reduction_tolerance(products));
      CHECK(std::abs(t.sum(a.data(), n) - ref.sum(a.data(), n)) <= reduction_tolerance(a));
      CHECK(t.max(a.data(), n) == ref.max(a.data(), n));
      CHECK(std::abs(t.squared_distance(a.data(), b.data(), n) -
                     ref.squared_distance(a.data(), b.data(), n)) <=
            1e-13 * (ref.squared_distance(a.data(), b.data(), n) + 1.0));

      auto y1 = b;
      auto y2 = b;
      t.axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

      std::vector<double> l1(n), l2(n);
      t.lerp(a.data(), b.data(), 0.3, l1.data(), n);
      ref.lerp(a.data(), b.data(), 0.3, l2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(l1[i] == l2[i]);

      std::vector<double> e1(n), e2(n);
      const double z1 = t.exp_shifted(a.data(), 5.0, 0.7, e1.data(), n);
      const double z2 = ref.exp_shifted(a.data(), 5.0, 0.7, e2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(e1[i] == e2[i]);
      CHECK(std::abs(z1 - z2) <= reduction_tolerance(e2));
    }
  }
}

TEST_CASE("lerp endpoints are exact at every level") {
  const std::vector<double> a{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const std::vector<double> b{0.9, 0.01, 0.05, 0.02, 0.01, 0.01};
  for (const auto level : available_levels()) {
    const k::Table& t = k::table(level);
    std::vector<double> out(a.size());
    t.lerp(a.data(), b.data(), 0.0, out.data(), a.size());
    CHECK(out == a);
    t.lerp(a.data(), b.data(), 1.0, out.data(), a.size());
    CHECK(out == b);
  }
}

TEST_CASE("point-mass dot products are exact at every level") {
  // The reduction to classical Q-learning depends on this.
  std::mt19937_64 rng(7);
  for (const auto level : available_levels()) {
    const k::Table& t = k::table(level);
    for (std::size_t n : {1u, 3u, 4u, 9u, 16u}) {
      const auto q = random_vector(rng, n, 100.0);
      for (std::size_t hot = 0; hot < n; ++hot) {
        std::vector<double> p(n, 0.0);
        p[hot] = 1.0;
        CHECK(t.dot(p.data(), q.data(), n) == q[hot]);
      }
    }
  }
}

TEST_CASE("dispatching free functions agree with the table of the active level") {
  const k::Level before = k::active_level();
  for (const auto level : available_levels()) {
    k::set_level(level);
    const std::vector<double> x{3.0, -1.0, 3.0, 2.0, 0.5};
    CHECK(k::argmax(x) == 0);  // lowest index among ties
    CHECK(k::max(x) == 3.0);
    std::vector<double> out(x.size());
    k::softmax(x, 2.0, out);
    double total = 0.0;
    for (const double p : out) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out[0] == out[2]);
  }
  k::set_level(before);
}

TEST_CASE("unavailable levels are rejected") {
  for (const auto level : {k::Level::avx2, k::Level::neon}) {
    if (!k::level_available(level)) CHECK_THROWS_AS(k::set_level(level), std::invalid_argument);
  }
}
