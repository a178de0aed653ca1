#pragma once

#include <cstdint>
#include <string>

namespace cbdrl {

/// Linear decay from `start` to `end` over `decay_steps`, then held.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  std::uint64_t decay_steps = 10'000;

  double at(std::uint64_t t) const;
  void validate() const;
};

enum class AnnealKind { constant, linear, exponential };

/// Smoothing temperature over time. Exponential interpolates geometrically
/// between start and end over decay_steps.
struct TemperatureSchedule {
  AnnealKind kind = AnnealKind::constant;
  double start = 1.0;
  double end = 1.0;
  std::uint64_t decay_steps = 1;

  double at(std::uint64_t t) const;
  void validate() const;
};

enum class AlphaKind { inverse_count, constant };

/// Per-(s, a) learning rate: scale / N(s, a)^power, or a constant.
struct AlphaSchedule {
  AlphaKind kind = AlphaKind::inverse_count;
  double value = 1.0;   // scale for inverse_count, the rate for constant
  double power = 1.0;   // inverse_count only

  double at(std::uint64_t visits) const;
  /// True when the schedule form guarantees sum(alpha) = inf and
  /// sum(alpha^2) < inf over visits.
  bool robbins_monro() const;
  void validate() const;
};

AnnealKind parse_anneal_kind(const std::string& s);
AlphaKind parse_alpha_kind(const std::string& s);
std::string to_string(AnnealKind k);
std::string to_string(AlphaKind k);

}  // namespace cbdrl
