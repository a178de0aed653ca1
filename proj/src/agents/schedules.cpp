#include "cbdrl/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbdrl {
namespace {

double progress(std::uint64_t t, std::uint64_t span) {
  if (span == 0) return 1.0;
  return std::min(1.0, static_cast<double>(t) / static_cast<double>(span));
}

}  // namespace

double EpsilonSchedule::at(std::uint64_t t) const {
  return start + (end - start) * progress(t, decay_steps);
}

void EpsilonSchedule::validate() const {
  if (!(start >= 0.0 && start <= 1.0) || !(end >= 0.0 && end <= 1.0)) {
    throw std::invalid_argument("epsilon schedule: start and end must lie in [0, 1]");
  }
}

double TemperatureSchedule::at(std::uint64_t t) const {
  const double f = progress(t, decay_steps);
  switch (kind) {
    case AnnealKind::constant:
      return start;
    case AnnealKind::linear:
      return start + (end - start) * f;
    case AnnealKind::exponential:
      return f >= 1.0 ? end : start * std::pow(end / start, f);
  }
  return start;
}

void TemperatureSchedule::validate() const {
  if (!(start > 0.0) || !std::isfinite(start)) {
    throw std::invalid_argument("temperature schedule: start must be positive");
  }
  if (kind != AnnealKind::constant && (!(end > 0.0) || !std::isfinite(end))) {
    throw std::invalid_argument("temperature schedule: end must be positive");
  }
}

double AlphaSchedule::at(std::uint64_t visits) const {
  if (kind == AlphaKind::constant) return value;
  const double n = static_cast<double>(std::max<std::uint64_t>(visits, 1));
  return std::min(1.0, value / (power == 1.0 ? n : std::pow(n, power)));
}

bool AlphaSchedule::robbins_monro() const {
  return kind == AlphaKind::inverse_count && power > 0.5 && power <= 1.0;
}

void AlphaSchedule::validate() const {
  if (!(value > 0.0 && value <= 1.0)) {
    throw std::invalid_argument("alpha schedule: value must lie in (0, 1]");
  }
  if (kind == AlphaKind::inverse_count && !(power > 0.0)) {
    throw std::invalid_argument("alpha schedule: power must be positive");
  }
}

AnnealKind parse_anneal_kind(const std::string& s) {
  if (s == "constant") return AnnealKind::constant;
  if (s == "linear") return AnnealKind::linear;
  if (s == "exponential") return AnnealKind::exponential;
  throw std::invalid_argument("unknown anneal kind '" + s + "'");
}

AlphaKind parse_alpha_kind(const std::string& s) {
  if (s == "inverse_count") return AlphaKind::inverse_count;
  if (s == "constant") return AlphaKind::constant;
  throw std::invalid_argument("unknown alpha kind '" + s + "'");
}

std::string to_string(AnnealKind k) {
  switch (k) {
    case AnnealKind::constant: return "constant";
    case AnnealKind::linear: return "linear";
    case AnnealKind::exponential: return "exponential";
  }
  return "constant";
}

std::string to_string(AlphaKind k) {
  return k == AlphaKind::constant ? "constant" : "inverse_count";
}

}  // namespace cbdrl
