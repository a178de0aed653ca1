#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cbdrl/mdp.hpp"

namespace cbdrl {

struct ConvergenceReport {
  std::vector<double> delta;  // ||Q_t - Q*||_inf per checkpoint
  /// Least-squares slope of delta against checkpoint index over the trailing
  /// window; 0 with fewer than two points.
  double trend_slope = 0.0;
  /// Fraction of consecutive pairs in the window with delta[i+1] <= delta[i].
  double monotone_fraction = 0.0;
  /// trend_slope <= 0 and the window ends no higher than it starts.
  bool decreasing = false;
  std::size_t window = 0;
};

double sup_norm_distance(const QValues& a, const QValues& b);

/// Throws std::invalid_argument on a shape mismatch or an empty series.
ConvergenceReport convergence_probe(std::span<const QValues> series, const QValues& oracle,
                                    std::size_t window = 10);

}  // namespace cbdrl
