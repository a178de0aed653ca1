#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cbdrl/smoothing.hpp"

namespace cbdrl {

/// Action-selection frequencies within a category, smoothed by a Laplace
/// pseudo-count: P(a) = (counts[a] + laplace) / sum(counts + laplace).
class DiscreteBelief {
 public:
  explicit DiscreteBelief(std::size_t n_actions, double laplace = 1.0);
  DiscreteBelief(std::vector<std::uint64_t> counts, double laplace);

  std::size_t n_actions() const { return counts_.size(); }
  std::span<const std::uint64_t> counts() const { return counts_; }
  double laplace() const { return laplace_; }
  std::uint64_t total() const { return total_; }

  /// Throws std::logic_error when every count and the pseudo-count are zero.
  ActionDistribution probabilities() const;
  /// Writes probabilities into out without allocating.
  void probabilities(std::span<double> out) const;

  void record(std::size_t action);

 private:
  std::vector<std::uint64_t> counts_;
  double laplace_;
  std::uint64_t total_ = 0;
};

/// Returns b with counts[action] incremented.
DiscreteBelief discrete_belief_update(const DiscreteBelief& b, std::size_t action);

/// Diagonal Gaussian over a continuous action space.
struct GaussianBelief {
  static constexpr double kDefaultVarianceFloor = 1e-6;

  std::vector<double> mean;
  std::vector<double> variance;
  std::uint64_t obs_count = 0;
  double variance_floor = kDefaultVarianceFloor;

  static GaussianBelief prior(std::size_t dim, double mean, double variance,
                              double variance_floor = kDefaultVarianceFloor);
  std::size_t dim() const { return mean.size(); }
};

/// Conjugate update of b (as prior) with one observation of known variance,
/// elementwise; the posterior variance is floored at b.variance_floor.
GaussianBelief gaussian_belief_update(const GaussianBelief& b, std::span<const double> obs_mean,
                                      std::span<const double> obs_var);

/// (1 - beta) * z + beta * p.
ActionDistribution fuse_discrete(const ActionDistribution& z, const ActionDistribution& p,
                                 double beta);

struct GaussianParams {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Convex combination of means and of variances (not precisions).
GaussianParams fuse_gaussian(const GaussianParams& policy, const GaussianBelief& category,
                             double beta);

/// log N(a; mean, diag(variance)) with the log(2 pi) constant per dimension.
/// Requires variance >= variance_floor elementwise.
double gaussian_log_density(std::span<const double> a, std::span<const double> mean,
                            std::span<const double> variance,
                            double variance_floor = GaussianBelief::kDefaultVarianceFloor);

enum class BetaKind { constant, linear_ramp, exponential_decay };

/// Monotone weight on the category belief, converging to beta_star.
struct BetaSchedule {
  BetaKind kind = BetaKind::constant;
  double beta0 = 0.0;
  double beta_star = 0.0;
  double rate = 0.0;

  static BetaSchedule constant(double beta);
  /// Moves from beta0 toward beta_star by `rate` per step, then holds.
  static BetaSchedule linear_ramp(double beta0, double beta_star, double rate);
  /// beta_star + (beta0 - beta_star) * exp(-rate * t).
  static BetaSchedule exponential_decay(double beta0, double beta_star, double rate);

  void validate() const;
};

double beta_at(const BetaSchedule& schedule, std::uint64_t t);

}  // namespace cbdrl
