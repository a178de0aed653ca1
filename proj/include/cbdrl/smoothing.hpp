#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace cbdrl {

/// Normalized probability vector over a discrete action set.
class ActionDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Throws std::invalid_argument unless probs is non-empty, non-negative and
  /// sums to 1 within kSumTolerance.
  explicit ActionDistribution(std::vector<double> probs);

  static ActionDistribution uniform(std::size_t n);
  static ActionDistribution point_mass(std::size_t n, std::size_t index);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  struct Unchecked {};
  ActionDistribution(Unchecked, std::vector<double> probs) : probs_(std::move(probs)) {}
  friend class DistributionBuilder;

  std::vector<double> probs_;
};

/// Trusted construction for results that are simplex-valued by construction
/// (softmax outputs, convex combinations). Not part of the public contract.
class DistributionBuilder {
 public:
  static ActionDistribution adopt(std::vector<double> probs) {
    return ActionDistribution(ActionDistribution::Unchecked{}, std::move(probs));
  }
};

enum class SmoothingKind { softmax, clipped_max, clipped_softmax, bayesian_softmax };

struct ScalarGaussian {
  double mean = 0.0;
  double variance = 1.0;
};

/// Maps a vector of next-state action values to q_t(a | s'). Fields unused by
/// the chosen kind are ignored.
struct SmoothingStrategy {
  SmoothingKind kind = SmoothingKind::softmax;
  double temperature = 1.0;  // p(a) ~ exp(q(a) / temperature)
  double tau = 0.0;          // clipped_max: mass spread off the argmax
  std::size_t top_k = 1;     // clipped_softmax: size of the admissible set
  std::optional<ScalarGaussian> prior;  // bayesian_softmax
  double obs_variance = 1.0;            // bayesian_softmax

  static SmoothingStrategy softmax(double temperature = 1.0);
  static SmoothingStrategy clipped_max(double tau);
  static SmoothingStrategy clipped_softmax(std::size_t top_k, double temperature = 1.0);
  static SmoothingStrategy bayesian_softmax(ScalarGaussian prior, double obs_variance = 1.0,
                                            double temperature = 1.0);

  void validate() const;
};

struct SmoothDiagnostics {
  /// clipped_max over a single action with tau > 0: mass has nowhere to go.
  bool degenerate = false;
  /// bayesian_softmax only.
  std::optional<ScalarGaussian> posterior;
};

/// Conjugate update of a scalar Gaussian prior with n observations of known
/// variance.
ScalarGaussian reward_posterior(const ScalarGaussian& prior, double obs_variance,
                                std::span<const double> observations);

/// q_t(. | s') from Q(s', .). `reward_history` feeds the bayesian_softmax
/// posterior and is ignored by the other kinds.
ActionDistribution smooth(const SmoothingStrategy& strategy, std::span<const double> q_values,
                          std::span<const double> reward_history = {},
                          SmoothDiagnostics* diagnostics = nullptr);

/// r + gamma * <dist, q_next>.
double smoothed_backup(std::span<const double> q_next, const ActionDistribution& dist,
                       double reward, double gamma);

/// sum_a dist(a) * utilities(a).
double expected_utility(const ActionDistribution& dist, std::span<const double> utilities);

}  // namespace cbdrl
