#include "cbdrl/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cbdrl/kernels.hpp"

namespace cbdrl {
namespace {

void require_finite(std::span<const double> x, const char* what) {
  if (x.empty()) throw std::invalid_argument(std::string(what) + ": empty vector");
  for (const double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": NaN or Inf input");
  }
}

std::vector<double> softmax_of(std::span<const double> q, double temperature) {
  std::vector<double> out(q.size());
  kernels::softmax(q, 1.0 / temperature, out);
  return out;
}

}  // namespace

ActionDistribution::ActionDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("ActionDistribution: empty");
  double total = 0.0;
  for (const double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("ActionDistribution: negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw std::invalid_argument("ActionDistribution: entries sum to " + std::to_string(total));
  }
}

ActionDistribution ActionDistribution::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("ActionDistribution: empty");
  return DistributionBuilder::adopt(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ActionDistribution ActionDistribution::point_mass(std::size_t n, std::size_t index) {
  if (index >= n) throw std::out_of_range("ActionDistribution: point mass index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return DistributionBuilder::adopt(std::move(p));
}

SmoothingStrategy SmoothingStrategy::softmax(double temperature) {
  SmoothingStrategy s;
  s.kind = SmoothingKind::softmax;
  s.temperature = temperature;
  return s;
}

SmoothingStrategy SmoothingStrategy::clipped_max(double tau) {
  SmoothingStrategy s;
  s.kind = SmoothingKind::clipped_max;
  s.tau = tau;
  return s;
}

SmoothingStrategy SmoothingStrategy::clipped_softmax(std::size_t top_k, double temperature) {
  SmoothingStrategy s;
  s.kind = SmoothingKind::clipped_softmax;
  s.top_k = top_k;
  s.temperature = temperature;
  return s;
}

SmoothingStrategy SmoothingStrategy::bayesian_softmax(ScalarGaussian prior, double obs_variance,
                                                      double temperature) {
  SmoothingStrategy s;
  s.kind = SmoothingKind::bayesian_softmax;
  s.prior = prior;
  s.obs_variance = obs_variance;
  s.temperature = temperature;
  return s;
}

void SmoothingStrategy::validate() const {
  switch (kind) {
    case SmoothingKind::clipped_max:
      if (!(tau >= 0.0 && tau < 1.0)) {
        throw std::invalid_argument("clipped_max: tau must lie in [0, 1)");
      }
      return;
    case SmoothingKind::clipped_softmax:
      if (top_k == 0) throw std::invalid_argument("clipped_softmax: top_k must be >= 1");
      break;
    case SmoothingKind::bayesian_softmax:
      if (!prior) throw std::invalid_argument("bayesian_softmax: prior is required");
      if (!(prior->variance > 0.0) || !std::isfinite(prior->mean)) {
        throw std::invalid_argument("bayesian_softmax: prior variance must be positive");
      }
      if (!(obs_variance > 0.0)) {
        throw std::invalid_argument("bayesian_softmax: observation variance must be positive");
      }
      break;
    case SmoothingKind::softmax:
      break;
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("smoothing: temperature must be positive and finite");
  }
}

ScalarGaussian reward_posterior(const ScalarGaussian& prior, double obs_variance,
                                std::span<const double> observations) {
  const double n = static_cast<double>(observations.size());
  const double total = std::accumulate(observations.begin(), observations.end(), 0.0);
  ScalarGaussian post;
  post.variance = 1.0 / (1.0 / prior.variance + n / obs_variance);
  post.mean = post.variance * (prior.mean / prior.variance + total / obs_variance);
  return post;
}

ActionDistribution smooth(const SmoothingStrategy& strategy, std::span<const double> q_values,
                          std::span<const double> reward_history,
                          SmoothDiagnostics* diagnostics) {
  strategy.validate();
  require_finite(q_values, "smooth");
  const std::size_t n = q_values.size();
  if (diagnostics != nullptr) *diagnostics = {};

  switch (strategy.kind) {
    case SmoothingKind::softmax:
      return DistributionBuilder::adopt(softmax_of(q_values, strategy.temperature));

    case SmoothingKind::clipped_max: {
      const std::size_t best = kernels::argmax(q_values);
      if (n == 1) {
        if (strategy.tau > 0.0 && diagnostics != nullptr) diagnostics->degenerate = true;
        return ActionDistribution::point_mass(1, 0);
      }
      std::vector<double> p(n, strategy.tau / static_cast<double>(n - 1));
      p[best] = 1.0 - strategy.tau;
      return DistributionBuilder::adopt(std::move(p));
    }

    case SmoothingKind::clipped_softmax: {
      if (strategy.top_k >= n) {
        return DistributionBuilder::adopt(softmax_of(q_values, strategy.temperature));
      }
      // Admissible set: the top_k values, lower index first among ties.
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return q_values[a] > q_values[b]; });
      std::vector<double> admitted(strategy.top_k);
      for (std::size_t i = 0; i < strategy.top_k; ++i) admitted[i] = q_values[order[i]];
      const auto sub = softmax_of(admitted, strategy.temperature);
      std::vector<double> p(n, 0.0);
      for (std::size_t i = 0; i < strategy.top_k; ++i) p[order[i]] = sub[i];
      return DistributionBuilder::adopt(std::move(p));
    }

    case SmoothingKind::bayesian_softmax: {
      if (!reward_history.empty()) require_finite(reward_history, "smooth: reward history");
      const ScalarGaussian post =
          reward_posterior(*strategy.prior, strategy.obs_variance, reward_history);
      if (diagnostics != nullptr) diagnostics->posterior = post;
      std::vector<double> adjusted(q_values.begin(), q_values.end());
      for (double& v : adjusted) v += post.mean;
      return DistributionBuilder::adopt(softmax_of(adjusted, strategy.temperature));
    }
  }
  throw std::logic_error("smooth: unhandled strategy");
}

double smoothed_backup(std::span<const double> q_next, const ActionDistribution& dist,
                       double reward, double gamma) {
  if (q_next.size() != dist.size()) {
    throw std::invalid_argument("smoothed_backup: dimension mismatch");
  }
  return reward + gamma * kernels::dot(dist.probs(), q_next);
}

double expected_utility(const ActionDistribution& dist, std::span<const double> utilities) {
  if (utilities.size() != dist.size()) {
    throw std::invalid_argument("expected_utility: dimension mismatch");
  }
  return kernels::dot(dist.probs(), utilities);
}

}  // namespace cbdrl
