#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cbdrl/smoothing.hpp"

namespace cbdrl {

/// Row-major [rows][cols] dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double init = 0.0) : rows(r), cols(c), data(r * c, init) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// pi(a | s) = softmax(W^T phi(s)). W is [features][actions].
class LinearSoftmaxPolicy {
 public:
  LinearSoftmaxPolicy(std::size_t n_features, std::size_t n_actions);

  std::size_t n_features() const { return weights_.rows; }
  std::size_t n_actions() const { return weights_.cols; }
  Matrix& weights() { return weights_; }
  const Matrix& weights() const { return weights_; }

  void logits(std::span<const double> phi, std::span<double> out) const;
  void probabilities(std::span<const double> phi, std::span<double> out) const;
  ActionDistribution distribution(std::span<const double> phi) const;

 private:
  Matrix weights_;
};

/// v(s) = w . phi(s).
struct LinearValue {
  std::vector<double> weights;

  explicit LinearValue(std::size_t n_features = 0) : weights(n_features, 0.0) {}
  double operator()(std::span<const double> phi) const;
};

/// Diagonal Gaussian with mean W^T phi(s) and state-independent log std.
class LinearGaussianPolicy {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  LinearGaussianPolicy(std::size_t n_features, std::size_t action_dim, double init_log_std);

  std::size_t n_features() const { return mean_weights_.rows; }
  std::size_t action_dim() const { return mean_weights_.cols; }
  Matrix& mean_weights() { return mean_weights_; }
  const Matrix& mean_weights() const { return mean_weights_; }
  std::vector<double>& log_std() { return log_std_; }
  const std::vector<double>& log_std() const { return log_std_; }

  void mean(std::span<const double> phi, std::span<double> out) const;
  /// exp(2 * log_std), elementwise.
  std::vector<double> variance() const;
  void clamp_log_std();

 private:
  Matrix mean_weights_;
  std::vector<double> log_std_;
};

/// Q(s, a) = w . psi(s, a) with psi = [phi, phi (x) a, a^2].
struct LinearCritic {
  std::size_t n_features = 0;
  std::size_t action_dim = 0;
  std::vector<double> weights;

  LinearCritic() = default;
  LinearCritic(std::size_t features, std::size_t actions)
      : n_features(features), action_dim(actions),
        weights(features + features * actions + actions, 0.0) {}

  void features(std::span<const double> phi, std::span<const double> a,
                std::span<double> psi) const;
  double value(std::span<const double> phi, std::span<const double> a) const;
  /// dQ / da.
  void action_gradient(std::span<const double> phi, std::span<const double> a,
                       std::span<double> out) const;
};

/// phi with a trailing constant 1.
std::vector<double> with_bias(std::span<const double> features);

/// Indicator vector of `index` with a trailing constant 1.
std::vector<double> one_hot_with_bias(std::size_t index, std::size_t n);

}  // namespace cbdrl
