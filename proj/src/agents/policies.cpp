#include "cbdrl/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cbdrl/kernels.hpp"

namespace cbdrl {

LinearSoftmaxPolicy::LinearSoftmaxPolicy(std::size_t n_features, std::size_t n_actions)
    : weights_(n_features, n_actions) {
  if (n_features == 0 || n_actions == 0) {
    throw std::invalid_argument("LinearSoftmaxPolicy: empty shape");
  }
}

void LinearSoftmaxPolicy::logits(std::span<const double> phi, std::span<double> out) const {
  if (phi.size() != weights_.rows || out.size() != weights_.cols) {
    throw std::invalid_argument("LinearSoftmaxPolicy: dimension mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t f = 0; f < weights_.rows; ++f) {
    if (phi[f] == 0.0) continue;
    kernels::axpy(phi[f], {weights_.data.data() + f * weights_.cols, weights_.cols}, out);
  }
}

void LinearSoftmaxPolicy::probabilities(std::span<const double> phi, std::span<double> out) const {
  std::vector<double> z(weights_.cols);
  logits(phi, z);
  kernels::softmax(z, 1.0, out);
}

ActionDistribution LinearSoftmaxPolicy::distribution(std::span<const double> phi) const {
  std::vector<double> p(weights_.cols);
  probabilities(phi, p);
  return DistributionBuilder::adopt(std::move(p));
}

double LinearValue::operator()(std::span<const double> phi) const {
  if (phi.size() != weights.size()) throw std::invalid_argument("LinearValue: dimension mismatch");
  return kernels::dot(weights, phi);
}

LinearGaussianPolicy::LinearGaussianPolicy(std::size_t n_features, std::size_t action_dim,
                                           double init_log_std)
    : mean_weights_(n_features, action_dim), log_std_(action_dim, init_log_std) {
  if (n_features == 0 || action_dim == 0) {
    throw std::invalid_argument("LinearGaussianPolicy: empty shape");
  }
  clamp_log_std();
}

void LinearGaussianPolicy::mean(std::span<const double> phi, std::span<double> out) const {
  if (phi.size() != mean_weights_.rows || out.size() != mean_weights_.cols) {
    throw std::invalid_argument("LinearGaussianPolicy: dimension mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t f = 0; f < mean_weights_.rows; ++f) {
    for (std::size_t d = 0; d < mean_weights_.cols; ++d) out[d] += phi[f] * mean_weights_(f, d);
  }
}

std::vector<double> LinearGaussianPolicy::variance() const {
  std::vector<double> v(log_std_.size());
  for (std::size_t d = 0; d < v.size(); ++d) v[d] = std::exp(2.0 * log_std_[d]);
  return v;
}

void LinearGaussianPolicy::clamp_log_std() {
  for (double& l : log_std_) l = std::clamp(l, kLogStdMin, kLogStdMax);
}

void LinearCritic::features(std::span<const double> phi, std::span<const double> a,
                            std::span<double> psi) const {
  if (phi.size() != n_features || a.size() != action_dim || psi.size() != weights.size()) {
    throw std::invalid_argument("LinearCritic: dimension mismatch");
  }
  std::size_t i = 0;
  for (const double f : phi) psi[i++] = f;
  for (const double f : phi) {
    for (const double x : a) psi[i++] = f * x;
  }
  for (const double x : a) psi[i++] = x * x;
}

double LinearCritic::value(std::span<const double> phi, std::span<const double> a) const {
  std::vector<double> psi(weights.size());
  features(phi, a, psi);
  return kernels::dot(weights, psi);
}

void LinearCritic::action_gradient(std::span<const double> phi, std::span<const double> a,
                                   std::span<double> out) const {
  if (phi.size() != n_features || a.size() != action_dim || out.size() != action_dim) {
    throw std::invalid_argument("LinearCritic: dimension mismatch");
  }
  const std::size_t cross = n_features;
  const std::size_t square = n_features + n_features * action_dim;
  for (std::size_t d = 0; d < action_dim; ++d) {
    double g = 2.0 * weights[square + d] * a[d];
    for (std::size_t f = 0; f < n_features; ++f) g += weights[cross + f * action_dim + d] * phi[f];
    out[d] = g;
  }
}

std::vector<double> with_bias(std::span<const double> features) {
  std::vector<double> phi(features.begin(), features.end());
  phi.push_back(1.0);
  return phi;
}

std::vector<double> one_hot_with_bias(std::size_t index, std::size_t n) {
  if (index >= n) throw std::out_of_range("one_hot_with_bias: index out of range");
  std::vector<double> phi(n + 1, 0.0);
  phi[index] = 1.0;
  phi[n] = 1.0;
  return phi;
}

}  // namespace cbdrl
