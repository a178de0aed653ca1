#include "cbdrl/belief.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cbdrl/kernels.hpp"

namespace cbdrl {

DiscreteBelief::DiscreteBelief(std::size_t n_actions, double laplace)
    : DiscreteBelief(std::vector<std::uint64_t>(n_actions, 0), laplace) {}

DiscreteBelief::DiscreteBelief(std::vector<std::uint64_t> counts, double laplace)
    : counts_(std::move(counts)), laplace_(laplace) {
  if (counts_.empty()) throw std::invalid_argument("DiscreteBelief: no actions");
  if (!(laplace_ >= 0.0) || !std::isfinite(laplace_)) {
    throw std::invalid_argument("DiscreteBelief: laplace must be >= 0");
  }
  for (const auto c : counts_) total_ += c;
}

void DiscreteBelief::probabilities(std::span<double> out) const {
  const double denom =
      static_cast<double>(total_) + laplace_ * static_cast<double>(counts_.size());
  if (!(denom > 0.0)) {
    throw std::logic_error("DiscreteBelief: undefined with zero counts and zero laplace");
  }
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    out[a] = (static_cast<double>(counts_[a]) + laplace_) / denom;
  }
}

ActionDistribution DiscreteBelief::probabilities() const {
  std::vector<double> p(counts_.size());
  probabilities(p);
  return DistributionBuilder::adopt(std::move(p));
}

void DiscreteBelief::record(std::size_t action) {
  if (action >= counts_.size()) throw std::out_of_range("DiscreteBelief: action out of range");
  ++counts_[action];
  ++total_;
}

DiscreteBelief discrete_belief_update(const DiscreteBelief& b, std::size_t action) {
  DiscreteBelief next = b;
  next.record(action);
  return next;
}

GaussianBelief GaussianBelief::prior(std::size_t dim, double mean, double variance,
                                     double variance_floor) {
  if (!(variance > 0.0)) throw std::invalid_argument("GaussianBelief: variance must be positive");
  GaussianBelief b;
  b.mean.assign(dim, mean);
  b.variance.assign(dim, std::max(variance, variance_floor));
  b.variance_floor = variance_floor;
  return b;
}

GaussianBelief gaussian_belief_update(const GaussianBelief& b, std::span<const double> obs_mean,
                                      std::span<const double> obs_var) {
  if (obs_mean.size() != b.dim() || obs_var.size() != b.dim()) {
    throw std::invalid_argument("gaussian_belief_update: dimension mismatch");
  }
  GaussianBelief post = b;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    if (!(obs_var[i] > 0.0)) {
      throw std::invalid_argument("gaussian_belief_update: observation variance must be positive");
    }
    const double vp = b.variance[i];
    const double vo = obs_var[i];
    post.mean[i] = (vp * obs_mean[i] + vo * b.mean[i]) / (vp + vo);
    post.variance[i] = std::max((vp * vo) / (vp + vo), b.variance_floor);
  }
  ++post.obs_count;
  return post;
}

ActionDistribution fuse_discrete(const ActionDistribution& z, const ActionDistribution& p,
                                 double beta) {
  if (z.size() != p.size()) throw std::invalid_argument("fuse_discrete: dimension mismatch");
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("fuse_discrete: beta must lie in [0, 1]");
  }
  std::vector<double> out(z.size());
  kernels::lerp(z.probs(), p.probs(), beta, out);
  return DistributionBuilder::adopt(std::move(out));
}

GaussianParams fuse_gaussian(const GaussianParams& policy, const GaussianBelief& category,
                             double beta) {
  const std::size_t d = policy.mean.size();
  if (policy.variance.size() != d || category.dim() != d || category.variance.size() != d) {
    throw std::invalid_argument("fuse_gaussian: dimension mismatch");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("fuse_gaussian: beta must lie in [0, 1]");
  }
  GaussianParams out{std::vector<double>(d), std::vector<double>(d)};
  kernels::lerp(policy.mean, category.mean, beta, out.mean);
  kernels::lerp(policy.variance, category.variance, beta, out.variance);
  return out;
}

double gaussian_log_density(std::span<const double> a, std::span<const double> mean,
                            std::span<const double> variance, double variance_floor) {
  if (a.size() != mean.size() || a.size() != variance.size()) {
    throw std::invalid_argument("gaussian_log_density: dimension mismatch");
  }
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(variance[i] >= variance_floor)) {
      throw std::invalid_argument("gaussian_log_density: variance below floor");
    }
    const double d = a[i] - mean[i];
    total += d * d / variance[i] + std::log(variance[i]) + kLog2Pi;
  }
  return -0.5 * total;
}

BetaSchedule BetaSchedule::constant(double beta) {
  return {BetaKind::constant, beta, beta, 0.0};
}

BetaSchedule BetaSchedule::linear_ramp(double beta0, double beta_star, double rate) {
  return {BetaKind::linear_ramp, beta0, beta_star, rate};
}

BetaSchedule BetaSchedule::exponential_decay(double beta0, double beta_star, double rate) {
  return {BetaKind::exponential_decay, beta0, beta_star, rate};
}

void BetaSchedule::validate() const {
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(beta0) || !in_unit(beta_star)) {
    throw std::invalid_argument("BetaSchedule: beta0 and beta_star must lie in [0, 1]");
  }
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("BetaSchedule: rate must be finite and >= 0");
  }
}

double beta_at(const BetaSchedule& schedule, std::uint64_t t) {
  const double steps = static_cast<double>(t);
  double beta = schedule.beta_star;
  switch (schedule.kind) {
    case BetaKind::constant:
      beta = schedule.beta_star;
      break;
    case BetaKind::linear_ramp:
      beta = schedule.beta_star >= schedule.beta0
                 ? std::min(schedule.beta_star, schedule.beta0 + schedule.rate * steps)
                 : std::max(schedule.beta_star, schedule.beta0 - schedule.rate * steps);
      break;
    case BetaKind::exponential_decay:
      beta = schedule.beta_star +
             (schedule.beta0 - schedule.beta_star) * std::exp(-schedule.rate * steps);
      break;
  }
  return std::clamp(beta, 0.0, 1.0);
}

}  // namespace cbdrl
