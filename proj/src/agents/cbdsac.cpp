#include "cbdrl/cbdsac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cbdrl/kernels.hpp"

namespace cbdrl {

void SacConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("agent.gamma must lie in (0, 1)");
  if (!(actor_lr > 0.0)) throw std::invalid_argument("agent.actor_lr must be positive");
  if (!(critic_lr > 0.0)) throw std::invalid_argument("agent.critic_lr must be positive");
  if (!(polyak > 0.0 && polyak <= 1.0)) throw std::invalid_argument("agent.polyak must lie in (0, 1]");
  if (!(alpha_ent >= 0.0)) throw std::invalid_argument("agent.alpha_ent must be >= 0");
  if (autotune && !(alpha_ent > 0.0)) {
    throw std::invalid_argument("agent.alpha_ent must be positive when autotune is on");
  }
  if (batch == 0) throw std::invalid_argument("agent.batch must be positive");
  if (buffer_capacity < batch) throw std::invalid_argument("agent.buffer_capacity must be >= agent.batch");
  if (!(obs_variance > 0.0)) throw std::invalid_argument("agent.obs_variance must be positive");
  beta.validate();
}

namespace {

constexpr double kHalfLog2PiE = 1.4189385332046727418;  // 0.5 * log(2 pi e)

struct Blend {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<bool> floored;
};

Blend blend(const LinearGaussianPolicy& policy, const SacSample& s, double beta, double floor) {
  const std::size_t d = policy.action_dim();
  if (s.belief_mean.size() != d || s.belief_variance.size() != d) {
    throw std::invalid_argument("sac: belief dimension mismatch");
  }
  Blend b{std::vector<double>(d), policy.variance(), std::vector<bool>(d, false)};
  policy.mean(s.phi, b.mean);
  for (std::size_t i = 0; i < d; ++i) {
    b.mean[i] = (1.0 - beta) * b.mean[i] + beta * s.belief_mean[i];
    b.variance[i] = (1.0 - beta) * b.variance[i] + beta * s.belief_variance[i];
    if (b.variance[i] < floor) {
      b.variance[i] = floor;
      b.floored[i] = true;
    }
  }
  return b;
}

std::vector<double> reparameterize(const Blend& b, std::span<const double> noise) {
  std::vector<double> a(b.mean.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = b.mean[i] + std::sqrt(b.variance[i]) * noise[i];
  return a;
}

const LinearCritic& smaller(const LinearCritic& q1, const LinearCritic& q2,
                            std::span<const double> phi, std::span<const double> a,
                            double* value) {
  const double v1 = q1.value(phi, a);
  const double v2 = q2.value(phi, a);
  *value = std::min(v1, v2);
  return v2 < v1 ? q2 : q1;
}

void check_batch(std::span<const SacSample> batch, std::span<const std::vector<double>> noise) {
  if (batch.empty()) throw std::invalid_argument("sac: empty batch");
  if (noise.size() != batch.size()) throw std::invalid_argument("sac: noise count mismatch");
}

}  // namespace

ActorTerms sac_actor_objective(const LinearGaussianPolicy& policy, const LinearCritic& q1,
                               const LinearCritic& q2, std::span<const SacSample> batch,
                               std::span<const std::vector<double>> noise, double beta,
                               double alpha, double variance_floor) {
  check_batch(batch, noise);
  ActorTerms out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Blend b = blend(policy, batch[i], beta, variance_floor);
    out.floored += static_cast<std::size_t>(std::count(b.floored.begin(), b.floored.end(), true));
    const auto a = reparameterize(b, noise[i]);
    double q = 0.0;
    smaller(q1, q2, batch[i].phi, a, &q);
    out.objective += q - alpha * gaussian_log_density(a, b.mean, b.variance, variance_floor);
  }
  out.objective /= static_cast<double>(batch.size());
  return out;
}

ActorGradient sac_actor_gradient(const LinearGaussianPolicy& policy, const LinearCritic& q1,
                                 const LinearCritic& q2, std::span<const SacSample> batch,
                                 std::span<const std::vector<double>> noise, double beta,
                                 double alpha, double variance_floor) {
  check_batch(batch, noise);
  const std::size_t d = policy.action_dim();
  ActorGradient g{Matrix(policy.n_features(), d), std::vector<double>(d, 0.0)};
  const auto var_pi = policy.variance();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> dq(d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Blend b = blend(policy, batch[i], beta, variance_floor);
    const auto a = reparameterize(b, noise[i]);
    double q = 0.0;
    smaller(q1, q2, batch[i].phi, a, &q).action_gradient(batch[i].phi, a, dq);
    for (std::size_t k = 0; k < d; ++k) {
      // Through the reparameterized action the log-density depends on the
      // blended scale only: d log b / d sigma = -1 / sigma.
      const double dmu = dq[k] * (1.0 - beta);
      for (std::size_t f = 0; f < policy.n_features(); ++f) {
        g.mean_weights(f, k) += inv_n * dmu * batch[i].phi[f];
      }
      if (!b.floored[k]) {
        const double sigma = std::sqrt(b.variance[k]);
        const double dsigma_dlog = (1.0 - beta) * var_pi[k] / sigma;
        g.log_std[k] += inv_n * (dq[k] * noise[i][k] + alpha / sigma) * dsigma_dlog;
      }
    }
  }
  return g;
}

namespace {

PartitionConfig sac_partition(PartitionConfig p, std::size_t action_dim) {
  p.mode = BeliefMode::gaussian;
  p.action_dim = action_dim;
  return p;
}

}  // namespace

CbdsacAgent::CbdsacAgent(SacConfig config, const ContinuousEnvSpec& spec,
                         std::size_t feature_dim, std::uint64_t seed)
    : config_(std::move(config)),
      spec_(spec),
      policy_(feature_dim + 1, spec.action_dim, config_.init_log_std),
      critics_{LinearCritic(feature_dim + 1, spec.action_dim),
               LinearCritic(feature_dim + 1, spec.action_dim)},
      partition_(sac_partition(config_.partition, spec.action_dim)),
      buffer_(config_.buffer_capacity),
      rng_(substream(seed, "exploration")),
      alpha_(config_.alpha_ent) {
  config_.validate();
  spec_.validate();
  config_.partition = partition_.config();
  // Break the symmetry between the twin critics.
  Rng init = substream(seed, "critic_init");
  for (auto& c : critics_) {
    for (double& w : c.weights) w = 0.01 * standard_normal(init);
  }
  targets_[0] = critics_[0];
  targets_[1] = critics_[1];
}

std::size_t CbdsacAgent::category_of(const State& s) {
  if (has_pending_ && s.features == pending_features_) return pending_category_;
  pending_features_ = s.features;
  pending_category_ = partition_.assign(s.features);
  has_pending_ = true;
  return pending_category_;
}

SacSample CbdsacAgent::sample_for(std::span<const double> phi, std::size_t category) const {
  const auto& g = partition_.category(category).gaussian();
  return {std::vector<double>(phi.begin(), phi.end()), g.mean, g.variance};
}

GaussianParams CbdsacAgent::blended(const State& s) {
  const auto phi = with_bias(s.features);
  const auto sample = sample_for(phi, category_of(s));
  const Blend b = blend(policy_, sample, beta(), config_.partition.variance_floor);
  return {b.mean, b.variance};
}

std::vector<double> CbdsacAgent::act(const State& s) {
  const std::size_t d = spec_.action_dim;
  std::vector<double> a(d);
  if (t_ < config_.warmup) {
    category_of(s);
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = spec_.action_low[i] + (spec_.action_high[i] - spec_.action_low[i]) * uniform01(rng_);
    }
    return a;
  }
  const auto b = blended(s);
  for (std::size_t i = 0; i < d; ++i) {
    a[i] = b.mean[i] + std::sqrt(b.variance[i]) * standard_normal(rng_);
  }
  return a;
}

std::optional<SacUpdateInfo> CbdsacAgent::observe(const State& s, std::span<const double> action,
                                                  double reward, const State& next,
                                                  bool terminated, bool truncated) {
  const std::size_t d = spec_.action_dim;
  if (action.size() != d) throw std::invalid_argument("sac: action dimension mismatch");
  SacTransition tr;
  tr.phi = with_bias(s.features);
  tr.category = category_of(s);
  tr.action.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    tr.action[i] = std::clamp(action[i], spec_.action_low[i], spec_.action_high[i]);
  }
  tr.reward = reward;
  tr.terminated = terminated;
  tr.next_phi = with_bias(next.features);

  // Conjugate update of the category belief with the executed action.
  auto& belief = partition_.category(tr.category).gaussian();
  belief = gaussian_belief_update(belief, tr.action, std::vector<double>(d, config_.obs_variance));

  if (terminated || truncated) {
    // The next state of a finished episode is only needed as a target input.
    double dist = 0.0;
    tr.next_category = partition_.nearest(next.features, &dist);
    if (tr.next_category >= partition_.size()) tr.next_category = tr.category;
    has_pending_ = false;
  } else {
    tr.next_category = category_of(next);
  }
  buffer_.push(std::move(tr));
  ++t_;

  if (t_ < config_.warmup || buffer_.size() < config_.batch) return std::nullopt;
  SacUpdateInfo info;
  for (std::size_t u = 0; u < config_.updates_per_step; ++u) info = update();
  return info;
}

SacUpdateInfo CbdsacAgent::update() {
  const std::size_t d = spec_.action_dim;
  const double floor = config_.partition.variance_floor;
  const double b = beta();
  SacUpdateInfo info;

  const auto idx = buffer_.sample_indices(rng_, config_.batch);
  std::vector<const SacTransition*> batch;
  batch.reserve(idx.size());
  for (const auto i : idx) batch.push_back(&buffer_[i]);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  // Critic regression toward the soft target under the blended policy.
  std::vector<double> targets(batch.size());
  std::vector<double> noise(d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tr = *batch[i];
    double y = tr.reward;
    if (!tr.terminated) {
      const Blend nb = blend(policy_, sample_for(tr.next_phi, tr.next_category), b, floor);
      for (double& z : noise) z = standard_normal(rng_);
      const auto a_next = reparameterize(nb, noise);
      const double q = std::min(targets_[0].value(tr.next_phi, a_next),
                                targets_[1].value(tr.next_phi, a_next));
      y += config_.gamma *
           (q - alpha_ * gaussian_log_density(a_next, nb.mean, nb.variance, floor));
    }
    targets[i] = y;
  }
  std::vector<double> psi(critics_[0].weights.size());
  for (auto& critic : critics_) {
    std::vector<double> grad(critic.weights.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      critic.features(batch[i]->phi, batch[i]->action, psi);
      const double err = targets[i] - kernels::dot(critic.weights, psi);
      info.critic_loss += 0.5 * err * err * inv_n;
      kernels::axpy(-2.0 * err * inv_n, psi, grad);
    }
    kernels::axpy(-config_.critic_lr, grad, critic.weights);
  }

  // Actor ascent on the blended entropy-regularized objective.
  std::vector<SacSample> samples;
  std::vector<std::vector<double>> xi(batch.size(), std::vector<double>(d));
  samples.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    samples.push_back(sample_for(batch[i]->phi, batch[i]->category));
    for (double& z : xi[i]) z = standard_normal(rng_);
  }
  const auto terms =
      sac_actor_objective(policy_, critics_[0], critics_[1], samples, xi, b, alpha_, floor);
  info.actor_objective = terms.objective;
  info.floored = terms.floored;
  floored_ += terms.floored;
  const auto g =
      sac_actor_gradient(policy_, critics_[0], critics_[1], samples, xi, b, alpha_, floor);
  kernels::axpy(config_.actor_lr, g.mean_weights.data, policy_.mean_weights().data);
  kernels::axpy(config_.actor_lr, g.log_std, policy_.log_std());
  policy_.clamp_log_std();

  double entropy = 0.0;
  for (const auto& s : samples) {
    const Blend bl = blend(policy_, s, b, floor);
    for (const double v : bl.variance) entropy += kHalfLog2PiE + 0.5 * std::log(v);
  }
  info.entropy = entropy * inv_n;

  if (config_.autotune) {
    // Bracketing search on log(alpha): the step halves whenever the
    // direction flips, down to a floor so alpha can keep tracking.
    const int direction = info.entropy < config_.target_entropy * static_cast<double>(d) ? 1 : -1;
    if (last_direction_ != 0 && direction != last_direction_) {
      alpha_step_ = std::max(alpha_step_ * 0.5, 0.01);
    }
    last_direction_ = direction;
    alpha_ = std::clamp(alpha_ * std::exp(direction * alpha_step_), 1e-4, 10.0);
  }
  info.alpha = alpha_;

  for (std::size_t c = 0; c < 2; ++c) {
    auto& target = targets_[c].weights;
    const auto& online = critics_[c].weights;
    for (std::size_t i = 0; i < target.size(); ++i) {
      target[i] = config_.polyak * online[i] + (1.0 - config_.polyak) * target[i];
    }
  }
  return info;
}

}  // namespace cbdrl
