#include "cbdrl/cbdppo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "cbdrl/kernels.hpp"

namespace cbdrl {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("agent.gamma must lie in (0, 1)");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("agent.lambda must lie in [0, 1]");
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("agent.clip must lie in (0, 1)");
  if (!(ent_coef >= 0.0)) throw std::invalid_argument("agent.ent_coef must be >= 0");
  if (!(policy_lr > 0.0)) throw std::invalid_argument("agent.policy_lr must be positive");
  if (!(value_lr > 0.0)) throw std::invalid_argument("agent.value_lr must be positive");
  if (horizon == 0) throw std::invalid_argument("agent.horizon must be positive");
  if (epochs == 0) throw std::invalid_argument("agent.epochs must be positive");
  if (minibatch == 0) throw std::invalid_argument("agent.minibatch must be positive");
  beta.validate();
}

namespace {

struct SampleTerms {
  double surrogate = 0.0;
  double entropy = 0.0;
  bool clipped = false;
};

SampleTerms sample_terms(const LinearSoftmaxPolicy& policy, const PpoSample& s, double beta,
                         double clip, std::vector<double>& pi) {
  if (s.belief.size() != policy.n_actions() || s.action >= policy.n_actions()) {
    throw std::invalid_argument("ppo: sample shape does not match the policy");
  }
  if (!std::isfinite(s.advantage)) throw std::invalid_argument("ppo: advantage is NaN or Inf");
  if (!(s.old_prob > 0.0)) throw std::invalid_argument("ppo: old probability must be positive");
  policy.probabilities(s.phi, pi);
  const double b = (1.0 - beta) * pi[s.action] + beta * s.belief[s.action];
  const double ratio = b / s.old_prob;
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  SampleTerms out;
  const double raw = ratio * s.advantage;
  const double cut = clipped * s.advantage;
  out.surrogate = std::min(raw, cut);
  out.clipped = raw > cut;
  for (const double p : pi) {
    if (p > 0.0) out.entropy -= p * std::log(p);
  }
  return out;
}

}  // namespace

double ppo_objective(const LinearSoftmaxPolicy& policy, std::span<const PpoSample> batch,
                     double beta, double clip, double ent_coef) {
  if (batch.empty()) throw std::invalid_argument("ppo: empty batch");
  std::vector<double> pi(policy.n_actions());
  double total = 0.0;
  for (const auto& s : batch) {
    const auto t = sample_terms(policy, s, beta, clip, pi);
    total += t.surrogate + ent_coef * t.entropy;
  }
  return total / static_cast<double>(batch.size());
}

Matrix ppo_objective_gradient(const LinearSoftmaxPolicy& policy,
                              std::span<const PpoSample> batch, double beta, double clip,
                              double ent_coef, double* clip_fraction) {
  if (batch.empty()) throw std::invalid_argument("ppo: empty batch");
  const std::size_t n_actions = policy.n_actions();
  Matrix grad(policy.n_features(), n_actions);
  std::vector<double> pi(n_actions);
  std::vector<double> dz(n_actions);
  std::size_t clipped = 0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const auto t = sample_terms(policy, s, beta, clip, pi);
    std::fill(dz.begin(), dz.end(), 0.0);
    if (t.clipped) {
      ++clipped;
    } else {
      // d pi_a / d z_j = pi_a (delta_aj - pi_j)
      const double scale = s.advantage * (1.0 - beta) / s.old_prob * pi[s.action];
      for (std::size_t j = 0; j < n_actions; ++j) {
        dz[j] = scale * ((j == s.action ? 1.0 : 0.0) - pi[j]);
      }
    }
    if (ent_coef != 0.0) {
      for (std::size_t j = 0; j < n_actions; ++j) {
        if (pi[j] > 0.0) dz[j] -= ent_coef * pi[j] * (std::log(pi[j]) + t.entropy);
      }
    }
    for (std::size_t f = 0; f < s.phi.size(); ++f) {
      if (s.phi[f] == 0.0) continue;
      kernels::axpy(s.phi[f] * inv_n, dz, {grad.data.data() + f * n_actions, n_actions});
    }
  }
  if (clip_fraction != nullptr) {
    *clip_fraction = static_cast<double>(clipped) * inv_n;
  }
  return grad;
}

void generalized_advantages(std::span<const double> rewards, std::span<const double> values,
                            std::span<const double> next_values, std::span<const bool> done,
                            double gamma, double lambda, std::span<double> advantages,
                            std::span<double> returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || done.size() != n ||
      advantages.size() != n || returns.size() != n) {
    throw std::invalid_argument("generalized_advantages: length mismatch");
  }
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_values[i] - values[i];
    gae = delta + (done[i] ? 0.0 : gamma * lambda * gae);
    advantages[i] = gae;
    returns[i] = gae + values[i];
  }
}

namespace {

PartitionConfig ppo_partition(PartitionConfig p, std::size_t n_actions) {
  p.mode = BeliefMode::discrete;
  p.n_actions = n_actions;
  return p;
}

}  // namespace

CbdppoAgent::CbdppoAgent(PpoConfig config, std::size_t n_states, std::size_t n_actions,
                         std::uint64_t seed)
    : config_(std::move(config)),
      n_states_(n_states),
      policy_(n_states + 1, n_actions),
      value_(n_states + 1),
      partition_(ppo_partition(config_.partition, n_actions)),
      rng_(substream(seed, "exploration")) {
  config_.validate();
  config_.partition = partition_.config();
  rollout_.reserve(config_.horizon);
}

std::vector<double> CbdppoAgent::features(const State& s) const {
  return one_hot_with_bias(s.id, n_states_);
}

std::size_t CbdppoAgent::category_of(const State& s) {
  if (s.id == pending_state_) return pending_category_;
  pending_state_ = s.id;
  pending_category_ = partition_.assign(s.features);
  return pending_category_;
}

ActionDistribution CbdppoAgent::blended(const State& s) {
  const auto pi = policy_.distribution(features(s));
  const auto belief = partition_.category(category_of(s)).discrete().probabilities();
  return fuse_discrete(pi, belief, beta());
}

std::size_t CbdppoAgent::act(const State& s) {
  category_of(s);
  std::vector<double> pi(policy_.n_actions());
  policy_.probabilities(features(s), pi);
  double u = uniform01(rng_);
  std::size_t a = pi.size() - 1;
  for (std::size_t i = 0; i + 1 < pi.size(); ++i) {
    u -= pi[i];
    if (u < 0.0) {
      a = i;
      break;
    }
  }
  pending_prob_ = pi[a];
  return a;
}

std::optional<PpoUpdateInfo> CbdppoAgent::observe(const State& s, std::size_t action,
                                                  double reward, const State& next,
                                                  bool terminated, bool truncated) {
  Step step;
  step.phi = features(s);
  step.category = category_of(s);
  step.action = action;
  if (s.id != pending_state_ || !(pending_prob_ > 0.0)) {
    step.old_prob = policy_.distribution(step.phi)[action];
  } else {
    step.old_prob = pending_prob_;
  }
  pending_prob_ = 0.0;
  step.reward = reward;
  step.value = value_(step.phi);
  step.next_value = terminated ? 0.0 : value_(features(next));
  step.done = terminated || truncated;
  partition_.category(step.category).discrete().record(action);
  rollout_.push_back(std::move(step));
  ++t_;
  if (terminated || truncated) pending_state_ = SIZE_MAX;
  if (rollout_.size() < config_.horizon) return std::nullopt;
  auto info = update();
  rollout_.clear();
  return info;
}

PpoUpdateInfo CbdppoAgent::update() {
  const std::size_t n = rollout_.size();
  std::vector<double> rewards(n), values(n), next_values(n), adv(n), ret(n);
  auto done = std::make_unique<bool[]>(n);
  for (std::size_t i = 0; i < n; ++i) {
    rewards[i] = rollout_[i].reward;
    values[i] = rollout_[i].value;
    next_values[i] = rollout_[i].next_value;
    done[i] = rollout_[i].done;
  }
  generalized_advantages(rewards, values, next_values, {done.get(), n}, config_.gamma,
                         config_.lambda, adv, ret);
  if (config_.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (const double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<PpoSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = samples[i];
    s.phi = rollout_[i].phi;
    s.action = rollout_[i].action;
    s.old_prob = rollout_[i].old_prob;
    s.advantage = adv[i];
    s.ret = ret[i];
    s.belief.resize(policy_.n_actions());
    partition_.category(rollout_[i].category).discrete().probabilities(s.belief);
  }

  PpoUpdateInfo info;
  info.beta = beta();
  info.loss = -ppo_objective(policy_, samples, info.beta, config_.clip, 0.0);
  {
    std::vector<double> pi(policy_.n_actions());
    for (const auto& s : samples) {
      policy_.probabilities(s.phi, pi);
      for (const double p : pi) {
        if (p > 0.0) info.entropy -= p * std::log(p);
      }
    }
    info.entropy /= static_cast<double>(n);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<PpoSample> mb;
  double clip_total = 0.0;
  std::size_t batches = 0;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng_, i)]);
    for (std::size_t start = 0; start < n; start += config_.minibatch) {
      const std::size_t end = std::min(n, start + config_.minibatch);
      mb.clear();
      for (std::size_t i = start; i < end; ++i) mb.push_back(samples[order[i]]);
      double frac = 0.0;
      const Matrix g = ppo_objective_gradient(policy_, mb, info.beta, config_.clip,
                                              config_.ent_coef, &frac);
      kernels::axpy(config_.policy_lr, g.data, policy_.weights().data);
      clip_total += frac;
      ++batches;
      // Value regression on the same minibatch.
      std::vector<double> vg(value_.weights.size(), 0.0);
      const double inv = 1.0 / static_cast<double>(mb.size());
      for (const auto& s : mb) {
        const double err = value_(s.phi) - s.ret;
        kernels::axpy(2.0 * err * inv, s.phi, vg);
      }
      kernels::axpy(-config_.value_lr, vg, value_.weights);
    }
  }
  for (const auto& s : samples) {
    const double err = value_(s.phi) - s.ret;
    info.value_loss += err * err;
  }
  info.value_loss /= static_cast<double>(n);
  info.clip_fraction = batches == 0 ? 0.0 : clip_total / static_cast<double>(batches);
  return info;
}

}  // namespace cbdrl
