#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cbdrl/belief.hpp"
#include "cbdrl/ccf.hpp"
#include "cbdrl/env.hpp"
#include "cbdrl/policies.hpp"
#include "cbdrl/replay.hpp"
#include "cbdrl/rng.hpp"

namespace cbdrl {

struct SacConfig {
  double gamma = 0.99;
  double actor_lr = 0.01;
  double critic_lr = 0.02;
  double polyak = 0.01;  // target <- polyak * online + (1 - polyak) * target
  double alpha_ent = 0.2;
  bool autotune = false;
  /// Per action dimension; the total target is target_entropy * action_dim.
  double target_entropy = -1.0;
  double init_log_std = -0.5;
  std::size_t batch = 64;
  std::size_t buffer_capacity = 100'000;
  std::size_t warmup = 500;  // uniform random actions before learning starts
  std::size_t updates_per_step = 1;
  double obs_variance = 0.25;  // per-transition belief observation variance
  BetaSchedule beta = BetaSchedule::linear_ramp(0.0, 0.3, 1e-4);
  PartitionConfig partition;

  void validate() const;
};

/// Blended Gaussian b_t for one state: the category belief enters as data.
struct SacSample {
  std::vector<double> phi;
  std::vector<double> belief_mean;
  std::vector<double> belief_variance;
};

struct ActorTerms {
  double objective = 0.0;
  std::size_t floored = 0;  // blended variances clamped at the floor
};

/// mean_i [ min(Q1, Q2)(s_i, a_i) - alpha * log b(a_i | s_i) ] with
/// a_i = mu_blend + sigma_blend * noise_i (reparameterized).
ActorTerms sac_actor_objective(const LinearGaussianPolicy& policy, const LinearCritic& q1,
                               const LinearCritic& q2, std::span<const SacSample> batch,
                               std::span<const std::vector<double>> noise, double beta,
                               double alpha, double variance_floor);

struct ActorGradient {
  Matrix mean_weights;
  std::vector<double> log_std;
};

ActorGradient sac_actor_gradient(const LinearGaussianPolicy& policy, const LinearCritic& q1,
                                 const LinearCritic& q2, std::span<const SacSample> batch,
                                 std::span<const std::vector<double>> noise, double beta,
                                 double alpha, double variance_floor);

struct SacTransition {
  std::vector<double> phi;
  std::size_t category = 0;
  std::vector<double> action;  // as executed (clamped to the action box)
  double reward = 0.0;
  std::vector<double> next_phi;
  std::size_t next_category = 0;
  bool terminated = false;
};

struct SacUpdateInfo {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
  std::size_t floored = 0;
};

/// Belief-blended soft actor-critic with a linear-Gaussian actor and twin
/// linear critics.
class CbdsacAgent {
 public:
  CbdsacAgent(SacConfig config, const ContinuousEnvSpec& spec, std::size_t feature_dim,
              std::uint64_t seed);

  std::vector<double> act(const State& s);
  std::optional<SacUpdateInfo> observe(const State& s, std::span<const double> action,
                                       double reward, const State& next, bool terminated,
                                       bool truncated);

  const SacConfig& config() const { return config_; }
  const LinearGaussianPolicy& policy() const { return policy_; }
  LinearGaussianPolicy& policy() { return policy_; }
  const LinearCritic& critic(std::size_t i) const { return critics_[i]; }
  LinearCritic& critic(std::size_t i) { return critics_[i]; }
  const LinearCritic& target_critic(std::size_t i) const { return targets_[i]; }
  LinearCritic& target_critic(std::size_t i) { return targets_[i]; }
  Partition& partition() { return partition_; }
  const Partition& partition() const { return partition_; }
  std::uint64_t steps() const { return t_; }
  double beta() const { return beta_at(config_.beta, t_); }
  double alpha() const { return alpha_; }
  std::uint64_t floored_count() const { return floored_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void restore_progress(std::uint64_t t, double alpha) {
    t_ = t;
    alpha_ = alpha;
  }

  /// (mu_blend, sigma^2_blend) at s.
  GaussianParams blended(const State& s);

 private:
  std::size_t category_of(const State& s);
  SacSample sample_for(std::span<const double> phi, std::size_t category) const;
  SacUpdateInfo update();

  SacConfig config_;
  ContinuousEnvSpec spec_;
  LinearGaussianPolicy policy_;
  LinearCritic critics_[2];
  LinearCritic targets_[2];
  Partition partition_;
  ReplayBuffer<SacTransition> buffer_;
  Rng rng_;
  std::uint64_t t_ = 0;
  double alpha_;
  double alpha_step_ = 0.5;  // log-space step for the autotune bracket
  int last_direction_ = 0;
  std::uint64_t floored_ = 0;
  std::vector<double> pending_features_;
  std::size_t pending_category_ = 0;
  bool has_pending_ = false;
};

}  // namespace cbdrl
