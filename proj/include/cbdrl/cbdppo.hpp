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
#include "cbdrl/rng.hpp"

namespace cbdrl {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;  // GAE
  double clip = 0.2;
  double ent_coef = 0.01;
  double policy_lr = 0.1;
  double value_lr = 0.1;
  std::size_t horizon = 128;
  std::size_t epochs = 4;
  std::size_t minibatch = 32;
  bool normalize_advantages = true;
  BetaSchedule beta = BetaSchedule::linear_ramp(0.0, 0.3, 1e-4);
  PartitionConfig partition;

  void validate() const;
};

/// One rollout entry as seen by the surrogate: the category belief is a
/// snapshot taken when the update starts and is treated as data.
struct PpoSample {
  std::vector<double> phi;
  std::size_t action = 0;
  double old_prob = 0.0;  // pi_old(action | s) at collection time
  double advantage = 0.0;
  double ret = 0.0;       // value regression target
  std::vector<double> belief;
};

/// mean over samples of min(r A, clip(r, 1 - clip, 1 + clip) A) + ent_coef * H(pi),
/// with r = ((1 - beta) pi(a|s) + beta P_k(a|s)) / pi_old(a|s).
double ppo_objective(const LinearSoftmaxPolicy& policy, std::span<const PpoSample> batch,
                     double beta, double clip, double ent_coef);

/// Gradient of ppo_objective with respect to the policy weights; beta and
/// P_k are constants. Optionally reports the fraction of clipped samples.
Matrix ppo_objective_gradient(const LinearSoftmaxPolicy& policy,
                              std::span<const PpoSample> batch, double beta, double clip,
                              double ent_coef, double* clip_fraction = nullptr);

/// GAE(lambda) advantages and returns. next_value[t] is V(s_{t+1}) for
/// non-terminal steps and 0 at termination; done[t] cuts the recursion.
void generalized_advantages(std::span<const double> rewards, std::span<const double> values,
                            std::span<const double> next_values, std::span<const bool> done,
                            double gamma, double lambda, std::span<double> advantages,
                            std::span<double> returns);

struct PpoUpdateInfo {
  double loss = 0.0;        // -surrogate before the update
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double beta = 0.0;
};

/// Belief-blended PPO with a linear softmax policy over one-hot state
/// features and a linear value baseline.
class CbdppoAgent {
 public:
  CbdppoAgent(PpoConfig config, std::size_t n_states, std::size_t n_actions, std::uint64_t seed);

  std::size_t act(const State& s);
  /// Returns update diagnostics when the rollout filled up and an update ran.
  std::optional<PpoUpdateInfo> observe(const State& s, std::size_t action, double reward,
                                       const State& next, bool terminated, bool truncated);

  const PpoConfig& config() const { return config_; }
  const LinearSoftmaxPolicy& policy() const { return policy_; }
  LinearSoftmaxPolicy& policy() { return policy_; }
  const LinearValue& value() const { return value_; }
  LinearValue& value() { return value_; }
  Partition& partition() { return partition_; }
  const Partition& partition() const { return partition_; }
  std::uint64_t steps() const { return t_; }
  double beta() const { return beta_at(config_.beta, t_); }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void restore_progress(std::uint64_t t) { t_ = t; }

  /// b_t(. | s) with the current weights and category belief.
  ActionDistribution blended(const State& s);

 private:
  struct Step {
    std::vector<double> phi;
    std::size_t category = 0;
    std::size_t action = 0;
    double old_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    double next_value = 0.0;
    bool done = false;
  };

  std::vector<double> features(const State& s) const;
  std::size_t category_of(const State& s);
  PpoUpdateInfo update();

  PpoConfig config_;
  std::size_t n_states_;
  LinearSoftmaxPolicy policy_;
  LinearValue value_;
  Partition partition_;
  Rng rng_;
  std::vector<Step> rollout_;
  std::uint64_t t_ = 0;
  std::size_t pending_state_ = SIZE_MAX;
  std::size_t pending_category_ = 0;
  double pending_prob_ = 0.0;
};

}  // namespace cbdrl
