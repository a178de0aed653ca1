#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "cbdrl/belief.hpp"
#include "cbdrl/ccf.hpp"
#include "cbdrl/env.hpp"
#include "cbdrl/mdp.hpp"
#include "cbdrl/replay.hpp"
#include "cbdrl/rng.hpp"
#include "cbdrl/schedules.hpp"
#include "cbdrl/smoothing.hpp"

namespace cbdrl {

/// Action values with per-(s, a) visit counts.
struct QTable {
  QValues q;
  std::vector<std::uint64_t> visits;

  QTable() = default;
  QTable(std::size_t n_states, std::size_t n_actions, double init)
      : q(n_states, n_actions, init), visits(n_states * n_actions, 0) {}

  std::uint64_t count(std::size_t s, std::size_t a) const { return visits[s * q.n_actions + a]; }
  /// Q(s, a) += alpha(N) * (target - Q(s, a)) after incrementing N(s, a).
  double update(std::size_t s, std::size_t a, double target, const AlphaSchedule& alpha);
  double max_abs() const;
};

/// Exploitation rule applied with probability 1 - epsilon.
enum class ExploitMode { greedy_over_blend, sample_from_blend };

struct QLearningConfig {
  double gamma = 0.99;
  AlphaSchedule alpha;
  EpsilonSchedule epsilon;
  double reward_clip = 1.0;  // R_max
  double q_init = 0.0;

  void validate() const;
};

struct CbdqConfig {
  QLearningConfig base;
  SmoothingStrategy smoothing = SmoothingStrategy::softmax(1.0);
  /// Drives smoothing.temperature; smoothing.temperature itself is ignored.
  TemperatureSchedule temperature;
  BetaSchedule beta = BetaSchedule::linear_ramp(0.0, 0.3, 1e-4);
  PartitionConfig partition;
  ExploitMode exploit = ExploitMode::greedy_over_blend;
  bool replay = false;
  std::size_t replay_capacity = 10'000;
  std::size_t replay_batch = 32;
  std::size_t audit_interval = 1000;  // 0 disables audits
  bool audit_reassign = false;

  void validate() const;
};

struct QTransition {
  std::size_t state = 0;
  std::size_t category = 0;
  std::size_t action = 0;
  double reward = 0.0;  // clipped
  std::size_t next_state = 0;
  bool terminated = false;
};

struct CbdqStepInfo {
  std::size_t category = 0;
  double beta = 0.0;
  double temperature = 0.0;
  double target = 0.0;
  bool dominance_violation = false;
};

/// Belief-driven tabular Q-learning. The smoothed target blends the smoothed
/// next-state distribution with the action belief of the current state's
/// category.
class CbdqAgent {
 public:
  CbdqAgent(CbdqConfig config, std::size_t n_states, std::size_t n_actions, std::uint64_t seed);

  std::size_t act(const State& s);
  CbdqStepInfo observe(const State& s, std::size_t action, double reward, const State& next,
                       bool terminated, bool truncated);

  /// b_t at `s` without touching counts, for inspection and exploitation.
  ActionDistribution blended(const State& s);

  const CbdqConfig& config() const { return config_; }
  const QTable& table() const { return table_; }
  QTable& table() { return table_; }
  Partition& partition() { return partition_; }
  const Partition& partition() const { return partition_; }
  std::uint64_t steps() const { return t_; }
  double beta() const { return beta_at(config_.beta, t_); }
  double epsilon() const { return config_.base.epsilon.at(t_); }
  double temperature() const { return config_.temperature.at(t_); }
  /// Largest |Q| ever written.
  double max_abs_q() const { return max_abs_q_; }
  std::uint64_t dominance_violations() const { return dominance_violations_; }
  const std::optional<AuditReport>& last_audit() const { return last_audit_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  void restore_progress(std::uint64_t t, double max_abs_q) {
    t_ = t;
    max_abs_q_ = max_abs_q;
  }

 private:
  std::size_t category_of(const State& s);
  double target(const QTransition& tr, std::span<const double> reward_history,
                CbdqStepInfo* info);
  void apply(const QTransition& tr, std::span<const double> reward_history,
             CbdqStepInfo* info);

  CbdqConfig config_;
  QTable table_;
  Partition partition_;
  Rng rng_;
  std::optional<ReplayBuffer<QTransition>> replay_;
  std::uint64_t t_ = 0;
  double max_abs_q_ = 0.0;
  std::uint64_t dominance_violations_ = 0;
  std::vector<double> episode_rewards_;
  std::deque<std::vector<double>> recent_features_;
  std::optional<AuditReport> last_audit_;
  std::size_t pending_state_ = SIZE_MAX;
  std::size_t pending_category_ = 0;
  std::vector<double> scratch_;
};

/// Classical epsilon-greedy Q-learning with the same random-number
/// consumption as CbdqAgent in greedy_over_blend mode.
class QLearningAgent {
 public:
  QLearningAgent(QLearningConfig config, std::size_t n_states, std::size_t n_actions,
                 std::uint64_t seed);

  std::size_t act(const State& s);
  double observe(const State& s, std::size_t action, double reward, const State& next,
                 bool terminated, bool truncated);

  const QLearningConfig& config() const { return config_; }
  const QTable& table() const { return table_; }
  QTable& table() { return table_; }
  std::uint64_t steps() const { return t_; }
  double epsilon() const { return config_.epsilon.at(t_); }
  double max_abs_q() const { return max_abs_q_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  void restore_progress(std::uint64_t t, double max_abs_q) {
    t_ = t;
    max_abs_q_ = max_abs_q;
  }

 private:
  QLearningConfig config_;
  QTable table_;
  Rng rng_;
  std::uint64_t t_ = 0;
  double max_abs_q_ = 0.0;
};

}  // namespace cbdrl
