#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbdrl/mdp.hpp"
#include "cbdrl/rng.hpp"

namespace cbdrl {

/// Flat string parameters, as delivered by the harness config (env.* keys
/// with the prefix stripped).
using ParamMap = std::map<std::string, std::string>;

struct State {
  std::size_t id = 0;             // tabular state id, or tile index
  std::vector<double> obs;        // raw observation
  std::vector<double> features;   // obs min-max normalized into [0, 1]
};

struct EnvStep {
  State next_state;
  double reward = 0.0;
  bool terminated = false;  // reached a terminal condition of the task
  bool truncated = false;   // hit the step cap without terminating
  bool done() const { return terminated || truncated; }
};

struct ContinuousEnvSpec {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t max_steps = 0;

  void validate() const;
};

class DiscreteEnv {
 public:
  virtual ~DiscreteEnv() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t n_actions() const = 0;
  /// Number of distinct state ids (tiles for discretized envs).
  virtual std::size_t n_states() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t max_steps() const = 0;
  virtual State reset() = 0;
  virtual EnvStep step(std::size_t action) = 0;
  /// Exact model, for environments that have one.
  virtual const TabularMdp* tabular() const { return nullptr; }
};

class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;

  virtual std::string_view name() const = 0;
  virtual const ContinuousEnvSpec& spec() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual State reset() = 0;
  virtual EnvStep step(std::span<const double> action) = 0;
};

/// Samples episodes from a TabularMdp. Features come from a per-state table.
class TabularEnv final : public DiscreteEnv {
 public:
  TabularEnv(std::string name, TabularMdp mdp,
             std::vector<std::vector<double>> obs_table,
             std::vector<double> obs_low, std::vector<double> obs_high,
             std::uint64_t seed);

  std::string_view name() const override { return name_; }
  std::size_t n_actions() const override { return mdp_.n_actions; }
  std::size_t n_states() const override { return mdp_.n_states; }
  std::size_t feature_dim() const override { return obs_low_.size(); }
  std::size_t max_steps() const override { return mdp_.horizon; }
  State reset() override;
  EnvStep step(std::size_t action) override;
  const TabularMdp* tabular() const override { return &mdp_; }

  State make_state(std::size_t id) const;

 private:
  std::string name_;
  TabularMdp mdp_;
  std::vector<std::vector<double>> obs_table_;
  std::vector<double> obs_low_;
  std::vector<double> obs_high_;
  Rng rng_;
  std::size_t current_ = 0;
  std::size_t steps_ = 0;
  bool needs_reset_ = true;
};

/// Frictionless cart-pole, explicit Euler at dt = 0.02, actions {push left,
/// push right} with 10 N. State (x, x_dot, theta, theta_dot). Discretized into
/// bins^4 uniform tiles for tabular agents.
class CartPole final : public DiscreteEnv {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kXLimit = 2.4;
  static constexpr double kThetaLimit = 12.0 * 3.14159265358979323846 / 180.0;

  CartPole(std::size_t bins, std::size_t max_steps, std::uint64_t seed);

  std::string_view name() const override { return "cartpole"; }
  std::size_t n_actions() const override { return 2; }
  std::size_t n_states() const override;
  std::size_t feature_dim() const override { return 4; }
  std::size_t max_steps() const override { return max_steps_; }
  State reset() override;
  EnvStep step(std::size_t action) override;

  /// Applies an arbitrary horizontal force for one Euler step.
  EnvStep step_force(double force);
  void set_physical_state(const std::array<double, 4>& s);
  const std::array<double, 4>& physical_state() const { return s_; }
  State observe() const;

 private:
  std::size_t bins_;
  std::size_t max_steps_;
  Rng rng_;
  std::array<double, 4> s_{};
  std::size_t steps_ = 0;
};

/// One-dimensional reaching: state (position, target), action = velocity in
/// [-1, 1], position += step_size * action, reward -|position - target|.
class Reach1d final : public ContinuousEnv {
 public:
  static constexpr double kPositionLimit = 2.0;

  Reach1d(std::size_t max_steps, double step_size, std::uint64_t seed);

  std::string_view name() const override { return "reach1d"; }
  const ContinuousEnvSpec& spec() const override { return spec_; }
  std::size_t feature_dim() const override { return 2; }
  State reset() override;
  EnvStep step(std::span<const double> action) override;

  void set_physical_state(double position, double target);

 private:
  State observe() const;

  ContinuousEnvSpec spec_;
  double step_size_;
  Rng rng_;
  double position_ = 0.0;
  double target_ = 0.0;
  std::size_t steps_ = 0;
};

/// Exactly one of the two members is set.
struct EnvHandle {
  std::unique_ptr<DiscreteEnv> discrete;
  std::unique_ptr<ContinuousEnv> continuous;
};

/// name in {gridworld, cliff, chain, cartpole, reach1d}. Unknown names and
/// unknown or invalid params throw std::invalid_argument.
EnvHandle make_env(const std::string& name, const ParamMap& params,
                   std::uint64_t seed);

// Model builders behind the tabular environments.

using Cell = std::pair<std::size_t, std::size_t>;

/// Start (0, 0), goal (rows-1, cols-1); -0.01 per step, +1 at the goal, -1 in
/// a hazard; goal and hazards are terminal. `slip` moves perpendicular.
TabularMdp gridworld_mdp(std::size_t rows, std::size_t cols,
                         const std::vector<Cell>& hazards, double slip,
                         double gamma, std::size_t horizon);

/// Default hazard layout for an 8x8 grid: two walls with gaps.
std::vector<Cell> default_hazards(std::size_t rows, std::size_t cols);

/// Actions {left, right}; start 0; +1 and terminal on reaching n-1.
TabularMdp chain_mdp(std::size_t n, double slip, double gamma, std::size_t horizon);

/// Wraps a TabularMdp whose states carry no geometry; feature = id / (n-1).
std::unique_ptr<TabularEnv> make_tabular_env(const TabularMdp& mdp, std::uint64_t seed);

}  // namespace cbdrl
