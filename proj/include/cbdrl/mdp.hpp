#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbdrl {

/// Explicit finite MDP with state-action rewards.
///
/// `transition` is stored row-major as [s][a][s'] so that each (s, a) row is a
/// contiguous probability vector. Terminal states end an episode; their
/// action values are zero by convention and their rows are ignored.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;
  std::vector<double> reward;  // [s][a]
  double gamma = 0.99;
  std::vector<double> initial_dist;
  std::size_t horizon = 0;  // 0: episodes end only at terminal states
  std::vector<bool> terminal;

  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {transition.data() + (s * n_actions + a) * n_states, n_states};
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }
  bool is_terminal(std::size_t s) const { return !terminal.empty() && terminal[s]; }

  /// Largest |r(s, a)| over non-terminal states.
  double max_abs_reward() const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

/// Row-major [s][a] table of action values.
struct QValues {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> values;

  QValues() = default;
  QValues(std::size_t states, std::size_t actions, double init = 0.0)
      : n_states(states), n_actions(actions), values(states * actions, init) {}

  std::span<double> row(std::size_t s) {
    return {values.data() + s * n_actions, n_actions};
  }
  std::span<const double> row(std::size_t s) const {
    return {values.data() + s * n_actions, n_actions};
  }
  double& at(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
  double at(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }
};

struct ValueIterationResult {
  QValues q;
  std::vector<double> v;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||Q - T Q||_inf of the returned Q
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// One exact optimal Bellman backup: (T Q)(s, a) = r + gamma * sum P V.
QValues bellman_optimality_backup(const TabularMdp& mdp, const QValues& q);

/// Optimal action values to Bellman residual <= tol. Throws ConvergenceError
/// when the iteration cap is hit first.
ValueIterationResult value_iteration(const TabularMdp& mdp, double tol,
                                     std::size_t max_iterations = 1'000'000);

/// R_max / (1 - gamma): the sup-norm bound on any Q reachable from a bounded
/// initialization with |r| <= R_max.
double q_upper_bound(double r_max, double gamma);

/// Random MDP with `successors` reachable next states per (s, a), Dirichlet
/// transition weights, rewards uniform in [-1, 1], start state 0.
TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::uint64_t seed, std::size_t successors = 0);

}  // namespace cbdrl
