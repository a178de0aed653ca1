#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cbdrl/env.hpp"
#include "cbdrl/mdp.hpp"

using namespace cbdrl;

namespace {

TabularMdp single_state(double reward, double gamma) {
  TabularMdp m;
  m.n_states = 1;
  m.n_actions = 1;
  m.transition = {1.0};
  m.reward = {reward};
  m.gamma = gamma;
  m.initial_dist = {1.0};
  return m;
}

// s0 --(a1)--> s1 (absorbing); being in s1 pays 1 per step.
TabularMdp two_state_chain() {
  TabularMdp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.gamma = 0.5;
  m.transition.assign(8, 0.0);
  auto set = [&](std::size_t s, std::size_t a, std::size_t next) {
    m.transition[(s * 2 + a) * 2 + next] = 1.0;
  };
  set(0, 0, 0);
  set(0, 1, 1);
  set(1, 0, 1);
  set(1, 1, 1);
  m.reward = {0.0, 0.0, 1.0, 1.0};
  m.initial_dist = {1.0, 0.0};
  return m;
}

// Finite-horizon backward induction with explicit loops; independent of the
// library's backup and of kernels::dot.
std::vector<double> finite_horizon_q(const TabularMdp& m, int depth) {
  std::vector<double> v(m.n_states, 0.0);
  std::vector<double> q(m.n_states * m.n_actions, 0.0);
  for (int d = 0; d < depth; ++d) {
    for (std::size_t s = 0; s < m.n_states; ++s) {
      for (std::size_t a = 0; a < m.n_actions; ++a) {
        double ev = 0.0;
        for (std::size_t n = 0; n < m.n_states; ++n) {
          ev += m.transition[(s * m.n_actions + a) * m.n_states + n] * v[n];
        }
        q[s * m.n_actions + a] = m.reward[s * m.n_actions + a] + m.gamma * ev;
      }
    }
    for (std::size_t s = 0; s < m.n_states; ++s) {
      double best = q[s * m.n_actions];
      for (std::size_t a = 1; a < m.n_actions; ++a) best = std::max(best, q[s * m.n_actions + a]);
      v[s] = m.is_terminal(s) ? 0.0 : best;
    }
  }
  return q;
}

}  // namespace

TEST_CASE("value_iteration: single state geometric series") {
  const auto result = value_iteration(single_state(1.0, 0.9), 1e-10);
  CHECK(result.q.at(0, 0) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(result.q.at(0, 0) == doctest::Approx(q_upper_bound(1.0, 0.9)).epsilon(1e-9));
  CHECK(result.v[0] == result.q.at(0, 0));
}

TEST_CASE("value_iteration: two-state chain matches depth-60 rollout") {
  const auto m = two_state_chain();
  const auto result = value_iteration(m, 1e-12);
  const auto oracle = finite_horizon_q(m, 60);  // truncation 0.5^60 < 1e-9
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(std::abs(result.q.values[i] - oracle[i]) < 1e-9);
  }
  // Closed form for the frozen values.
  CHECK(result.q.at(0, 1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(result.q.at(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(result.q.at(1, 0) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("value_iteration: zero reward gives zero values") {
  auto m = random_mdp(6, 3, 0.95, 11);
  std::fill(m.reward.begin(), m.reward.end(), 0.0);
  const auto result = value_iteration(m, 1e-12);
  for (const double q : result.q.values) CHECK(q == 0.0);
}

TEST_CASE("value_iteration output is a fixed point within tol") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_mdp(8, 3, 0.9, seed, 3);
    const double tol = 1e-8;
    const auto result = value_iteration(m, tol);
    const auto backed = bellman_optimality_backup(m, result.q);
    for (std::size_t i = 0; i < backed.values.size(); ++i) {
      CHECK(std::abs(backed.values[i] - result.q.values[i]) <= tol);
    }
    CHECK(result.residual <= tol);
    for (std::size_t s = 0; s < m.n_states; ++s) {
      const auto row = result.q.row(s);
      CHECK(result.v[s] == *std::max_element(row.begin(), row.end()));
    }
  }
}

TEST_CASE("value_iteration errors") {
  CHECK_THROWS_AS(value_iteration(single_state(1.0, 0.9), 0.0), std::invalid_argument);
  try {
    value_iteration(single_state(1.0, 0.999), 1e-12, 5);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual() > 1e-12);
  }
}

TEST_CASE("TabularMdp validation rejects broken models") {
  auto m = two_state_chain();
  m.transition[0] = 0.9;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = two_state_chain();
  m.initial_dist = {0.5, 0.4};
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = two_state_chain();
  m.gamma = 1.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("q_upper_bound") {
  CHECK(q_upper_bound(1.0, 0.99) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(q_upper_bound(0.0, 0.5) == 0.0);
  CHECK(q_upper_bound(10.0, 0.9) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK_THROWS_AS(q_upper_bound(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(q_upper_bound(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(q_upper_bound(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("generated MDPs have stochastic rows") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_mdp(10, 3, 0.9, seed, 2);
    CHECK_NOTHROW(m.validate());
    for (std::size_t s = 0; s < 10; ++s) {
      for (std::size_t a = 0; a < 3; ++a) {
        const auto row = m.row(s, a);
        CHECK(std::count_if(row.begin(), row.end(), [](double p) { return p > 0.0; }) <= 2);
      }
    }
  }
  for (const auto* name : {"gridworld", "cliff", "chain"}) {
    auto env = make_env(name, {}, 0);
    REQUIRE(env.discrete);
    REQUIRE(env.discrete->tabular() != nullptr);
    CHECK_NOTHROW(env.discrete->tabular()->validate());
  }
}

TEST_CASE("make_env: chain starts in state 0") {
  auto env = make_env("chain", {{"n", "5"}}, 0);
  REQUIRE(env.discrete);
  CHECK(env.discrete->reset().id == 0);
  CHECK(env.discrete->n_states() == 5);
}

TEST_CASE("make_env: gridworld trajectories are reproducible per seed") {
  const std::vector<std::size_t> script{3, 3, 1, 1, 2, 0, 3, 1, 1, 3, 3, 1};
  auto run = [&](std::uint64_t seed) {
    auto env = make_env("gridworld", {{"rows", "4"}, {"cols", "4"}, {"slip", "0.2"}}, seed);
    std::vector<std::size_t> ids{env.discrete->reset().id};
    for (const auto a : script) {
      const auto step = env.discrete->step(a);
      ids.push_back(step.next_state.id);
      if (step.done()) ids.push_back(env.discrete->reset().id);
    }
    return ids;
  };
  CHECK(run(123) == run(123));
}

TEST_CASE("gridworld rewards and termination") {
  auto env = make_env("gridworld", {{"rows", "2"}, {"cols", "2"}}, 0);
  auto& g = *env.discrete;
  g.reset();
  auto step = g.step(3);  // right: (0,1)
  CHECK(step.reward == doctest::Approx(-0.01));
  CHECK_FALSE(step.done());
  step = g.step(1);  // down: goal (1,1)
  CHECK(step.reward == 1.0);
  CHECK(step.terminated);
  CHECK_FALSE(step.truncated);
  CHECK_THROWS_AS(g.step(0), std::logic_error);

  auto cliff = make_env("cliff", {}, 0);
  cliff.discrete->reset();
  step = cliff.discrete->step(3);  // into the cliff
  CHECK(step.reward == -1.0);
  CHECK(step.terminated);
}

TEST_CASE("gridworld truncates at the step cap") {
  auto env = make_env("gridworld", {{"rows", "4"}, {"cols", "4"}, {"max_steps", "3"}}, 0);
  env.discrete->reset();
  EnvStep step;
  for (int i = 0; i < 3; ++i) step = env.discrete->step(0);
  CHECK(step.truncated);
  CHECK_FALSE(step.terminated);
}

TEST_CASE("cartpole: one zero-force Euler step") {
  CartPole cp(8, 500, 0);
  cp.set_physical_state({0.0, 0.0, 0.05, 0.0});
  const auto step = cp.step_force(0.0);
  const auto& s = cp.physical_state();
  // Hand computation: theta_acc = g sin(th) / (l (4/3 - m_p cos^2(th) / M)).
  CHECK(s[2] == 0.05);
  CHECK(s[3] == doctest::Approx(0.015766155756657397).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(-0.0007157478257904168).epsilon(1e-13));
  CHECK(s[0] == 0.0);
  CHECK(step.reward == 1.0);
  CHECK_FALSE(step.done());
  cp.step_force(0.0);
  CHECK(cp.physical_state()[2] == doctest::Approx(0.05 + 0.02 * 0.015766155756657397).epsilon(1e-14));
}

TEST_CASE("cartpole terminates past 12 degrees and is deterministic per seed") {
  CartPole cp(8, 500, 0);
  cp.set_physical_state({0.0, 0.0, 0.2, 1.0});
  bool terminated = false;
  for (int i = 0; i < 20 && !terminated; ++i) terminated = cp.step(1).terminated;
  CHECK(terminated);

  auto run = [](std::uint64_t seed) {
    CartPole env(8, 500, seed);
    std::vector<double> trace;
    auto st = env.reset();
    for (int i = 0; i < 50; ++i) {
      const auto step = env.step(static_cast<std::size_t>(i % 2));
      trace.insert(trace.end(), step.next_state.obs.begin(), step.next_state.obs.end());
      if (step.done()) env.reset();
    }
    return trace;
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}

TEST_CASE("cartpole tiles cover bins^4 ids") {
  auto env = make_env("cartpole", {{"bins", "3"}}, 1);
  CHECK(env.discrete->n_states() == 81);
  const auto st = env.discrete->reset();
  CHECK(st.id < 81);
  CHECK(st.features.size() == 4);
}

TEST_CASE("reach1d dynamics") {
  auto env = make_env("reach1d", {}, 3);
  REQUIRE(env.continuous);
  CHECK(env.continuous->spec().action_dim == 1);
  auto& r = dynamic_cast<Reach1d&>(*env.continuous);
  r.set_physical_state(0.0, 0.5);
  const double a = 1.0;
  auto step = r.step(std::span<const double>(&a, 1));
  CHECK(step.next_state.obs[0] == doctest::Approx(0.1));
  CHECK(step.reward == doctest::Approx(-0.4));
  const double big = 7.0;
  step = r.step(std::span<const double>(&big, 1));  // clamped to 1
  CHECK(step.next_state.obs[0] == doctest::Approx(0.2));
}

TEST_CASE("make_env errors") {
  CHECK_THROWS_AS(make_env("atari", {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("gridworld", {{"rows", "0"}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("gridworld", {{"colour", "red"}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("chain", {{"n", "abc"}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("chain", {{"slip", "1.5"}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_env("gridworld", {{"hazards", "9:9"}}, 0), std::invalid_argument);
  ContinuousEnvSpec spec{1, 1, {1.0}, {1.0}, 10};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
