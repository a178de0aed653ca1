#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "cbdrl/checkpoint.hpp"
#include "cbdrl/convergence.hpp"
#include "cbdrl/train.hpp"
#include "gradcheck.hpp"

using namespace cbdrl;

namespace {

State tabular_state(std::size_t id, std::size_t n) {
  State s;
  s.id = id;
  s.obs = {static_cast<double>(id)};
  s.features = {static_cast<double>(id) / static_cast<double>(n - 1)};
  return s;
}

CbdqConfig reduced_config() {
  CbdqConfig c;
  c.smoothing = SmoothingStrategy::clipped_max(0.0);
  c.beta = BetaSchedule::constant(0.0);
  c.base.epsilon = {1.0, 0.05, 2000};
  return c;
}

}  // namespace

TEST_CASE("schedules") {
  EpsilonSchedule eps{1.0, 0.1, 10};
  CHECK(eps.at(0) == 1.0);
  CHECK(eps.at(5) == doctest::Approx(0.55));
  CHECK(eps.at(10) == doctest::Approx(0.1));
  CHECK(eps.at(1000) == doctest::Approx(0.1));

  TemperatureSchedule temp{AnnealKind::exponential, 1.0, 1e-3, 100};
  CHECK(temp.at(0) == doctest::Approx(1.0));
  CHECK(temp.at(50) == doctest::Approx(std::sqrt(1e-3)));
  CHECK(temp.at(100) == doctest::Approx(1e-3));
  CHECK(temp.at(500) == doctest::Approx(1e-3));

  AlphaSchedule alpha;
  CHECK(alpha.at(1) == 1.0);
  CHECK(alpha.at(4) == 0.25);
  CHECK(alpha.robbins_monro());
  CHECK(AlphaSchedule{AlphaKind::inverse_count, 1.0, 0.7}.robbins_monro());
  CHECK_FALSE(AlphaSchedule{AlphaKind::inverse_count, 1.0, 0.5}.robbins_monro());
  CHECK_FALSE(AlphaSchedule{AlphaKind::constant, 0.1, 1.0}.robbins_monro());

  CHECK_THROWS_AS((EpsilonSchedule{1.5, 0.5, 10}.validate()), std::invalid_argument);
  CHECK_THROWS_AS(parse_anneal_kind("cosine"), std::invalid_argument);
}

TEST_CASE("replay buffer evicts oldest first") {
  ReplayBuffer<int> b(3);
  for (int i = 0; i < 5; ++i) b.push(i);
  CHECK(b.size() == 3);
  CHECK(b[0] == 2);
  CHECK(b[1] == 3);
  CHECK(b[2] == 4);
  CHECK_THROWS_AS(b[3], std::out_of_range);

  Rng r1 = substream(1, "replay"), r2 = substream(1, "replay");
  CHECK(b.sample_indices(r1, 16) == b.sample_indices(r2, 16));
  for (const auto i : b.sample_indices(r1, 64)) CHECK(i < 3);
  CHECK_THROWS_AS(ReplayBuffer<int>(0), std::invalid_argument);
}

TEST_CASE("terminal transitions target the reward") {
  CbdqConfig c;
  c.base.gamma = 0.9;
  c.beta = BetaSchedule::constant(0.5);
  CbdqAgent agent(c, 3, 2, 1);
  agent.table().q.at(2, 0) = 0.7;
  const auto info = agent.observe(tabular_state(1, 3), 1, 0.4, tabular_state(2, 3), true, false);
  CHECK(info.target == 0.4);
  CHECK(agent.table().q.at(1, 1) == 0.4);
}

TEST_CASE("rewards are clipped to the configured bound") {
  CbdqConfig c;
  CbdqAgent agent(c, 2, 2, 1);
  agent.observe(tabular_state(0, 2), 0, 5.0, tabular_state(1, 2), true, false);
  CHECK(agent.table().q.at(0, 0) == 1.0);
}

TEST_CASE("cbdq two-step update on a three-state chain") {
  CbdqConfig c;
  c.base.gamma = 0.9;
  c.smoothing = SmoothingStrategy::softmax(1.0);
  c.beta = BetaSchedule::constant(0.5);
  c.partition.epsilon = 0.25;
  CbdqAgent agent(c, 3, 2, 7);

  agent.observe(tabular_state(1, 3), 1, 1.0, tabular_state(2, 3), true, false);
  CHECK(agent.table().q.at(1, 1) == 1.0);

  agent.observe(tabular_state(0, 3), 1, 0.0, tabular_state(1, 3), false, false);
  // Q(1, .) = (0, 1): softmax gives e / (1 + e) on action 1. State 0's
  // category has seen action 1 once, so with Laplace 1 its belief is (1/3, 2/3).
  const double e = std::exp(1.0);
  const double b1 = 0.5 * e / (1.0 + e) + 0.5 * 2.0 / 3.0;
  const double expected = 0.9 * b1;
  CHECK(agent.table().q.at(0, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(agent.table().q.at(0, 0) == 0.0);
  CHECK(agent.partition().size() == 2);
  CHECK(agent.dominance_violations() == 0);
}

TEST_CASE("cbdq with beta 0 and point-mass smoothing matches q-learning") {
  EnvHandle e1 = make_env("gridworld", {}, 11);
  EnvHandle e2 = make_env("gridworld", {}, 11);
  const CbdqConfig c = reduced_config();
  CbdqAgent cbdq(c, 16, 4, 5);
  QLearningAgent vanilla(c.base, 16, 4, 5);
  State s1 = e1.discrete->reset();
  State s2 = e2.discrete->reset();
  for (int t = 0; t < 3000; ++t) {
    const auto a1 = cbdq.act(s1);
    const auto a2 = vanilla.act(s2);
    REQUIRE(a1 == a2);
    auto st1 = e1.discrete->step(a1);
    auto st2 = e2.discrete->step(a2);
    cbdq.observe(s1, a1, st1.reward, st1.next_state, st1.terminated, st1.truncated);
    vanilla.observe(s2, a2, st2.reward, st2.next_state, st2.terminated, st2.truncated);
    REQUIRE(cbdq.table().q.values == vanilla.table().q.values);
    s1 = st1.done() ? e1.discrete->reset() : st1.next_state;
    s2 = st2.done() ? e2.discrete->reset() : st2.next_state;
  }
}

TEST_CASE("cbdq targets never exceed the hard max backup") {
  EnvHandle env = make_env("gridworld", {{"rows", "5"}, {"cols", "5"}, {"slip", "0.2"}}, 3);
  CbdqConfig c;
  c.beta = BetaSchedule::linear_ramp(0.0, 0.8, 1e-3);
  c.smoothing = SmoothingStrategy::clipped_softmax(2, 0.5);
  TrainOptions o;
  o.steps = 5000;
  o.seed = 9;
  AgentConfig ac;
  ac.cbdq = c;
  const auto r = train(ac, env, o);
  CHECK(r.dominance_violations == 0);
  CHECK(r.max_abs_q <= q_upper_bound(1.0, 0.99) + 1e-9);
}

TEST_CASE("train with zero steps emits only the initial checkpoint") {
  EnvHandle env = make_env("chain", {}, 1);
  AgentConfig ac;
  std::vector<std::uint64_t> at;
  TrainOptions o;
  o.steps = 0;
  o.on_checkpoint = [&](std::uint64_t step, const nlohmann::json&) { at.push_back(step); };
  const auto r = train(ac, env, o);
  CHECK(r.episodes.empty());
  CHECK(at == std::vector<std::uint64_t>{0});
  CHECK(checkpoint_q(r.final_checkpoint).values == std::vector<double>(10, 0.0));
}

TEST_CASE("train is deterministic and records episodes") {
  auto run_once = [] {
    EnvHandle env = make_env("gridworld", {}, 4);
    AgentConfig ac;
    TrainOptions o;
    o.steps = 2000;
    o.seed = 123;
    return train(ac, env, o);
  };
  const auto a = run_once();
  const auto b = run_once();
  REQUIRE(a.episodes.size() == b.episodes.size());
  REQUIRE_FALSE(a.episodes.empty());
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].return_ == b.episodes[i].return_);
    CHECK(a.episodes[i].env_steps > last);
    last = a.episodes[i].env_steps;
    CHECK(a.episodes[i].q_bound_margin.has_value());
    CHECK(*a.episodes[i].q_bound_margin >= 0.0);
  }
  CHECK(a.final_checkpoint == b.final_checkpoint);
}

TEST_CASE("train rejects mismatched environments") {
  EnvHandle env = make_env("reach1d", {}, 1);
  AgentConfig ac;
  CHECK_THROWS_AS(train(ac, env, TrainOptions{}), std::invalid_argument);
  EnvHandle grid = make_env("gridworld", {}, 1);
  ac.kind = AgentKind::cbdsac;
  CHECK_THROWS_AS(train(ac, grid, TrainOptions{}), std::invalid_argument);
}

TEST_CASE("cbdq converges on a five-state chain") {
  const TabularMdp mdp = chain_mdp(5, 0.0, 0.3, 50);
  const auto oracle = value_iteration(mdp, 1e-12);
  CbdqConfig c;
  c.base.gamma = 0.3;
  c.base.epsilon = {1.0, 1.0, 1};
  c.temperature = {AnnealKind::exponential, 1.0, 1e-3, 200};
  c.beta = BetaSchedule::linear_ramp(0.3, 0.0, 0.3 / 200.0);
  CbdqAgent agent(c, 5, 2, 2);
  auto env = make_tabular_env(mdp, 2);
  std::vector<QValues> series;
  State s = env->reset();
  for (int t = 1; t <= 5000; ++t) {
    const auto a = agent.act(s);
    auto st = env->step(a);
    agent.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
    s = st.done() ? env->reset() : st.next_state;
    if (t % 250 == 0) series.push_back(agent.table().q);
  }
  const auto report = convergence_probe(series, oracle.q);
  CHECK(report.delta.back() < 1e-2);
  CHECK(report.decreasing);
}

TEST_CASE("convergence probe") {
  QValues star(2, 2);
  star.values = {0.1, -0.2, 0.3, 0.0};
  QValues shifted = star;
  for (double& v : shifted.values) v += 0.5;
  const std::vector<QValues> same(4, star);
  const auto r0 = convergence_probe(same, star);
  for (const double d : r0.delta) CHECK(d == 0.0);
  CHECK(r0.decreasing);
  const auto r1 = convergence_probe(std::vector<QValues>(3, shifted), star);
  for (const double d : r1.delta) CHECK(d == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r1.trend_slope == 0.0);

  QValues wrong(3, 2);
  CHECK_THROWS_AS(convergence_probe(std::vector<QValues>{wrong}, star), std::invalid_argument);
  CHECK_THROWS_AS(convergence_probe(std::vector<QValues>{}, star), std::invalid_argument);
}

TEST_CASE("ppo generalized advantages") {
  const std::vector<double> r{1.0, 0.0, 2.0};
  const std::vector<double> v{0.5, 0.2, 0.1};
  const std::vector<double> nv{0.2, 0.1, 0.0};
  const bool done[] = {false, false, true};
  std::vector<double> adv(3), ret(3);
  generalized_advantages(r, v, nv, done, 0.9, 0.8, adv, ret);
  const double d2 = 2.0 - 0.1;
  const double d1 = 0.0 + 0.9 * 0.1 - 0.2;
  const double d0 = 1.0 + 0.9 * 0.2 - 0.5;
  CHECK(adv[2] == doctest::Approx(d2));
  CHECK(adv[1] == doctest::Approx(d1 + 0.72 * d2));
  CHECK(adv[0] == doctest::Approx(d0 + 0.72 * (d1 + 0.72 * d2)));
  for (int i = 0; i < 3; ++i) CHECK(ret[i] == doctest::Approx(adv[i] + v[i]));

  const bool cut[] = {true, false, true};
  generalized_advantages(r, v, nv, cut, 0.9, 0.8, adv, ret);
  CHECK(adv[0] == doctest::Approx(d0));
}

TEST_CASE("ppo surrogate at the trust-region center") {
  LinearSoftmaxPolicy policy(3, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& w : policy.weights().data) w = u(rng);
  std::vector<PpoSample> batch;
  double mean_adv = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    PpoSample s;
    s.phi = one_hot_with_bias(i % 2, 2);
    s.action = i % 3 == 0 ? 1 : 0;
    std::vector<double> p(2);
    policy.probabilities(s.phi, p);
    s.old_prob = p[s.action];
    s.advantage = u(rng);
    s.belief = {0.9, 0.1};
    mean_adv += s.advantage / 6.0;
    batch.push_back(std::move(s));
  }
  CHECK(-ppo_objective(policy, batch, 0.0, 0.2, 0.0) == doctest::Approx(-mean_adv).epsilon(1e-14));

  for (auto& s : batch) s.advantage = 0.0;
  const Matrix g = ppo_objective_gradient(policy, batch, 0.3, 0.2, 0.0);
  for (const double x : g.data) CHECK(x == 0.0);
  CHECK_THROWS_AS(ppo_objective(policy, std::vector<PpoSample>{}, 0.0, 0.2, 0.0),
                  std::invalid_argument);
}

TEST_CASE("ppo gradient matches central differences") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = testing::random_ppo_trial(rng);
    CHECK(testing::ppo_gradient_error(t) < 1e-4);
  }
}

TEST_CASE("sac gradient matches central differences") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = testing::random_sac_trial(rng);
    CHECK(testing::sac_gradient_error(t) < 1e-4);
  }
}

TEST_CASE("sac actor gradient vanishes for a zero critic without entropy") {
  std::mt19937_64 rng(5);
  auto t = testing::random_sac_trial(rng);
  for (double& w : t.q1.weights) w = 0.0;
  for (double& w : t.q2.weights) w = 0.0;
  t.alpha = 0.0;
  const auto g = sac_actor_gradient(t.policy, t.q1, t.q2, t.batch, t.noise, t.beta, t.alpha, t.floor);
  for (const double x : g.mean_weights.data) CHECK(x == 0.0);
  for (const double x : g.log_std) CHECK(x == 0.0);
}

TEST_CASE("blended policies stay valid") {
  EnvHandle env = make_env("gridworld", {}, 2);
  PpoConfig pc;
  pc.beta = BetaSchedule::constant(0.4);
  pc.horizon = 64;
  pc.minibatch = 16;
  CbdppoAgent ppo(pc, 16, 4, 3);
  State s = env.discrete->reset();
  for (int t = 0; t < 1000; ++t) {
    const auto b = ppo.blended(s);
    double total = 0.0;
    for (const double p : b.probs()) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const auto a = ppo.act(s);
    auto st = env.discrete->step(a);
    ppo.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
    s = st.done() ? env.discrete->reset() : st.next_state;
  }
}

TEST_CASE("sac runs on reach1d and keeps the variance floor") {
  EnvHandle env = make_env("reach1d", {}, 2);
  SacConfig sc;
  sc.warmup = 100;
  sc.batch = 16;
  sc.partition.memoize = false;
  CbdsacAgent sac(sc, env.continuous->spec(), env.continuous->feature_dim(), 4);
  State s = env.continuous->reset();
  for (int t = 0; t < 600; ++t) {
    const auto b = sac.blended(s);
    for (const double v : b.variance) CHECK(v >= sc.partition.variance_floor);
    const auto a = sac.act(s);
    auto st = env.continuous->step(a);
    sac.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
    s = st.done() ? env.continuous->reset() : st.next_state;
  }
  for (const auto& w : sac.critic(0).weights) CHECK(std::isfinite(w));
}

TEST_CASE("checkpoint round trip resumes identically") {
  EnvHandle e1 = make_env("gridworld", {}, 8);
  EnvHandle e2 = make_env("gridworld", {}, 8);
  CbdqConfig c;
  CbdqAgent a(c, 16, 4, 21);
  State s = e1.discrete->reset();
  e2.discrete->reset();
  int t = 0;
  bool boundary = false;
  while (!(boundary && t >= 500)) {
    const auto act = a.act(s);
    auto st1 = e1.discrete->step(act);
    e2.discrete->step(act);
    a.observe(s, act, st1.reward, st1.next_state, st1.terminated, st1.truncated);
    boundary = st1.done();
    s = boundary ? e1.discrete->reset() : st1.next_state;
    if (boundary) e2.discrete->reset();
    ++t;
  }
  const auto saved = checkpoint(a);
  CbdqAgent b(c, 16, 4, 999);
  restore(b, parse_checkpoint(saved.dump()));
  CHECK(checkpoint(b) == saved);

  State s2 = s;
  for (int k = 0; k < 500; ++k) {
    const auto x = a.act(s);
    const auto y = b.act(s2);
    REQUIRE(x == y);
    auto st1 = e1.discrete->step(x);
    auto st2 = e2.discrete->step(y);
    a.observe(s, x, st1.reward, st1.next_state, st1.terminated, st1.truncated);
    b.observe(s2, y, st2.reward, st2.next_state, st2.terminated, st2.truncated);
    s = st1.done() ? e1.discrete->reset() : st1.next_state;
    s2 = st2.done() ? e2.discrete->reset() : st2.next_state;
  }
  CHECK(a.table().q.values == b.table().q.values);
}

TEST_CASE("checkpoints of every agent restore") {
  EnvHandle grid = make_env("gridworld", {}, 1);
  EnvHandle reach = make_env("reach1d", {}, 1);
  for (const auto kind : {AgentKind::qlearning, AgentKind::cbdppo, AgentKind::cbdsac}) {
    AgentConfig ac;
    ac.kind = kind;
    ac.sac.warmup = 50;
    ac.sac.batch = 8;
    TrainOptions o;
    o.steps = 300;
    o.seed = 3;
    EnvHandle& env = kind == AgentKind::cbdsac ? reach : grid;
    const auto r = train(ac, env, o);
    const auto text = r.final_checkpoint.dump();
    const auto j = parse_checkpoint(text);
    switch (kind) {
      case AgentKind::qlearning: {
        QLearningAgent fresh(ac.cbdq.base, 16, 4, 0);
        restore(fresh, j);
        CHECK(checkpoint(fresh) == j);
        break;
      }
      case AgentKind::cbdppo: {
        CbdppoAgent fresh(ac.ppo, 16, 4, 0);
        restore(fresh, j);
        CHECK(checkpoint(fresh) == j);
        break;
      }
      default: {
        CbdsacAgent fresh(ac.sac, reach.continuous->spec(), 2, 0);
        restore(fresh, j);
        CHECK(checkpoint(fresh) == j);
        break;
      }
    }
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  CHECK_THROWS_AS(parse_checkpoint("{not json"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint("{\"format_version\": 99}"), CheckpointError);
  CbdqAgent a(CbdqConfig{}, 4, 2, 1);
  auto j = checkpoint(a);
  j["table"]["q"] = std::vector<double>{1.0};
  CbdqAgent b(CbdqConfig{}, 4, 2, 1);
  CHECK_THROWS_AS(restore(b, j), CheckpointError);
  j = checkpoint(a);
  j["agent"] = "qlearning";
  CHECK_THROWS_AS(restore(b, j), CheckpointError);
  j = checkpoint(a);
  j.erase("rng");
  CHECK_THROWS_AS(restore(b, j), CheckpointError);
  CbdqAgent other(CbdqConfig{}, 5, 2, 1);
  CHECK_THROWS_AS(restore(other, checkpoint(a)), CheckpointError);
}
