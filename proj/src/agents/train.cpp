#include "cbdrl/train.hpp"

#include <chrono>
#include <stdexcept>

#include "cbdrl/checkpoint.hpp"

namespace cbdrl {

AgentKind parse_agent_kind(const std::string& name) {
  if (name == "cbdq") return AgentKind::cbdq;
  if (name == "qlearning") return AgentKind::qlearning;
  if (name == "cbdppo") return AgentKind::cbdppo;
  if (name == "cbdsac") return AgentKind::cbdsac;
  throw std::invalid_argument("unknown agent kind '" + name + "'");
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::cbdq: return "cbdq";
    case AgentKind::qlearning: return "qlearning";
    case AgentKind::cbdppo: return "cbdppo";
    case AgentKind::cbdsac: return "cbdsac";
  }
  return "?";
}

bool is_tabular(AgentKind kind) { return kind == AgentKind::cbdq || kind == AgentKind::qlearning; }

void AgentConfig::validate() const {
  switch (kind) {
    case AgentKind::cbdq: cbdq.validate(); break;
    case AgentKind::qlearning: cbdq.base.validate(); break;
    case AgentKind::cbdppo: ppo.validate(); break;
    case AgentKind::cbdsac: sac.validate(); break;
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Progress {
  double beta = 0.0;
  double epsilon = 0.0;
  std::size_t categories = 0;
  std::optional<double> q_bound_margin;
};

Progress progress(const CbdqAgent& a) {
  const double bound = q_upper_bound(a.config().base.reward_clip, a.config().base.gamma);
  return {a.beta(), a.epsilon(), a.partition().size(), bound - a.max_abs_q()};
}

Progress progress(const QLearningAgent& a) {
  const double bound = q_upper_bound(a.config().reward_clip, a.config().gamma);
  return {0.0, a.epsilon(), 0, bound - a.max_abs_q()};
}

Progress progress(const CbdppoAgent& a) { return {a.beta(), 0.0, a.partition().size(), {}}; }
Progress progress(const CbdsacAgent& a) { return {a.beta(), 0.0, a.partition().size(), {}}; }

template <class Agent, class Env, class StepFn>
TrainResult run(Agent& agent, Env& env, const TrainOptions& options, StepFn step_fn) {
  const auto start = Clock::now();
  TrainResult result;
  if (options.on_checkpoint) options.on_checkpoint(0, checkpoint(agent));

  State s = env.reset();
  double ret = 0.0;
  std::size_t len = 0;
  for (std::uint64_t t = 0; t < options.steps; ++t) {
    EnvStep st = step_fn(s);
    ret += st.reward;
    ++len;
    const std::uint64_t done_steps = t + 1;
    if (options.checkpoint_every > 0 && done_steps % options.checkpoint_every == 0 &&
        done_steps < options.steps && options.on_checkpoint) {
      options.on_checkpoint(done_steps, checkpoint(agent));
    }
    if (st.done()) {
      const Progress p = progress(agent);
      EpisodeRecord rec;
      rec.episode = result.episodes.size();
      rec.env_steps = done_steps;
      rec.return_ = ret;
      rec.length = len;
      rec.beta = p.beta;
      rec.epsilon = p.epsilon;
      rec.categories = p.categories;
      rec.q_bound_margin = p.q_bound_margin;
      rec.wall_time = seconds_since(start);
      if (options.on_episode) options.on_episode(rec);
      result.episodes.push_back(rec);
      s = env.reset();
      ret = 0.0;
      len = 0;
    } else {
      s = std::move(st.next_state);
    }
  }
  result.steps = options.steps;
  result.final_checkpoint = checkpoint(agent);
  if (options.steps > 0 && options.on_checkpoint) {
    options.on_checkpoint(options.steps, result.final_checkpoint);
  }
  return result;
}

DiscreteEnv& discrete_env(EnvHandle& env, AgentKind kind) {
  if (!env.discrete) {
    throw std::invalid_argument("agent '" + to_string(kind) + "' needs a discrete-action environment");
  }
  return *env.discrete;
}

}  // namespace

TrainResult train(const AgentConfig& config, EnvHandle& env, const TrainOptions& options) {
  config.validate();
  switch (config.kind) {
    case AgentKind::cbdq: {
      DiscreteEnv& e = discrete_env(env, config.kind);
      CbdqAgent agent(config.cbdq, e.n_states(), e.n_actions(), options.seed);
      auto result = run(agent, e, options, [&](const State& s) {
        const std::size_t a = agent.act(s);
        EnvStep st = e.step(a);
        agent.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
        return st;
      });
      result.max_abs_q = agent.max_abs_q();
      result.dominance_violations = agent.dominance_violations();
      return result;
    }
    case AgentKind::qlearning: {
      DiscreteEnv& e = discrete_env(env, config.kind);
      QLearningAgent agent(config.cbdq.base, e.n_states(), e.n_actions(), options.seed);
      auto result = run(agent, e, options, [&](const State& s) {
        const std::size_t a = agent.act(s);
        EnvStep st = e.step(a);
        agent.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
        return st;
      });
      result.max_abs_q = agent.max_abs_q();
      return result;
    }
    case AgentKind::cbdppo: {
      DiscreteEnv& e = discrete_env(env, config.kind);
      CbdppoAgent agent(config.ppo, e.n_states(), e.n_actions(), options.seed);
      return run(agent, e, options, [&](const State& s) {
        const std::size_t a = agent.act(s);
        EnvStep st = e.step(a);
        agent.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
        return st;
      });
    }
    case AgentKind::cbdsac: {
      if (!env.continuous) {
        throw std::invalid_argument("agent 'cbdsac' needs a continuous-action environment");
      }
      ContinuousEnv& e = *env.continuous;
      CbdsacAgent agent(config.sac, e.spec(), e.feature_dim(), options.seed);
      return run(agent, e, options, [&](const State& s) {
        const std::vector<double> a = agent.act(s);
        EnvStep st = e.step(a);
        agent.observe(s, a, st.reward, st.next_state, st.terminated, st.truncated);
        return st;
      });
    }
  }
  throw std::logic_error("unreachable agent kind");
}

}  // namespace cbdrl
