#include "cbdrl/q_agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cbdrl/kernels.hpp"

namespace cbdrl {

double QTable::update(std::size_t s, std::size_t a, double target, const AlphaSchedule& alpha) {
  const std::size_t i = s * q.n_actions + a;
  const double rate = alpha.at(++visits[i]);
  q.values[i] += rate * (target - q.values[i]);
  return q.values[i];
}

double QTable::max_abs() const {
  double m = 0.0;
  for (const double v : q.values) m = std::max(m, std::abs(v));
  return m;
}

void QLearningConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("agent.gamma must lie in (0, 1)");
  alpha.validate();
  epsilon.validate();
  if (!(reward_clip > 0.0) || !std::isfinite(reward_clip)) {
    throw std::invalid_argument("agent.reward_clip must be positive and finite");
  }
  if (std::abs(q_init) > q_upper_bound(reward_clip, gamma)) {
    throw std::invalid_argument("agent.q_init must lie inside the Q bound");
  }
}

void CbdqConfig::validate() const {
  base.validate();
  SmoothingStrategy s = smoothing;
  s.temperature = temperature.start;
  s.validate();
  temperature.validate();
  beta.validate();
  PartitionConfig p = partition;
  p.mode = BeliefMode::discrete;
  if (p.n_actions == 0) p.n_actions = 1;
  p.validate();
  if (replay && (replay_capacity == 0 || replay_batch == 0)) {
    throw std::invalid_argument("agent.replay_capacity and agent.replay_batch must be positive");
  }
}

namespace {

PartitionConfig discrete_partition(PartitionConfig p, std::size_t n_actions) {
  p.mode = BeliefMode::discrete;
  p.n_actions = n_actions;
  return p;
}

}  // namespace

CbdqAgent::CbdqAgent(CbdqConfig config, std::size_t n_states, std::size_t n_actions,
                     std::uint64_t seed)
    : config_(std::move(config)),
      table_(n_states, n_actions, config_.base.q_init),
      partition_(discrete_partition(config_.partition, n_actions)),
      rng_(substream(seed, "exploration")) {
  config_.partition = partition_.config();
  config_.validate();
  max_abs_q_ = std::abs(config_.base.q_init);
  if (config_.replay) replay_.emplace(config_.replay_capacity);
  scratch_.resize(n_actions);
}

std::size_t CbdqAgent::category_of(const State& s) {
  if (s.id == pending_state_) return pending_category_;
  pending_state_ = s.id;
  pending_category_ = partition_.assign(s.features);
  if (config_.audit_interval > 0) {
    recent_features_.push_back(s.features);
    if (recent_features_.size() > config_.audit_interval) recent_features_.pop_front();
  }
  return pending_category_;
}

ActionDistribution CbdqAgent::blended(const State& s) {
  const std::size_t k = category_of(s);
  SmoothingStrategy strategy = config_.smoothing;
  strategy.temperature = temperature();
  const auto q = smooth(strategy, table_.q.row(s.id), episode_rewards_);
  return fuse_discrete(q, partition_.category(k).discrete().probabilities(), beta());
}

std::size_t CbdqAgent::act(const State& s) {
  if (uniform01(rng_) < epsilon()) {
    category_of(s);
    return uniform_index(rng_, table_.q.n_actions);
  }
  const auto b = blended(s);
  if (config_.exploit == ExploitMode::greedy_over_blend) return kernels::argmax(b.probs());
  double u = uniform01(rng_);
  for (std::size_t a = 0; a + 1 < b.size(); ++a) {
    u -= b[a];
    if (u < 0.0) return a;
  }
  return b.size() - 1;
}

double CbdqAgent::target(const QTransition& tr, std::span<const double> reward_history,
                         CbdqStepInfo* info) {
  if (tr.terminated) return tr.reward;
  const auto q_next = table_.q.row(tr.next_state);
  SmoothingStrategy strategy = config_.smoothing;
  strategy.temperature = temperature();
  const auto q_dist = smooth(strategy, q_next, reward_history);
  partition_.category(tr.category).discrete().probabilities(scratch_);
  const double b = beta();
  const auto blend = fuse_discrete(q_dist, DistributionBuilder::adopt(scratch_), b);
  const double y = smoothed_backup(q_next, blend, tr.reward, config_.base.gamma);
  const double bound = tr.reward + config_.base.gamma * kernels::max(q_next);
  if (y > bound + 1e-12) {
    ++dominance_violations_;
    if (info != nullptr) info->dominance_violation = true;
  }
  return y;
}

void CbdqAgent::apply(const QTransition& tr, std::span<const double> reward_history,
                      CbdqStepInfo* info) {
  const double y = target(tr, reward_history, info);
  if (info != nullptr) info->target = y;
  const double v = table_.update(tr.state, tr.action, y, config_.base.alpha);
  max_abs_q_ = std::max(max_abs_q_, std::abs(v));
}

CbdqStepInfo CbdqAgent::observe(const State& s, std::size_t action, double reward,
                                const State& next, bool terminated, bool truncated) {
  if (action >= table_.q.n_actions) throw std::out_of_range("cbdq: action out of range");
  CbdqStepInfo info;
  QTransition tr;
  tr.state = s.id;
  tr.action = action;
  tr.reward = std::clamp(reward, -config_.base.reward_clip, config_.base.reward_clip);
  tr.next_state = next.id;
  tr.terminated = terminated;
  tr.category = category_of(s);
  info.category = tr.category;
  info.beta = beta();
  info.temperature = temperature();

  // The executed action is counted in the category before b_t is formed.
  partition_.category(tr.category).discrete().record(action);
  episode_rewards_.push_back(tr.reward);

  if (replay_) {
    replay_->push(tr);
    for (const std::size_t i : replay_->sample_indices(rng_, config_.replay_batch)) {
      const QTransition sample = (*replay_)[i];
      apply(sample, episode_rewards_, &info);
    }
  } else {
    apply(tr, episode_rewards_, &info);
  }

  ++t_;
  if (terminated || truncated) {
    episode_rewards_.clear();
    pending_state_ = SIZE_MAX;
  }
  if (config_.audit_interval > 0 && t_ % config_.audit_interval == 0) {
    std::vector<std::vector<double>> recent(recent_features_.begin(), recent_features_.end());
    last_audit_ = coherence_audit(partition_, recent, config_.audit_reassign);
    if (config_.audit_reassign && last_audit_->reassigned > 0) pending_state_ = SIZE_MAX;
  }
  return info;
}

QLearningAgent::QLearningAgent(QLearningConfig config, std::size_t n_states,
                               std::size_t n_actions, std::uint64_t seed)
    : config_(std::move(config)),
      table_(n_states, n_actions, config_.q_init),
      rng_(substream(seed, "exploration")) {
  config_.validate();
  max_abs_q_ = std::abs(config_.q_init);
}

std::size_t QLearningAgent::act(const State& s) {
  if (uniform01(rng_) < epsilon()) return uniform_index(rng_, table_.q.n_actions);
  const auto row = table_.q.row(s.id);
  std::size_t best = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[best]) best = a;
  }
  return best;
}

double QLearningAgent::observe(const State& s, std::size_t action, double reward,
                               const State& next, bool terminated, bool /*truncated*/) {
  const double r = std::clamp(reward, -config_.reward_clip, config_.reward_clip);
  double y = r;
  if (!terminated) {
    const auto row = table_.q.row(next.id);
    y = r + config_.gamma * *std::max_element(row.begin(), row.end());
  }
  const double v = table_.update(s.id, action, y, config_.alpha);
  max_abs_q_ = std::max(max_abs_q_, std::abs(v));
  ++t_;
  return y;
}

}  // namespace cbdrl
