#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbdrl/cbdppo.hpp"
#include "cbdrl/cbdsac.hpp"
#include "cbdrl/env.hpp"
#include "cbdrl/q_agents.hpp"

namespace cbdrl {

enum class AgentKind { cbdq, qlearning, cbdppo, cbdsac };

AgentKind parse_agent_kind(const std::string& name);
std::string to_string(AgentKind kind);
bool is_tabular(AgentKind kind);

/// qlearning reads cbdq.base; the other kinds read their own block.
struct AgentConfig {
  AgentKind kind = AgentKind::cbdq;
  CbdqConfig cbdq;
  PpoConfig ppo;
  SacConfig sac;

  void validate() const;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  std::uint64_t env_steps = 0;  // cumulative, at the end of the episode
  double return_ = 0.0;         // undiscounted
  std::size_t length = 0;
  double beta = 0.0;
  double epsilon = 0.0;         // 0 for agents without epsilon-greedy
  std::size_t categories = 0;
  std::optional<double> q_bound_margin;  // R_max / (1 - gamma) - max |Q|, tabular only
  double wall_time = 0.0;                // seconds since the run started
};

struct TrainOptions {
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // 0: only the initial and final checkpoints
  std::function<void(const EpisodeRecord&)> on_episode;
  std::function<void(std::uint64_t step, const nlohmann::json&)> on_checkpoint;
};

struct TrainResult {
  std::vector<EpisodeRecord> episodes;
  nlohmann::json final_checkpoint;
  std::uint64_t steps = 0;
  double max_abs_q = 0.0;               // tabular only
  std::uint64_t dominance_violations = 0;  // cbdq only
};

/// Runs `options.steps` environment steps. Tabular kinds need a discrete env,
/// cbdppo a discrete env and cbdsac a continuous one. An initial checkpoint is
/// emitted at step 0 and a final one at the end.
TrainResult train(const AgentConfig& config, EnvHandle& env, const TrainOptions& options);

}  // namespace cbdrl
