#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cbdrl/cbdppo.hpp"
#include "cbdrl/cbdsac.hpp"
#include "cbdrl/ccf.hpp"
#include "cbdrl/mdp.hpp"
#include "cbdrl/q_agents.hpp"

namespace cbdrl {

inline constexpr int kCheckpointFormatVersion = 1;

/// Malformed, truncated or mismatched checkpoint content.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json partition_to_json(const Partition& p);
void partition_from_json(Partition& p, const nlohmann::json& j);

nlohmann::json checkpoint(const CbdqAgent& agent);
nlohmann::json checkpoint(const QLearningAgent& agent);
nlohmann::json checkpoint(const CbdppoAgent& agent);
nlohmann::json checkpoint(const CbdsacAgent& agent);

void restore(CbdqAgent& agent, const nlohmann::json& j);
void restore(QLearningAgent& agent, const nlohmann::json& j);
void restore(CbdppoAgent& agent, const nlohmann::json& j);
void restore(CbdsacAgent& agent, const nlohmann::json& j);

/// Q table of a tabular checkpoint; throws CheckpointError otherwise.
QValues checkpoint_q(const nlohmann::json& j);

/// Parses text and checks the format tag.
nlohmann::json parse_checkpoint(const std::string& text);

}  // namespace cbdrl
