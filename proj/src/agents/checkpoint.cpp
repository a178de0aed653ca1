#include "cbdrl/checkpoint.hpp"

#include <string>
#include <vector>

namespace cbdrl {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw CheckpointError(std::string("checkpoint: missing field '") + key + "'");
  }
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: field '") + key + "' has the wrong type");
  }
}

void check_kind(const json& j, const char* kind) {
  if (get<int>(j, "format_version") != kCheckpointFormatVersion) {
    throw CheckpointError("checkpoint: unsupported format_version");
  }
  if (get<std::string>(j, "agent") != kind) {
    throw CheckpointError(std::string("checkpoint: expected agent '") + kind + "'");
  }
}

json header(const char* kind, std::uint64_t step) {
  return {{"format_version", kCheckpointFormatVersion}, {"agent", kind}, {"step", step}};
}

json table_to_json(const QTable& t) {
  return {{"n_states", t.q.n_states},
          {"n_actions", t.q.n_actions},
          {"q", t.q.values},
          {"visits", t.visits}};
}

void table_from_json(QTable& t, const json& j) {
  const auto n_states = get<std::size_t>(j, "n_states");
  const auto n_actions = get<std::size_t>(j, "n_actions");
  if (n_states != t.q.n_states || n_actions != t.q.n_actions) {
    throw CheckpointError("checkpoint: Q table shape does not match the agent");
  }
  auto q = get<std::vector<double>>(j, "q");
  auto visits = get<std::vector<std::uint64_t>>(j, "visits");
  if (q.size() != n_states * n_actions || visits.size() != q.size()) {
    throw CheckpointError("checkpoint: Q table has the wrong number of entries");
  }
  t.q.values = std::move(q);
  t.visits = std::move(visits);
}

void rng_from_json(Rng& rng, const json& j) {
  try {
    set_rng_state(rng, get<std::string>(j, "rng"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

std::vector<double> sized(const json& j, const char* key, std::size_t n) {
  auto v = get<std::vector<double>>(j, key);
  if (v.size() != n) throw CheckpointError(std::string("checkpoint: field '") + key + "' has the wrong size");
  return v;
}

}  // namespace

json partition_to_json(const Partition& p) {
  json cats = json::array();
  for (const auto& c : p.categories()) {
    json cj = {{"id", c.id},
               {"centroid", c.centroid},
               {"radius", c.radius},
               {"member_count", c.member_count}};
    if (const auto* d = std::get_if<DiscreteBelief>(&c.belief)) {
      cj["counts"] = std::vector<std::uint64_t>(d->counts().begin(), d->counts().end());
      cj["laplace"] = d->laplace();
    } else {
      const auto& g = std::get<GaussianBelief>(c.belief);
      cj["mean"] = g.mean;
      cj["variance"] = g.variance;
      cj["obs_count"] = g.obs_count;
      cj["variance_floor"] = g.variance_floor;
    }
    cats.push_back(std::move(cj));
  }
  json members = json::array();
  for (const auto& [f, id] : p.memberships()) members.push_back({{"f", f}, {"id", id}});
  return {{"mode", p.config().mode == BeliefMode::discrete ? "discrete" : "gaussian"},
          {"epsilon", p.config().epsilon},
          {"overflow", p.overflow_count()},
          {"assignments", p.assignments()},
          {"categories", std::move(cats)},
          {"memberships", std::move(members)}};
}

void partition_from_json(Partition& p, const json& j) {
  const bool discrete = p.config().mode == BeliefMode::discrete;
  if (get<std::string>(j, "mode") != (discrete ? "discrete" : "gaussian")) {
    throw CheckpointError("checkpoint: partition belief mode does not match the agent");
  }
  const auto& cats = field(j, "categories");
  if (!cats.is_array()) throw CheckpointError("checkpoint: categories must be an array");
  std::vector<Category> out;
  for (const auto& cj : cats) {
    Category c;
    c.id = get<std::size_t>(cj, "id");
    c.centroid = get<std::vector<double>>(cj, "centroid");
    c.radius = get<double>(cj, "radius");
    c.member_count = get<std::uint64_t>(cj, "member_count");
    if (discrete) {
      auto counts = get<std::vector<std::uint64_t>>(cj, "counts");
      if (counts.size() != p.config().n_actions) {
        throw CheckpointError("checkpoint: category counts have the wrong size");
      }
      c.belief = DiscreteBelief(std::move(counts), get<double>(cj, "laplace"));
    } else {
      GaussianBelief g;
      g.mean = sized(cj, "mean", p.config().action_dim);
      g.variance = sized(cj, "variance", p.config().action_dim);
      g.obs_count = get<std::uint64_t>(cj, "obs_count");
      g.variance_floor = get<double>(cj, "variance_floor");
      c.belief = std::move(g);
    }
    out.push_back(std::move(c));
  }
  std::map<std::vector<double>, std::size_t> members;
  const auto& mj = field(j, "memberships");
  if (!mj.is_array()) throw CheckpointError("checkpoint: memberships must be an array");
  for (const auto& m : mj) members.emplace(get<std::vector<double>>(m, "f"), get<std::size_t>(m, "id"));
  try {
    p.restore(std::move(out), std::move(members), get<std::uint64_t>(j, "overflow"),
              get<std::uint64_t>(j, "assignments"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

json checkpoint(const CbdqAgent& agent) {
  json j = header("cbdq", agent.steps());
  j["table"] = table_to_json(agent.table());
  j["max_abs_q"] = agent.max_abs_q();
  j["partition"] = partition_to_json(agent.partition());
  j["rng"] = rng_state(agent.rng());
  return j;
}

json checkpoint(const QLearningAgent& agent) {
  json j = header("qlearning", agent.steps());
  j["table"] = table_to_json(agent.table());
  j["max_abs_q"] = agent.max_abs_q();
  j["rng"] = rng_state(agent.rng());
  return j;
}

json checkpoint(const CbdppoAgent& agent) {
  json j = header("cbdppo", agent.steps());
  const auto& w = agent.policy().weights();
  j["policy"] = {{"rows", w.rows}, {"cols", w.cols}, {"weights", w.data}};
  j["value"] = agent.value().weights;
  j["partition"] = partition_to_json(agent.partition());
  j["rng"] = rng_state(agent.rng());
  return j;
}

json checkpoint(const CbdsacAgent& agent) {
  json j = header("cbdsac", agent.steps());
  const auto& w = agent.policy().mean_weights();
  j["policy"] = {{"rows", w.rows},
                 {"cols", w.cols},
                 {"mean_weights", w.data},
                 {"log_std", agent.policy().log_std()}};
  j["critics"] = {agent.critic(0).weights, agent.critic(1).weights};
  j["targets"] = {agent.target_critic(0).weights, agent.target_critic(1).weights};
  j["alpha"] = agent.alpha();
  j["partition"] = partition_to_json(agent.partition());
  j["rng"] = rng_state(agent.rng());
  return j;
}

void restore(CbdqAgent& agent, const json& j) {
  check_kind(j, "cbdq");
  table_from_json(agent.table(), field(j, "table"));
  partition_from_json(agent.partition(), field(j, "partition"));
  rng_from_json(agent.rng(), j);
  agent.restore_progress(get<std::uint64_t>(j, "step"), get<double>(j, "max_abs_q"));
}

void restore(QLearningAgent& agent, const json& j) {
  check_kind(j, "qlearning");
  table_from_json(agent.table(), field(j, "table"));
  rng_from_json(agent.rng(), j);
  agent.restore_progress(get<std::uint64_t>(j, "step"), get<double>(j, "max_abs_q"));
}

void restore(CbdppoAgent& agent, const json& j) {
  check_kind(j, "cbdppo");
  const auto& pj = field(j, "policy");
  auto& w = agent.policy().weights();
  if (get<std::size_t>(pj, "rows") != w.rows || get<std::size_t>(pj, "cols") != w.cols) {
    throw CheckpointError("checkpoint: policy shape does not match the agent");
  }
  w.data = sized(pj, "weights", w.data.size());
  agent.value().weights = sized(j, "value", agent.value().weights.size());
  partition_from_json(agent.partition(), field(j, "partition"));
  rng_from_json(agent.rng(), j);
  agent.restore_progress(get<std::uint64_t>(j, "step"));
}

void restore(CbdsacAgent& agent, const json& j) {
  check_kind(j, "cbdsac");
  const auto& pj = field(j, "policy");
  auto& w = agent.policy().mean_weights();
  if (get<std::size_t>(pj, "rows") != w.rows || get<std::size_t>(pj, "cols") != w.cols) {
    throw CheckpointError("checkpoint: policy shape does not match the agent");
  }
  w.data = sized(pj, "mean_weights", w.data.size());
  agent.policy().log_std() = sized(pj, "log_std", agent.policy().log_std().size());
  const auto critics = get<std::vector<std::vector<double>>>(j, "critics");
  const auto targets = get<std::vector<std::vector<double>>>(j, "targets");
  if (critics.size() != 2 || targets.size() != 2) {
    throw CheckpointError("checkpoint: expected two critics and two targets");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    if (critics[i].size() != agent.critic(i).weights.size() ||
        targets[i].size() != agent.target_critic(i).weights.size()) {
      throw CheckpointError("checkpoint: critic shape does not match the agent");
    }
    agent.critic(i).weights = critics[i];
    agent.target_critic(i).weights = targets[i];
  }
  partition_from_json(agent.partition(), field(j, "partition"));
  rng_from_json(agent.rng(), j);
  agent.restore_progress(get<std::uint64_t>(j, "step"), get<double>(j, "alpha"));
}

QValues checkpoint_q(const json& j) {
  if (get<int>(j, "format_version") != kCheckpointFormatVersion) {
    throw CheckpointError("checkpoint: unsupported format_version");
  }
  const auto kind = get<std::string>(j, "agent");
  if (kind != "cbdq" && kind != "qlearning") {
    throw CheckpointError("checkpoint: agent '" + kind + "' has no Q table");
  }
  const auto& t = field(j, "table");
  QValues q(get<std::size_t>(t, "n_states"), get<std::size_t>(t, "n_actions"));
  q.values = sized(t, "q", q.n_states * q.n_actions);
  return q;
}

json parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint: not valid JSON (") + e.what() + ")");
  }
  if (get<int>(j, "format_version") != kCheckpointFormatVersion) {
    throw CheckpointError("checkpoint: unsupported format_version");
  }
  return j;
}

}  // namespace cbdrl
