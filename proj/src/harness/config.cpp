#include "cbdrl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace cbdrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Typed access that records which keys were consumed.
class Reader {
 public:
  explicit Reader(const FlatConfig& flat) : flat_(flat) {}

  bool has(const std::string& key) const { return flat_.contains(key); }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto* raw = fetch(key);
    const std::string v = raw ? *raw : fallback;
    resolved_[key] = v;
    return v;
  }

  std::string required(const std::string& key) {
    const auto* raw = fetch(key);
    if (!raw || raw->empty()) throw ConfigError(key, "is required");
    resolved_[key] = *raw;
    return *raw;
  }

  double real(const std::string& key, double fallback) {
    const auto* raw = fetch(key);
    double v = fallback;
    if (raw) v = parse_real(key, *raw);
    resolved_[key] = format_number(v);
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const auto* raw = fetch(key);
    std::uint64_t v = fallback;
    if (raw) v = parse_count(key, *raw);
    resolved_[key] = std::to_string(v);
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    const auto* raw = fetch(key);
    bool v = fallback;
    if (raw) {
      if (*raw == "true" || *raw == "1") {
        v = true;
      } else if (*raw == "false" || *raw == "0") {
        v = false;
      } else {
        throw ConfigError(key, "must be true or false, got '" + *raw + "'");
      }
    }
    resolved_[key] = v ? "true" : "false";
    return v;
  }

  std::vector<double> reals(const std::string& key) {
    const auto* raw = fetch(key);
    std::vector<double> out;
    if (raw && !raw->empty()) {
      for (const auto& item : split(*raw, ',')) out.push_back(parse_real(key, item));
    }
    if (raw) resolved_[key] = *raw;
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key, std::vector<std::uint64_t> fallback) {
    const auto* raw = fetch(key);
    if (raw) {
      fallback.clear();
      for (const auto& item : split(*raw, ',')) fallback.push_back(parse_count(key, item));
    }
    std::string joined;
    for (std::size_t i = 0; i < fallback.size(); ++i) {
      joined += (i ? "," : "") + std::to_string(fallback[i]);
    }
    resolved_[key] = joined;
    return fallback;
  }

  template <class F>
  auto parsed(const std::string& key, const std::string& fallback, F parse) {
    const std::string raw = text(key, fallback);
    try {
      return parse(raw);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }

  /// Keys under `prefix` that were not consumed.
  std::vector<std::string> unread(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : flat_) {
      if (k.rfind(prefix, 0) == 0 && !used_.contains(k)) out.push_back(k);
    }
    return out;
  }

  void mark(const std::string& key) { used_.insert(key); }
  const FlatConfig& resolved() const { return resolved_; }
  FlatConfig& resolved() { return resolved_; }

 private:
  const std::string* fetch(const std::string& key) {
    used_.insert(key);
    const auto it = flat_.find(key);
    return it == flat_.end() ? nullptr : &it->second;
  }

  static double parse_real(const std::string& key, const std::string& raw) {
    double v = 0.0;
    const char* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
    if (raw == "inf" || raw == "infinity") return std::numeric_limits<double>::infinity();
    if (ec != std::errc() || ptr != end || std::isnan(v)) {
      throw ConfigError(key, "must be a number, got '" + raw + "'");
    }
    return v;
  }

  static std::uint64_t parse_count(const std::string& key, const std::string& raw) {
    std::uint64_t v = 0;
    const char* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
    if (ec != std::errc() || ptr != end || raw.empty()) {
      throw ConfigError(key, "must be a non-negative integer, got '" + raw + "'");
    }
    return v;
  }

  const FlatConfig& flat_;
  std::set<std::string> used_;
  FlatConfig resolved_;
};

SmoothingKind parse_smoothing_kind(const std::string& s) {
  if (s == "softmax") return SmoothingKind::softmax;
  if (s == "clipped_max") return SmoothingKind::clipped_max;
  if (s == "clipped_softmax") return SmoothingKind::clipped_softmax;
  if (s == "bayesian_softmax") return SmoothingKind::bayesian_softmax;
  throw std::invalid_argument("unknown smoothing kind '" + s + "'");
}

BetaKind parse_beta_kind(const std::string& s) {
  if (s == "constant") return BetaKind::constant;
  if (s == "linear_ramp") return BetaKind::linear_ramp;
  if (s == "exponential_decay") return BetaKind::exponential_decay;
  throw std::invalid_argument("unknown beta schedule '" + s + "'");
}

ExploitMode parse_exploit(const std::string& s) {
  if (s == "greedy_over_blend") return ExploitMode::greedy_over_blend;
  if (s == "sample_from_blend") return ExploitMode::sample_from_blend;
  throw std::invalid_argument("unknown exploit mode '" + s + "'");
}

void read_partition(Reader& r, PartitionConfig& p, bool continuous) {
  p.epsilon = r.real("ccf.epsilon", p.epsilon);
  p.delta = r.real("ccf.delta", p.delta);
  p.max_categories = r.count("ccf.max_categories", p.max_categories);
  p.feature_map = r.text("ccf.feature_map", p.feature_map);
  p.feature_weights = r.reals("ccf.feature_weights");
  p.distance = r.text("ccf.distance", p.distance);
  p.memoize = r.flag("ccf.memoize", !continuous);
  p.laplace = r.real("ccf.laplace", p.laplace);
  p.prior_mean = r.real("ccf.prior_mean", p.prior_mean);
  p.prior_variance = r.real("ccf.prior_variance", p.prior_variance);
  p.variance_floor = r.real("ccf.variance_floor", p.variance_floor);
}

BetaSchedule read_beta(Reader& r) {
  BetaSchedule b;
  b.kind = r.parsed("schedule.beta.kind", "linear_ramp", parse_beta_kind);
  b.beta0 = r.real("schedule.beta.beta0", 0.0);
  b.beta_star = r.real("schedule.beta.beta_star", 0.3);
  b.rate = r.real("schedule.beta.rate", 1e-4);
  return b;
}

/// Runs a component validator and maps its failure onto `key`.
template <class F>
void check(const std::string& key, F f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

FlatConfig parse_flat_config(const std::string& text) {
  FlatConfig out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError(key, "is set more than once");
    }
  }
  return out;
}

FlatConfig flatten_json(const nlohmann::json& j) {
  FlatConfig out;
  if (!j.is_object()) throw ConfigError("<root>", "JSON config must be an object");
  auto scalar = [](const std::string& key, const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return format_number(v.get<double>());
    throw ConfigError(key, "unsupported JSON value");
  };
  std::function<void(const std::string&, const nlohmann::json&)> walk =
      [&](const std::string& prefix, const nlohmann::json& node) {
        for (const auto& [k, v] : node.items()) {
          const std::string key = prefix.empty() ? k : prefix + "." + k;
          if (v.is_object()) {
            walk(key, v);
          } else if (v.is_array()) {
            std::string joined;
            for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + scalar(key, v[i]);
            out[key] = joined;
          } else {
            out[key] = scalar(key, v);
          }
        }
      };
  walk("", j);
  return out;
}

ExperimentConfig build_config(const FlatConfig& flat) {
  Reader r(flat);
  ExperimentConfig c;
  c.name = r.text("name", c.name);
  if (c.name.empty() || c.name.find('/') != std::string::npos) {
    throw ConfigError("name", "must be a non-empty name without '/'");
  }

  c.env = r.required("env.name");
  for (const auto& [k, v] : flat) {
    if (k.rfind("env.", 0) == 0 && k != "env.name") {
      c.env_params[k.substr(4)] = v;
      r.mark(k);
      r.resolved()[k] = v;
    }
  }
  EnvHandle probe;
  try {
    probe = make_env(c.env, c.env_params, 0);
  } catch (const std::invalid_argument& e) {
    const bool unknown = std::string(e.what()).rfind("unknown environment", 0) == 0;
    throw ConfigError(unknown ? "env.name" : "env", e.what());
  }
  double env_gamma = 0.99;
  if (probe.discrete && probe.discrete->tabular()) env_gamma = probe.discrete->tabular()->gamma;

  auto& a = c.agent;
  a.kind = r.parsed("agent.kind", "cbdq", parse_agent_kind);
  const bool continuous = a.kind == AgentKind::cbdsac;
  if (continuous != static_cast<bool>(probe.continuous)) {
    throw ConfigError("agent.kind", "'" + to_string(a.kind) + "' cannot run on env '" + c.env + "'");
  }
  const double gamma = r.real("agent.gamma", env_gamma);

  switch (a.kind) {
    case AgentKind::cbdq:
    case AgentKind::qlearning: {
      auto& q = a.cbdq;
      q.base.gamma = gamma;
      q.base.alpha.kind = r.parsed("agent.alpha.kind", "inverse_count", parse_alpha_kind);
      q.base.alpha.value = r.real("agent.alpha.value", 1.0);
      q.base.alpha.power = r.real("agent.alpha.power", 1.0);
      q.base.reward_clip = r.real("agent.reward_clip", 1.0);
      q.base.q_init = r.real("agent.q_init", 0.0);
      q.base.epsilon.start = r.real("schedule.epsilon.start", 1.0);
      q.base.epsilon.end = r.real("schedule.epsilon.end", 0.01);
      q.base.epsilon.decay_steps = r.count("schedule.epsilon.decay_steps", 10'000);
      check("agent", [&] { q.base.validate(); });
      if (a.kind == AgentKind::qlearning) break;

      q.smoothing.kind = r.parsed("agent.smoothing.kind", "softmax", parse_smoothing_kind);
      q.smoothing.tau = r.real("agent.smoothing.tau", 0.0);
      q.smoothing.top_k = r.count("agent.smoothing.top_k", 1);
      if (q.smoothing.kind == SmoothingKind::bayesian_softmax) {
        q.smoothing.prior = ScalarGaussian{r.real("agent.smoothing.prior_mean", 0.0),
                                           r.real("agent.smoothing.prior_variance", 1.0)};
        q.smoothing.obs_variance = r.real("agent.smoothing.obs_variance", 1.0);
      }
      q.temperature.kind = r.parsed("schedule.temperature.kind", "constant", parse_anneal_kind);
      q.temperature.start = r.real("schedule.temperature.start", 1.0);
      q.temperature.end = r.real("schedule.temperature.end", q.temperature.start);
      q.temperature.decay_steps = r.count("schedule.temperature.decay_steps", 1);
      q.beta = read_beta(r);
      q.exploit = r.parsed("agent.exploit", "greedy_over_blend", parse_exploit);
      q.replay = r.flag("agent.replay", false);
      q.replay_capacity = r.count("agent.replay_capacity", q.replay_capacity);
      q.replay_batch = r.count("agent.replay_batch", q.replay_batch);
      q.audit_interval = r.count("agent.audit_interval", q.audit_interval);
      q.audit_reassign = r.flag("agent.audit_reassign", false);
      read_partition(r, q.partition, false);
      check("schedule.temperature", [&] { q.temperature.validate(); });
      check("schedule.beta", [&] { q.beta.validate(); });
      check("agent.smoothing", [&] {
        SmoothingStrategy s = q.smoothing;
        s.temperature = q.temperature.start;
        s.validate();
      });
      check("ccf", [&] {
        PartitionConfig p = q.partition;
        p.n_actions = probe.discrete->n_actions();
        p.validate();
      });
      break;
    }
    case AgentKind::cbdppo: {
      auto& p = a.ppo;
      p.gamma = gamma;
      p.lambda = r.real("ppo.lambda", p.lambda);
      p.clip = r.real("ppo.clip", p.clip);
      p.ent_coef = r.real("ppo.ent_coef", p.ent_coef);
      p.policy_lr = r.real("ppo.policy_lr", p.policy_lr);
      p.value_lr = r.real("ppo.value_lr", p.value_lr);
      p.horizon = r.count("ppo.horizon", p.horizon);
      p.epochs = r.count("ppo.epochs", p.epochs);
      p.minibatch = r.count("ppo.minibatch", p.minibatch);
      p.normalize_advantages = r.flag("ppo.normalize_advantages", p.normalize_advantages);
      p.beta = read_beta(r);
      read_partition(r, p.partition, false);
      check("schedule.beta", [&] { p.beta.validate(); });
      check("ppo", [&] { p.validate(); });
      break;
    }
    case AgentKind::cbdsac: {
      auto& s = a.sac;
      s.gamma = gamma;
      s.actor_lr = r.real("sac.actor_lr", s.actor_lr);
      s.critic_lr = r.real("sac.critic_lr", s.critic_lr);
      s.polyak = r.real("sac.polyak", s.polyak);
      s.alpha_ent = r.real("sac.alpha", s.alpha_ent);
      s.autotune = r.flag("sac.autotune", s.autotune);
      s.target_entropy = r.real("sac.target_entropy", s.target_entropy);
      s.init_log_std = r.real("sac.init_log_std", s.init_log_std);
      s.batch = r.count("sac.batch", s.batch);
      s.buffer_capacity = r.count("sac.buffer_capacity", s.buffer_capacity);
      s.warmup = r.count("sac.warmup", s.warmup);
      s.updates_per_step = r.count("sac.updates_per_step", s.updates_per_step);
      s.obs_variance = r.real("sac.obs_variance", s.obs_variance);
      s.beta = read_beta(r);
      read_partition(r, s.partition, true);
      check("schedule.beta", [&] { s.beta.validate(); });
      check("sac", [&] { s.validate(); });
      break;
    }
  }

  check("agent", [&] {
    switch (a.kind) {
      case AgentKind::cbdq:
        CbdqAgent(a.cbdq, probe.discrete->n_states(), probe.discrete->n_actions(), 0);
        break;
      case AgentKind::qlearning:
        QLearningAgent(a.cbdq.base, probe.discrete->n_states(), probe.discrete->n_actions(), 0);
        break;
      case AgentKind::cbdppo:
        CbdppoAgent(a.ppo, probe.discrete->n_states(), probe.discrete->n_actions(), 0);
        break;
      case AgentKind::cbdsac:
        CbdsacAgent(a.sac, probe.continuous->spec(), probe.continuous->feature_dim(), 0);
        break;
    }
  });

  c.seeds = r.counts("run.seeds", c.seeds);
  if (c.seeds.empty()) throw ConfigError("run.seeds", "must list at least one seed");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw ConfigError("run.seeds", "must not repeat a seed");
  }
  c.steps = r.count("run.steps", 0);
  if (c.steps == 0) throw ConfigError("run.steps", "must be positive");
  c.checkpoint_every = r.count("run.checkpoint_every", 0);
  c.output_dir = r.text("run.output_dir", "");
  if (r.has("run.threshold")) c.threshold = r.real("run.threshold", 0.0);
  c.threshold_window = r.count("run.threshold_window", c.threshold_window);
  if (c.threshold_window == 0) throw ConfigError("run.threshold_window", "must be positive");
  c.final_window = r.count("run.final_window", c.final_window);
  if (c.final_window == 0) throw ConfigError("run.final_window", "must be positive");
  c.oracle_tolerance = r.real("run.oracle_tolerance", c.oracle_tolerance);
  if (!(c.oracle_tolerance > 0.0)) throw ConfigError("run.oracle_tolerance", "must be positive");
  c.workers = r.count("run.workers", 1);
  if (c.workers == 0) throw ConfigError("run.workers", "must be positive");

  const auto unknown = r.unread("");
  if (!unknown.empty()) throw ConfigError(unknown.front(), "is not a recognized key");
  c.resolved = r.resolved();
  return c;
}

FlatConfig load_flat(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    return flatten_json(j);
  }
  return parse_flat_config(text);
}

ExperimentConfig load_config(const std::string& path) { return build_config(load_flat(path)); }

EnvHandle make_run_env(const ExperimentConfig& config, std::uint64_t seed) {
  Rng stream = substream(seed, "env");
  return make_env(config.env, config.env_params, stream());
}

}  // namespace cbdrl
