#include "cbdrl/env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cbdrl {
namespace {

constexpr double kStepReward = -0.01;
constexpr double kGoalReward = 1.0;
constexpr double kHazardReward = -1.0;

[[noreturn]] void bad_param(const std::string& env, const std::string& key,
                            const std::string& why) {
  throw std::invalid_argument(env + ": parameter '" + key + "' " + why);
}

/// Typed access to a ParamMap that remembers which keys were read, so that
/// leftovers can be reported as unknown.
class ParamReader {
 public:
  ParamReader(std::string env, const ParamMap& params)
      : env_(std::move(env)), params_(params) {}

  std::size_t count(const std::string& key, std::size_t fallback) {
    const auto* raw = fetch(key);
    if (raw == nullptr) return fallback;
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), value);
    if (ec != std::errc() || ptr != raw->data() + raw->size()) {
      bad_param(env_, key, "must be a non-negative integer, got '" + *raw + "'");
    }
    return value;
  }

  double real(const std::string& key, double fallback) {
    const auto* raw = fetch(key);
    if (raw == nullptr) return fallback;
    try {
      std::size_t used = 0;
      const double value = std::stod(*raw, &used);
      if (used != raw->size() || !std::isfinite(value)) throw std::invalid_argument("");
      return value;
    } catch (const std::exception&) {
      bad_param(env_, key, "must be a finite number, got '" + *raw + "'");
    }
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto* raw = fetch(key);
    return raw == nullptr ? fallback : *raw;
  }

  void finish() const {
    for (const auto& [key, value] : params_) {
      if (!used_.contains(key)) bad_param(env_, key, "is not recognized");
    }
  }

  const std::string& env() const { return env_; }

 private:
  const std::string* fetch(const std::string& key) {
    used_.insert(key);
    const auto it = params_.find(key);
    return it == params_.end() ? nullptr : &it->second;
  }

  std::string env_;
  const ParamMap& params_;
  std::set<std::string> used_;
};

std::vector<Cell> parse_cells(const std::string& env, const std::string& text,
                              std::size_t rows, std::size_t cols) {
  if (text.empty() || text == "none") return {};
  if (text == "default") return default_hazards(rows, cols);
  std::vector<Cell> cells;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    std::size_t r = 0;
    std::size_t c = 0;
    if (colon == std::string::npos ||
        std::from_chars(item.data(), item.data() + colon, r).ec != std::errc() ||
        std::from_chars(item.data() + colon + 1, item.data() + item.size(), c).ec !=
            std::errc()) {
      bad_param(env, "hazards", "expects 'row:col;row:col', got '" + text + "'");
    }
    if (r >= rows || c >= cols) bad_param(env, "hazards", "has a cell outside the grid");
    cells.emplace_back(r, c);
  }
  return cells;
}

struct GridLayout {
  std::size_t rows;
  std::size_t cols;
  Cell start;
  Cell goal;
  std::vector<Cell> hazards;
};

// Actions: 0 up, 1 down, 2 left, 3 right.
Cell move(const GridLayout& g, Cell cell, std::size_t action) {
  auto [r, c] = cell;
  switch (action) {
    case 0: r = r == 0 ? 0 : r - 1; break;
    case 1: r = std::min(r + 1, g.rows - 1); break;
    case 2: c = c == 0 ? 0 : c - 1; break;
    default: c = std::min(c + 1, g.cols - 1); break;
  }
  return {r, c};
}

TabularMdp grid_model(const GridLayout& g, double slip, double gamma,
                      std::size_t horizon) {
  const std::size_t n = g.rows * g.cols;
  const auto id = [&](Cell cell) { return cell.first * g.cols + cell.second; };
  std::vector<bool> hazard(n, false);
  for (const Cell& h : g.hazards) hazard[id(h)] = true;
  if (hazard[id(g.start)] || hazard[id(g.goal)]) {
    throw std::invalid_argument("grid: start and goal cannot be hazards");
  }
  if (g.start == g.goal) throw std::invalid_argument("grid: start equals goal");

  TabularMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = 4;
  mdp.gamma = gamma;
  mdp.horizon = horizon;
  mdp.transition.assign(n * 4 * n, 0.0);
  mdp.reward.assign(n * 4, 0.0);
  mdp.initial_dist.assign(n, 0.0);
  mdp.initial_dist[id(g.start)] = 1.0;
  mdp.terminal.assign(n, false);
  mdp.terminal[id(g.goal)] = true;
  for (std::size_t s = 0; s < n; ++s) {
    if (hazard[s]) mdp.terminal[s] = true;
  }

  const auto landing_reward = [&](std::size_t s) {
    if (s == id(g.goal)) return kGoalReward;
    if (hazard[s]) return kHazardReward;
    return kStepReward;
  };
  for (std::size_t s = 0; s < n; ++s) {
    const Cell cell{s / g.cols, s % g.cols};
    for (std::size_t a = 0; a < 4; ++a) {
      double* row = mdp.transition.data() + (s * 4 + a) * n;
      if (mdp.terminal[s]) {
        row[s] = 1.0;
        continue;
      }
      // Intended move with 1 - slip, each perpendicular move with slip / 2.
      const std::size_t perp0 = a < 2 ? 2 : 0;
      const std::pair<std::size_t, double> outcomes[3] = {
          {a, 1.0 - slip}, {perp0, slip / 2.0}, {perp0 + 1, slip / 2.0}};
      double expected = 0.0;
      for (const auto& [dir, p] : outcomes) {
        if (p == 0.0) continue;
        const std::size_t next = id(move(g, cell, dir));
        row[next] += p;
        expected += p * landing_reward(next);
      }
      mdp.reward[s * 4 + a] = expected;
    }
  }
  mdp.validate();
  return mdp;
}

std::vector<std::vector<double>> grid_obs(std::size_t rows, std::size_t cols) {
  std::vector<std::vector<double>> obs(rows * cols);
  for (std::size_t s = 0; s < rows * cols; ++s) {
    obs[s] = {static_cast<double>(s / cols), static_cast<double>(s % cols)};
  }
  return obs;
}

double unit_interval(double x, double lo, double hi) {
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

void check_probability(const ParamReader& p, const std::string& key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) bad_param(p.env(), key, "must lie in [0, 1]");
}

void check_gamma(const ParamReader& p, double g) {
  if (!(g > 0.0 && g < 1.0)) bad_param(p.env(), "gamma", "must lie in (0, 1)");
}

}  // namespace

void ContinuousEnvSpec::validate() const {
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw std::invalid_argument("ContinuousEnvSpec: bound vectors must match action_dim");
  }
  for (std::size_t i = 0; i < action_dim; ++i) {
    if (!(action_low[i] < action_high[i])) {
      throw std::invalid_argument("ContinuousEnvSpec: action_low must be < action_high");
    }
  }
}

// ---------------------------------------------------------------------------
// TabularEnv

TabularEnv::TabularEnv(std::string name, TabularMdp mdp,
                       std::vector<std::vector<double>> obs_table,
                       std::vector<double> obs_low, std::vector<double> obs_high,
                       std::uint64_t seed)
    : name_(std::move(name)),
      mdp_(std::move(mdp)),
      obs_table_(std::move(obs_table)),
      obs_low_(std::move(obs_low)),
      obs_high_(std::move(obs_high)),
      rng_(substream(seed, "env")) {
  mdp_.validate();
  if (obs_table_.size() != mdp_.n_states) {
    throw std::invalid_argument("TabularEnv: one observation per state required");
  }
}

State TabularEnv::make_state(std::size_t id) const {
  State st;
  st.id = id;
  st.obs = obs_table_[id];
  st.features.resize(st.obs.size());
  for (std::size_t i = 0; i < st.obs.size(); ++i) {
    st.features[i] = obs_high_[i] > obs_low_[i]
                         ? unit_interval(st.obs[i], obs_low_[i], obs_high_[i])
                         : 0.0;
  }
  return st;
}

State TabularEnv::reset() {
  const double u = uniform01(rng_);
  double acc = 0.0;
  current_ = mdp_.n_states - 1;
  for (std::size_t s = 0; s < mdp_.n_states; ++s) {
    acc += mdp_.initial_dist[s];
    if (u < acc) {
      current_ = s;
      break;
    }
  }
  steps_ = 0;
  needs_reset_ = false;
  return make_state(current_);
}

EnvStep TabularEnv::step(std::size_t action) {
  if (needs_reset_) throw std::logic_error(name_ + ": step() before reset()");
  if (action >= mdp_.n_actions) throw std::out_of_range(name_ + ": action out of range");

  const auto row = mdp_.row(current_, action);
  const double reward = mdp_.r(current_, action);
  const double u = uniform01(rng_);
  double acc = 0.0;
  std::size_t next = current_;
  std::size_t last_positive = current_;
  bool found = false;
  for (std::size_t s = 0; s < row.size(); ++s) {
    if (row[s] <= 0.0) continue;
    last_positive = s;
    acc += row[s];
    if (u < acc) {
      next = s;
      found = true;
      break;
    }
  }
  if (!found) next = last_positive;  // rounding slack at the top of the CDF

  current_ = next;
  ++steps_;
  EnvStep out;
  out.next_state = make_state(next);
  out.reward = reward;
  out.terminated = mdp_.is_terminal(next);
  out.truncated = !out.terminated && mdp_.horizon > 0 && steps_ >= mdp_.horizon;
  needs_reset_ = out.done();
  return out;
}

// ---------------------------------------------------------------------------
// CartPole

CartPole::CartPole(std::size_t bins, std::size_t max_steps, std::uint64_t seed)
    : bins_(bins), max_steps_(max_steps), rng_(substream(seed, "env")) {
  if (bins_ == 0) throw std::invalid_argument("cartpole: bins must be positive");
  if (max_steps_ == 0) throw std::invalid_argument("cartpole: max_steps must be positive");
}

std::size_t CartPole::n_states() const {
  return bins_ * bins_ * bins_ * bins_;
}

State CartPole::reset() {
  for (double& x : s_) x = 0.1 * uniform01(rng_) - 0.05;
  steps_ = 0;
  return observe();
}

void CartPole::set_physical_state(const std::array<double, 4>& s) {
  s_ = s;
  steps_ = 0;
}

State CartPole::observe() const {
  static constexpr std::array<double, 4> kLow{-kXLimit, -3.0, -kThetaLimit, -3.5};
  static constexpr std::array<double, 4> kHigh{kXLimit, 3.0, kThetaLimit, 3.5};
  State st;
  st.obs.assign(s_.begin(), s_.end());
  st.features.resize(4);
  std::size_t id = 0;
  for (std::size_t i = 4; i-- > 0;) {
    st.features[i] = unit_interval(s_[i], kLow[i], kHigh[i]);
    const auto bin = std::min(
        bins_ - 1, static_cast<std::size_t>(st.features[i] * static_cast<double>(bins_)));
    id = id * bins_ + bin;
  }
  st.id = id;
  return st;
}

EnvStep CartPole::step(std::size_t action) {
  if (action > 1) throw std::out_of_range("cartpole: action out of range");
  return step_force(action == 1 ? kForce : -kForce);
}

EnvStep CartPole::step_force(double force) {
  constexpr double total_mass = kCartMass + kPoleMass;
  constexpr double pole_moment = kPoleMass * kHalfLength;
  auto& [x, x_dot, theta, theta_dot] = s_;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + pole_moment * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_moment * theta_acc * cos_t / total_mass;

  x += kDt * x_dot;
  x_dot += kDt * x_acc;
  theta += kDt * theta_dot;
  theta_dot += kDt * theta_acc;
  ++steps_;

  EnvStep out;
  out.next_state = observe();
  out.reward = 1.0;
  out.terminated = std::abs(x) > kXLimit || std::abs(theta) > kThetaLimit;
  out.truncated = !out.terminated && steps_ >= max_steps_;
  return out;
}

// ---------------------------------------------------------------------------
// Reach1d

Reach1d::Reach1d(std::size_t max_steps, double step_size, std::uint64_t seed)
    : step_size_(step_size), rng_(substream(seed, "env")) {
  if (max_steps == 0) throw std::invalid_argument("reach1d: max_steps must be positive");
  if (!(step_size > 0.0)) throw std::invalid_argument("reach1d: step_size must be positive");
  spec_.state_dim = 2;
  spec_.action_dim = 1;
  spec_.action_low = {-1.0};
  spec_.action_high = {1.0};
  spec_.max_steps = max_steps;
  spec_.validate();
}

State Reach1d::observe() const {
  State st;
  st.obs = {position_, target_};
  st.features = {unit_interval(position_, -kPositionLimit, kPositionLimit),
                 unit_interval(target_, -1.0, 1.0)};
  return st;
}

State Reach1d::reset() {
  position_ = 2.0 * uniform01(rng_) - 1.0;
  target_ = 2.0 * uniform01(rng_) - 1.0;
  steps_ = 0;
  return observe();
}

void Reach1d::set_physical_state(double position, double target) {
  position_ = position;
  target_ = target;
  steps_ = 0;
}

EnvStep Reach1d::step(std::span<const double> action) {
  if (action.size() != 1) throw std::invalid_argument("reach1d: action must be 1-dimensional");
  if (!std::isfinite(action[0])) throw std::invalid_argument("reach1d: non-finite action");
  const double velocity = std::clamp(action[0], -1.0, 1.0);
  position_ = std::clamp(position_ + step_size_ * velocity, -kPositionLimit, kPositionLimit);
  ++steps_;
  EnvStep out;
  out.next_state = observe();
  out.reward = -std::abs(position_ - target_);
  out.truncated = steps_ >= spec_.max_steps;
  return out;
}

// ---------------------------------------------------------------------------
// Builders

std::vector<Cell> default_hazards(std::size_t rows, std::size_t cols) {
  if (rows < 6 || cols < 6) return {};
  // Two walls, each leaving a gap on opposite sides.
  std::vector<Cell> cells;
  const std::size_t r1 = rows / 4;
  const std::size_t r2 = (5 * rows) / 8;
  for (std::size_t c = 1; c + 3 <= cols; ++c) cells.emplace_back(r1, c);
  for (std::size_t c = 3; c + 1 < cols; ++c) cells.emplace_back(r2, c);
  return cells;
}

TabularMdp gridworld_mdp(std::size_t rows, std::size_t cols,
                         const std::vector<Cell>& hazards, double slip, double gamma,
                         std::size_t horizon) {
  if (rows == 0 || cols == 0 || rows * cols < 2) {
    throw std::invalid_argument("gridworld: grid needs at least two cells");
  }
  return grid_model({rows, cols, {0, 0}, {rows - 1, cols - 1}, hazards}, slip, gamma,
                    horizon);
}

TabularMdp chain_mdp(std::size_t n, double slip, double gamma, std::size_t horizon) {
  if (n < 2) throw std::invalid_argument("chain: needs at least two states");
  TabularMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.horizon = horizon;
  mdp.transition.assign(n * 2 * n, 0.0);
  mdp.reward.assign(n * 2, 0.0);
  mdp.initial_dist.assign(n, 0.0);
  mdp.initial_dist[0] = 1.0;
  mdp.terminal.assign(n, false);
  mdp.terminal[n - 1] = true;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      double* row = mdp.transition.data() + (s * 2 + a) * n;
      if (s == n - 1) {
        row[s] = 1.0;
        continue;
      }
      const std::size_t left = s == 0 ? 0 : s - 1;
      const std::size_t right = s + 1;
      const std::size_t intended = a == 1 ? right : left;
      const std::size_t slipped = a == 1 ? left : right;
      row[intended] += 1.0 - slip;
      row[slipped] += slip;
      mdp.reward[s * 2 + a] = (1.0 - slip) * (intended == n - 1 ? 1.0 : 0.0) +
                              slip * (slipped == n - 1 ? 1.0 : 0.0);
    }
  }
  mdp.validate();
  return mdp;
}

std::unique_ptr<TabularEnv> make_tabular_env(const TabularMdp& mdp, std::uint64_t seed) {
  std::vector<std::vector<double>> obs(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) obs[s] = {static_cast<double>(s)};
  return std::make_unique<TabularEnv>(
      "tabular", mdp, std::move(obs), std::vector<double>{0.0},
      std::vector<double>{static_cast<double>(mdp.n_states > 1 ? mdp.n_states - 1 : 1)},
      seed);
}

EnvHandle make_env(const std::string& name, const ParamMap& params, std::uint64_t seed) {
  ParamReader p(name, params);
  EnvHandle handle;
  if (name == "gridworld" || name == "cliff") {
    const bool cliff = name == "cliff";
    const std::size_t rows = p.count("rows", cliff ? 4 : 4);
    const std::size_t cols = p.count("cols", cliff ? 12 : 4);
    if (rows == 0 || cols == 0) bad_param(name, rows == 0 ? "rows" : "cols", "must be positive");
    if (rows * cols < 2) bad_param(name, "rows", "grid needs at least two cells");
    const double slip = p.real("slip", 0.0);
    check_probability(p, "slip", slip);
    const double gamma = p.real("gamma", 0.99);
    check_gamma(p, gamma);
    const std::size_t horizon = p.count("max_steps", 200);
    GridLayout layout{rows, cols, {0, 0}, {rows - 1, cols - 1}, {}};
    if (cliff) {
      if (cols < 3) bad_param(name, "cols", "must be at least 3");
      layout.start = {rows - 1, 0};
      for (std::size_t c = 1; c + 1 < cols; ++c) layout.hazards.emplace_back(rows - 1, c);
    } else {
      layout.hazards = parse_cells(name, p.text("hazards", "none"), rows, cols);
    }
    p.finish();
    handle.discrete = std::make_unique<TabularEnv>(
        name, grid_model(layout, slip, gamma, horizon), grid_obs(rows, cols),
        std::vector<double>{0.0, 0.0},
        std::vector<double>{static_cast<double>(rows - 1), static_cast<double>(cols - 1)},
        seed);
  } else if (name == "chain") {
    const std::size_t n = p.count("n", 5);
    if (n < 2) bad_param(name, "n", "must be at least 2");
    const double slip = p.real("slip", 0.0);
    check_probability(p, "slip", slip);
    const double gamma = p.real("gamma", 0.99);
    check_gamma(p, gamma);
    const std::size_t horizon = p.count("max_steps", 100);
    p.finish();
    std::vector<std::vector<double>> obs(n);
    for (std::size_t s = 0; s < n; ++s) obs[s] = {static_cast<double>(s)};
    handle.discrete = std::make_unique<TabularEnv>(
        name, chain_mdp(n, slip, gamma, horizon), std::move(obs), std::vector<double>{0.0},
        std::vector<double>{static_cast<double>(n - 1)}, seed);
  } else if (name == "cartpole") {
    const std::size_t bins = p.count("bins", 8);
    if (bins == 0) bad_param(name, "bins", "must be positive");
    const std::size_t max_steps = p.count("max_steps", 500);
    if (max_steps == 0) bad_param(name, "max_steps", "must be positive");
    p.finish();
    handle.discrete = std::make_unique<CartPole>(bins, max_steps, seed);
  } else if (name == "reach1d") {
    const std::size_t max_steps = p.count("max_steps", 100);
    if (max_steps == 0) bad_param(name, "max_steps", "must be positive");
    const double step_size = p.real("step_size", 0.1);
    if (!(step_size > 0.0)) bad_param(name, "step_size", "must be positive");
    p.finish();
    handle.continuous = std::make_unique<Reach1d>(max_steps, step_size, seed);
  } else {
    throw std::invalid_argument("unknown environment '" + name + "'");
  }
  return handle;
}

}  // namespace cbdrl
