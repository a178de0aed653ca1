#include "cbdrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cbdrl/kernels.hpp"
#include "cbdrl/rng.hpp"

namespace cbdrl {
namespace {

constexpr double kSumTolerance = 1e-9;

std::vector<double> state_values(const TabularMdp& mdp, const QValues& q) {
  std::vector<double> v(mdp.n_states, 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (!mdp.is_terminal(s)) v[s] = kernels::max(q.row(s));
  }
  return v;
}

double sup_diff(const QValues& a, const QValues& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  }
  return m;
}

void backup_into(const TabularMdp& mdp, std::span<const double> v, QValues& out) {
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      out.at(s, a) = mdp.is_terminal(s)
                         ? 0.0
                         : mdp.r(s, a) + mdp.gamma * kernels::dot(mdp.row(s, a), v);
    }
  }
}

}  // namespace

double TabularMdp::max_abs_reward() const {
  double m = 0.0;
  for (std::size_t s = 0; s < n_states; ++s) {
    if (is_terminal(s)) continue;
    for (std::size_t a = 0; a < n_actions; ++a) m = std::max(m, std::abs(r(s, a)));
  }
  return m;
}

void TabularMdp::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("TabularMdp: " + msg); };
  if (n_states == 0 || n_actions == 0) fail("state and action counts must be positive");
  if (transition.size() != n_states * n_actions * n_states) fail("transition tensor has wrong size");
  if (reward.size() != n_states * n_actions) fail("reward table has wrong size");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
  if (initial_dist.size() != n_states) fail("initial distribution has wrong size");
  if (!terminal.empty() && terminal.size() != n_states) fail("terminal mask has wrong size");
  for (const double r : reward) {
    if (!std::isfinite(r)) fail("non-finite reward");
  }
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto p = row(s, a);
      double total = 0.0;
      for (const double x : p) {
        if (!(x >= 0.0)) fail("negative or NaN transition probability");
        total += x;
      }
      if (std::abs(total - 1.0) > kSumTolerance) {
        std::ostringstream os;
        os << "transition row (" << s << ", " << a << ") sums to " << total;
        fail(os.str());
      }
    }
  }
  double mu = 0.0;
  for (const double x : initial_dist) {
    if (!(x >= 0.0)) fail("negative or NaN initial probability");
    mu += x;
  }
  if (std::abs(mu - 1.0) > kSumTolerance) fail("initial distribution does not sum to 1");
}

QValues bellman_optimality_backup(const TabularMdp& mdp, const QValues& q) {
  const auto v = state_values(mdp, q);
  QValues out(mdp.n_states, mdp.n_actions);
  backup_into(mdp, v, out);
  return out;
}

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol,
                                     std::size_t max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  mdp.validate();

  QValues q(mdp.n_states, mdp.n_actions);
  QValues next(mdp.n_states, mdp.n_actions);
  double residual = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    backup_into(mdp, state_values(mdp, q), next);
    const double change = sup_diff(next, q);
    std::swap(q, next);
    // ||Q_{k+1} - T Q_{k+1}|| <= gamma * ||Q_{k+1} - Q_k||
    if (mdp.gamma * change <= tol) {
      residual = sup_diff(bellman_optimality_backup(mdp, q), q);
      if (residual <= tol) {
        ValueIterationResult result;
        result.v = state_values(mdp, q);
        result.q = std::move(q);
        result.iterations = it;
        result.residual = residual;
        return result;
      }
    }
    residual = change;
  }
  std::ostringstream os;
  os << "value_iteration did not reach tol " << tol << " in " << max_iterations
     << " iterations (last residual " << residual << ")";
  throw ConvergenceError(os.str(), residual);
}

double q_upper_bound(double r_max, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("q_upper_bound: gamma must lie in (0, 1)");
  }
  if (!(r_max >= 0.0)) throw std::invalid_argument("q_upper_bound: r_max must be >= 0");
  return r_max / (1.0 - gamma);
}

TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::uint64_t seed, std::size_t successors) {
  if (n_states == 0 || n_actions == 0) {
    throw std::invalid_argument("random_mdp: empty state or action set");
  }
  if (successors == 0 || successors > n_states) successors = n_states;
  Rng rng = substream(seed, "random_mdp");

  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(n_states * n_actions * n_states, 0.0);
  mdp.reward.resize(n_states * n_actions);
  mdp.initial_dist.assign(n_states, 0.0);
  mdp.initial_dist[0] = 1.0;

  std::vector<std::size_t> order(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      // Partial Fisher-Yates picks the successor set.
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < successors; ++i) {
        std::swap(order[i], order[i + uniform_index(rng, n_states - i)]);
      }
      // Flat Dirichlet: normalized unit exponentials.
      std::vector<double> w(successors);
      for (double& x : w) x = -std::log(1.0 - uniform01(rng));
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      double* row = mdp.transition.data() + (s * n_actions + a) * n_states;
      for (std::size_t i = 0; i < successors; ++i) row[order[i]] = w[i] / total;
      mdp.reward[s * n_actions + a] = 2.0 * uniform01(rng) - 1.0;
    }
  }
  mdp.validate();
  return mdp;
}

}  // namespace cbdrl
