#include "cbdrl/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbdrl {

double sup_norm_distance(const QValues& a, const QValues& b) {
  if (a.n_states != b.n_states || a.n_actions != b.n_actions || a.values.size() != b.values.size()) {
    throw std::invalid_argument("convergence: Q table shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

ConvergenceReport convergence_probe(std::span<const QValues> series, const QValues& oracle,
                                    std::size_t window) {
  if (series.empty()) throw std::invalid_argument("convergence: empty checkpoint series");
  if (window == 0) throw std::invalid_argument("convergence: window must be positive");
  ConvergenceReport r;
  r.delta.reserve(series.size());
  for (const auto& q : series) r.delta.push_back(sup_norm_distance(q, oracle));

  const std::size_t n = std::min(window, r.delta.size());
  r.window = n;
  const double* d = r.delta.data() + (r.delta.size() - n);
  if (n < 2) {
    r.monotone_fraction = 1.0;
    r.decreasing = true;
    return r;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += static_cast<double>(i);
    my += d[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  std::size_t down = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (d[i] - my);
    sxx += dx * dx;
    if (i + 1 < n && d[i + 1] <= d[i]) ++down;
  }
  r.trend_slope = sxy / sxx;
  r.monotone_fraction = static_cast<double>(down) / static_cast<double>(n - 1);
  r.decreasing = r.trend_slope <= 0.0 && d[n - 1] <= d[0];
  return r;
}

}  // namespace cbdrl
