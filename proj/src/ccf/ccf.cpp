#include "cbdrl/ccf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbdrl/kernels.hpp"

namespace cbdrl {

void PartitionConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("partition: epsilon must be finite and >= 0");
  }
  if (!(delta > 0.0)) throw std::invalid_argument("partition: delta must be positive");
  if (max_categories == 0) throw std::invalid_argument("partition: max_categories must be >= 1");
  if (feature_map != "identity" && feature_map != "weighted") {
    throw std::invalid_argument("partition: unknown feature_map '" + feature_map + "'");
  }
  if (distance != "euclidean" && distance != "manhattan" && distance != "chebyshev") {
    throw std::invalid_argument("partition: unknown distance '" + distance + "'");
  }
  if (mode == BeliefMode::discrete && n_actions == 0) {
    throw std::invalid_argument("partition: discrete beliefs need n_actions > 0");
  }
  if (mode == BeliefMode::gaussian) {
    if (action_dim == 0) throw std::invalid_argument("partition: gaussian beliefs need action_dim > 0");
    if (!(prior_variance > 0.0)) throw std::invalid_argument("partition: prior_variance must be positive");
    if (!(variance_floor > 0.0)) throw std::invalid_argument("partition: variance_floor must be positive");
  }
}

Partition::Partition(PartitionConfig config) : config_(std::move(config)) {
  config_.validate();
}

Category& Partition::category(std::size_t id) {
  if (id >= categories_.size()) throw std::out_of_range("partition: invalid category id");
  return categories_[id];
}

const Category& Partition::category(std::size_t id) const {
  if (id >= categories_.size()) throw std::out_of_range("partition: invalid category id");
  return categories_[id];
}

std::vector<double> Partition::features(std::span<const double> state) const {
  std::vector<double> f(state.begin(), state.end());
  if (config_.feature_map == "weighted") {
    if (config_.feature_weights.size() != f.size()) {
      throw std::invalid_argument("partition: feature_weights size does not match state");
    }
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= config_.feature_weights[i];
  }
  return f;
}

double Partition::distance(std::span<const double> a, std::span<const double> b) const {
  if (a.size() != b.size()) throw std::invalid_argument("partition: feature dimension mismatch");
  if (config_.distance == "euclidean") return std::sqrt(kernels::squared_distance(a, b));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    acc = config_.distance == "manhattan" ? acc + d : std::max(acc, d);
  }
  return acc;
}

std::size_t Partition::nearest(std::span<const double> state, double* dist) const {
  return nearest_feature(features(state), dist);
}

std::size_t Partition::nearest_feature(std::span<const double> f, double* dist) const {
  std::size_t best = categories_.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (const Category& c : categories_) {
    const double d = distance(f, c.centroid);
    if (d < best_d) {
      best_d = d;
      best = c.id;
    }
  }
  if (dist != nullptr) *dist = best_d;
  return best;
}

Category Partition::make_category(std::vector<double> centroid) {
  Category c;
  c.id = categories_.size();
  c.centroid = std::move(centroid);
  c.radius = config_.epsilon;
  if (config_.mode == BeliefMode::discrete) {
    c.belief = DiscreteBelief(config_.n_actions, config_.laplace);
  } else {
    c.belief = GaussianBelief::prior(config_.action_dim, config_.prior_mean,
                                     config_.prior_variance, config_.variance_floor);
  }
  return c;
}

AssignInfo Partition::assign_detailed(std::span<const double> state) {
  for (const double x : state) {
    if (std::isnan(x)) throw std::invalid_argument("partition: NaN state");
  }
  auto f = features(state);
  AssignInfo info;
  if (config_.memoize) {
    if (const auto it = membership_.find(f); it != membership_.end()) {
      info.id = it->second;
      info.distance = distance(f, categories_[info.id].centroid);
      info.repeated = true;
      return info;
    }
  }

  ++assignments_;
  double d = 0.0;
  const std::size_t near = nearest_feature(f, &d);
  if (near < categories_.size() && d <= config_.epsilon) {
    info.id = near;
    info.distance = d;
    update_centroid(near, f);
  } else if (categories_.size() < config_.max_categories) {
    info.id = categories_.size();
    info.created = true;
    categories_.push_back(make_category(f));
    members_.emplace_back();
    categories_.back().member_count = 1;
    if (config_.track_members) members_.back().push_back(f);
  } else {
    info.id = near;
    info.distance = d;
    info.overflow = true;
    ++overflow_count_;
    update_centroid(near, f);
  }
  if (!info.overflow && info.distance > config_.epsilon) ++radius_violations_;
  if (config_.memoize) membership_.emplace(std::move(f), info.id);
  return info;
}

void Partition::update_centroid(std::size_t id, std::span<const double> state) {
  Category& c = category(id);
  if (state.size() != c.centroid.size()) {
    throw std::invalid_argument("partition: feature dimension mismatch");
  }
  ++c.member_count;
  const double n = static_cast<double>(c.member_count);
  for (std::size_t i = 0; i < state.size(); ++i) {
    c.centroid[i] += (state[i] - c.centroid[i]) / n;
  }
  if (config_.track_members) members_[id].emplace_back(state.begin(), state.end());
}

const std::vector<std::vector<double>>& Partition::members(std::size_t id) const {
  if (!config_.track_members) throw std::logic_error("partition: members are not tracked");
  if (id >= members_.size()) throw std::out_of_range("partition: invalid category id");
  return members_[id];
}

std::size_t Partition::reassign(std::span<const double> state) {
  auto f = features(state);
  const auto it = membership_.find(f);
  if (it == membership_.end()) return assign(state);
  Category& old = categories_[it->second];
  if (old.member_count > 1) {
    // Remove the member from the running mean.
    const double n = static_cast<double>(old.member_count);
    for (std::size_t i = 0; i < f.size(); ++i) {
      old.centroid[i] = (old.centroid[i] * n - f[i]) / (n - 1.0);
    }
    --old.member_count;
    if (config_.track_members) {
      auto& list = members_[old.id];
      if (const auto m = std::find(list.begin(), list.end(), f); m != list.end()) list.erase(m);
    }
  }
  membership_.erase(it);
  return assign(state);
}

void Partition::restore(std::vector<Category> categories,
                        std::map<std::vector<double>, std::size_t> memberships,
                        std::uint64_t overflow_count, std::uint64_t assignments) {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].id != i) throw std::invalid_argument("partition: category ids out of order");
  }
  for (const auto& [f, id] : memberships) {
    if (id >= categories.size()) throw std::invalid_argument("partition: membership id out of range");
  }
  categories_ = std::move(categories);
  members_.assign(categories_.size(), {});
  membership_ = std::move(memberships);
  overflow_count_ = overflow_count;
  assignments_ = assignments;
  radius_violations_ = 0;
}

AuditReport coherence_audit(Partition& partition,
                            std::span<const std::vector<double>> recent_states, bool reassign) {
  AuditReport report;
  const double eps = partition.config().epsilon;
  const double delta = partition.config().delta;
  std::map<std::size_t, std::vector<std::vector<double>>> by_category;
  std::vector<std::size_t> drifted;

  for (std::size_t i = 0; i < recent_states.size(); ++i) {
    const auto f = partition.features(recent_states[i]);
    std::size_t id = partition.size();
    if (const auto it = partition.memberships().find(f); it != partition.memberships().end()) {
      id = it->second;
    } else {
      id = partition.nearest(recent_states[i]);
    }
    if (id >= partition.size()) continue;
    ++report.checked;
    if (partition.distance(f, partition.category(id).centroid) > eps) drifted.push_back(i);
    by_category[id].push_back(f);
  }

  for (const auto& [id, feats] : by_category) {
    for (std::size_t i = 0; i < feats.size(); ++i) {
      for (std::size_t j = i + 1; j < feats.size(); ++j) {
        const double dev = std::sqrt(kernels::squared_distance(feats[i], feats[j]));
        report.max_intra_deviation = std::max(report.max_intra_deviation, dev);
        if (dev > delta) ++report.consistency_violations;
      }
    }
  }

  report.drifted = drifted.size();
  report.drift_fraction = report.checked == 0
                              ? 0.0
                              : static_cast<double>(report.drifted) /
                                    static_cast<double>(report.checked);
  if (reassign) {
    for (const std::size_t i : drifted) {
      partition.reassign(recent_states[i]);
      ++report.reassigned;
    }
  }
  return report;
}

}  // namespace cbdrl
