#pragma once

// Conceptual category formation: an online partition of the state space by
// leader clustering. A state joins the nearest category whose centroid lies
// within the semantic radius epsilon, otherwise it founds a new category.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cbdrl/belief.hpp"

namespace cbdrl {

enum class BeliefMode { discrete, gaussian };

struct PartitionConfig {
  double epsilon = 0.25;
  double delta = std::numeric_limits<double>::infinity();
  std::size_t max_categories = 256;
  std::string feature_map = "identity";  // identity | weighted
  std::vector<double> feature_weights;   // used by "weighted"
  std::string distance = "euclidean";    // euclidean | manhattan | chebyshev
  /// A state seen before keeps its category (exclusivity across time).
  bool memoize = true;
  /// Keep every member's feature vector (test and audit use).
  bool track_members = false;

  BeliefMode mode = BeliefMode::discrete;
  std::size_t n_actions = 0;     // discrete mode
  double laplace = 1.0;          // discrete mode
  std::size_t action_dim = 0;    // gaussian mode
  double prior_mean = 0.0;       // gaussian mode
  double prior_variance = 1.0;   // gaussian mode
  double variance_floor = GaussianBelief::kDefaultVarianceFloor;

  void validate() const;
};

struct Category {
  std::size_t id = 0;
  std::vector<double> centroid;
  double radius = 0.0;
  std::uint64_t member_count = 0;
  std::variant<GaussianBelief, DiscreteBelief> belief;

  DiscreteBelief& discrete() { return std::get<DiscreteBelief>(belief); }
  const DiscreteBelief& discrete() const { return std::get<DiscreteBelief>(belief); }
  GaussianBelief& gaussian() { return std::get<GaussianBelief>(belief); }
  const GaussianBelief& gaussian() const { return std::get<GaussianBelief>(belief); }
};

struct AssignInfo {
  std::size_t id = 0;
  double distance = 0.0;   // to the centroid before any update
  bool created = false;
  bool repeated = false;   // memoized state, no centroid update
  bool overflow = false;   // cap reached, nearest category used beyond epsilon
};

class Partition {
 public:
  explicit Partition(PartitionConfig config);

  const PartitionConfig& config() const { return config_; }
  std::size_t size() const { return categories_.size(); }
  const std::vector<Category>& categories() const { return categories_; }
  Category& category(std::size_t id);
  const Category& category(std::size_t id) const;

  /// Category id for `state`; creates or updates categories as needed.
  std::size_t assign(std::span<const double> state) { return assign_detailed(state).id; }
  AssignInfo assign_detailed(std::span<const double> state);

  /// Incremental mean of the category's members with `state` added.
  void update_centroid(std::size_t id, std::span<const double> state);

  /// Nearest category to `state` without modifying anything, or size() if
  /// the partition is empty.
  std::size_t nearest(std::span<const double> state, double* distance = nullptr) const;

  double distance(std::span<const double> a, std::span<const double> b) const;
  std::vector<double> features(std::span<const double> state) const;

  std::uint64_t overflow_count() const { return overflow_count_; }
  std::uint64_t radius_violations() const { return radius_violations_; }
  std::uint64_t assignments() const { return assignments_; }

  /// Member feature vectors (track_members only).
  const std::vector<std::vector<double>>& members(std::size_t id) const;

  /// Memoized category of a previously assigned state.
  const std::map<std::vector<double>, std::size_t>& memberships() const { return membership_; }

  /// Moves a memoized member to a fresh assignment. Returns the new id.
  std::size_t reassign(std::span<const double> state);

  // Checkpoint restore.
  void restore(std::vector<Category> categories,
               std::map<std::vector<double>, std::size_t> memberships,
               std::uint64_t overflow_count, std::uint64_t assignments);

 private:
  Category make_category(std::vector<double> centroid);
  std::size_t nearest_feature(std::span<const double> f, double* distance) const;

  PartitionConfig config_;
  std::vector<Category> categories_;
  std::vector<std::vector<std::vector<double>>> members_;
  std::map<std::vector<double>, std::size_t> membership_;
  std::uint64_t overflow_count_ = 0;
  std::uint64_t radius_violations_ = 0;
  std::uint64_t assignments_ = 0;
};

struct AuditReport {
  std::size_t checked = 0;
  std::size_t drifted = 0;           // distance to own centroid > epsilon
  double drift_fraction = 0.0;
  double max_intra_deviation = 0.0;  // max pairwise feature distance in a category
  std::size_t consistency_violations = 0;  // pairs with deviation > delta
  std::size_t reassigned = 0;
};

/// Checks semantic coherence (radius) and conceptual consistency (delta) over
/// recently seen states. With `reassign`, drifted states are reassigned.
AuditReport coherence_audit(Partition& partition,
                            std::span<const std::vector<double>> recent_states,
                            bool reassign = false);

}  // namespace cbdrl
