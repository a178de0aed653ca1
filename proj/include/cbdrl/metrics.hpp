#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbdrl/train.hpp"

namespace cbdrl {

inline constexpr int kArtifactFormatVersion = 1;

/// One JSON object per episode; wall_time is always the last field.
std::string metrics_line(const EpisodeRecord& rec);
EpisodeRecord parse_metrics_line(const std::string& line);

/// Env steps at the end of the first episode where the mean return of the
/// trailing `window` episodes reaches `threshold`.
std::optional<std::uint64_t> steps_to_threshold(std::span<const EpisodeRecord> episodes,
                                                double threshold, std::size_t window);

/// Mean return of the last `window` episodes (fewer if the run is shorter);
/// NaN without episodes.
double final_window_mean(std::span<const EpisodeRecord> episodes, std::size_t window);

double mean(std::span<const double> xs);
/// Bessel-corrected; 0 for a single value.
double sample_std(std::span<const double> xs);
/// Median with +inf standing for "never".
double median(std::vector<double> xs);

struct SeedSummary {
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  double final_return = 0.0;
  std::optional<std::uint64_t> steps_to_threshold;
};

struct Summary {
  std::string env;
  std::string agent;
  std::uint64_t steps = 0;
  std::optional<double> threshold;
  std::vector<SeedSummary> seeds;
  double mean_return = 0.0;
  double std_return = 0.0;
  double median_steps_to_threshold = 0.0;  // +inf when most seeds never reach it
};

/// Fills the aggregate fields from the per-seed rows.
void finalize(Summary& s);

std::string summary_csv(const Summary& s);
/// Throws std::runtime_error on malformed content.
Summary parse_summary_csv(const std::string& text);

struct Comparison {
  Summary baseline;
  Summary candidate;
  double tolerance = 0.05;  // relative to |baseline final mean|
  std::string verdict;      // candidate-better | baseline-better | no difference | inconclusive
};

/// Candidate is better when its median steps-to-threshold is strictly lower
/// and its final mean is at least baseline - tolerance * |baseline|; the
/// mirrored rule gives baseline-better. Throws std::invalid_argument when the
/// summaries are for different envs or step budgets.
Comparison compare(const Summary& baseline, const Summary& candidate, double tolerance = 0.05);
std::string comparison_report(const Comparison& c);

}  // namespace cbdrl
