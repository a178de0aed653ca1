#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cbdrl/config.hpp"
#include "cbdrl/metrics.hpp"

namespace cbdrl {

/// Run-time failure of the harness (I/O, existing output, bad artifacts).
class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative output directories resolve against CBDRL_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Trains every seed and writes, under the output directory:
///   config.json, summary.csv,
///   seed_<n>/metrics.jsonl, seed_<n>/checkpoints/step_<k>.json
/// An existing non-empty directory is an error unless `force`.
Summary run_experiment(const ExperimentConfig& config, bool force);

/// Cartesian product over `grid` (key, values). Each variant is written to
/// <output>/<key>=<value>[,...]. Returns the variant directories.
std::vector<std::filesystem::path> run_sweep(
    const FlatConfig& base, const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    bool force);

struct SeedOracleResult {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> steps;
  std::vector<double> delta;
  bool decreasing = false;
  bool pass = false;
  std::string reason;
};

struct OracleReport {
  double tolerance = 0.0;
  std::vector<SeedOracleResult> seeds;
  bool pass = false;
};

/// Compares every checkpoint of a tabular run with value iteration on the
/// env's exact model and writes oracle_check.json. Nothing is written when a
/// checkpoint is missing or malformed.
OracleReport oracle_check(const std::filesystem::path& run_dir);

std::string read_file(const std::filesystem::path& path);

}  // namespace cbdrl
