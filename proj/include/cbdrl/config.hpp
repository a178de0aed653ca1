#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbdrl/env.hpp"
#include "cbdrl/train.hpp"

namespace cbdrl {

/// Invalid experiment configuration; `key()` is the offending dotted key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& why)
      : std::runtime_error(key + ": " + why), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Dotted keys to raw string values.
using FlatConfig = std::map<std::string, std::string>;

/// `key = value` lines; `#` starts a comment. Duplicate keys are an error.
FlatConfig parse_flat_config(const std::string& text);

/// Nested objects become dotted keys; arrays are joined with commas.
FlatConfig flatten_json(const nlohmann::json& j);

struct ExperimentConfig {
  std::string name = "experiment";
  std::string env;
  ParamMap env_params;
  AgentConfig agent;
  std::vector<std::uint64_t> seeds{123, 321, 666};
  std::uint64_t steps = 0;
  std::uint64_t checkpoint_every = 0;
  std::string output_dir;             // empty: runs/<name>
  std::optional<double> threshold;    // steps-to-threshold return level
  std::size_t threshold_window = 10;  // episodes in the moving average
  std::size_t final_window = 10;      // episodes in the final-window mean
  double oracle_tolerance = 1e-2;
  std::size_t workers = 1;

  /// Resolved values of every key, suitable for writing next to the results.
  FlatConfig resolved;
};

/// Validates every key. Unknown keys and bad values throw ConfigError.
ExperimentConfig build_config(const FlatConfig& flat);

/// Reads a flat or JSON config; JSON is detected by a leading '{'.
ExperimentConfig load_config(const std::string& path);
FlatConfig load_flat(const std::string& path);

/// Builds the environment for one seed of a run.
EnvHandle make_run_env(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace cbdrl
