#include "cbdrl/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <regex>
#include <sstream>

#include "cbdrl/checkpoint.hpp"
#include "cbdrl/convergence.hpp"

namespace cbdrl {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HarnessError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw HarnessError("write failed for '" + path.string() + "'");
}

void prepare_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec)) {
    if (!force) {
      throw HarnessError("output directory '" + dir.string() + "' exists; pass --force to overwrite");
    }
    fs::remove_all(dir, ec);
    if (ec) throw HarnessError("cannot clear '" + dir.string() + "': " + ec.message());
  }
  fs::create_directories(dir, ec);
  if (ec) throw HarnessError("cannot create '" + dir.string() + "': " + ec.message());
}

std::string checkpoint_name(std::uint64_t step) {
  std::ostringstream os;
  os << "step_" << step << ".json";
  return os.str();
}

SeedSummary run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  const fs::path seed_dir = dir / ("seed_" + std::to_string(seed));
  fs::create_directories(seed_dir / "checkpoints");
  std::ofstream metrics(seed_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw HarnessError("cannot write metrics in '" + seed_dir.string() + "'");

  EnvHandle env = make_run_env(config, seed);
  TrainOptions o;
  o.steps = config.steps;
  o.seed = seed;
  o.checkpoint_every = config.checkpoint_every;
  o.on_episode = [&](const EpisodeRecord& rec) { metrics << metrics_line(rec) << '\n'; };
  o.on_checkpoint = [&](std::uint64_t step, const nlohmann::json& j) {
    write_file(seed_dir / "checkpoints" / checkpoint_name(step), j.dump());
  };
  const TrainResult result = train(config.agent, env, o);
  metrics.close();
  if (!metrics) throw HarnessError("write failed for metrics in '" + seed_dir.string() + "'");

  SeedSummary s;
  s.seed = seed;
  s.episodes = result.episodes.size();
  s.final_return = final_window_mean(result.episodes, config.final_window);
  if (config.threshold) {
    s.steps_to_threshold = steps_to_threshold(result.episodes, *config.threshold, config.threshold_window);
  }
  return s;
}

nlohmann::ordered_json config_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["format_version"] = kArtifactFormatVersion;
  j["config"] = config.resolved;
  return j;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path resolve_output_dir(const ExperimentConfig& config) {
  fs::path dir = config.output_dir.empty() ? fs::path("runs") / config.name : fs::path(config.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("CBDRL_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
      dir = fs::path(root) / dir;
    }
  }
  return dir;
}

Summary run_experiment(const ExperimentConfig& config, bool force) {
  const fs::path dir = resolve_output_dir(config);
  prepare_dir(dir, force);
  write_file(dir / "config.json", config_json(config).dump(2) + "\n");

  Summary summary;
  summary.env = config.env;
  summary.agent = to_string(config.agent.kind);
  summary.steps = config.steps;
  summary.threshold = config.threshold;
  summary.seeds.resize(config.seeds.size());

  // Each worker owns its env, agent and files; results land in seed order.
  for (std::size_t begin = 0; begin < config.seeds.size(); begin += config.workers) {
    const std::size_t end = std::min(config.seeds.size(), begin + config.workers);
    std::vector<std::future<SeedSummary>> jobs;
    for (std::size_t i = begin; i < end; ++i) {
      jobs.push_back(std::async(config.workers > 1 ? std::launch::async : std::launch::deferred,
                                run_seed, std::cref(config), config.seeds[i], dir));
    }
    for (std::size_t i = begin; i < end; ++i) summary.seeds[i] = jobs[i - begin].get();
  }
  finalize(summary);
  write_file(dir / "summary.csv", summary_csv(summary));
  return summary;
}

std::vector<fs::path> run_sweep(
    const FlatConfig& base, const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    bool force) {
  if (grid.empty()) throw ConfigError("--grid", "at least one grid axis is required");
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw ConfigError(key, "grid axis has no values");
    if (key == "run.output_dir") throw ConfigError(key, "cannot be swept");
  }
  const ExperimentConfig root = build_config(base);
  const fs::path root_dir = resolve_output_dir(root);
  prepare_dir(root_dir, force);

  std::vector<std::size_t> index(grid.size(), 0);
  std::vector<FlatConfig> variants;
  std::vector<std::string> names;
  for (bool done = false; !done;) {
    FlatConfig flat = base;
    std::string name;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      flat[grid[g].first] = grid[g].second[index[g]];
      name += (g ? "," : "") + grid[g].first + "=" + grid[g].second[index[g]];
    }
    std::replace(name.begin(), name.end(), '/', '_');
    flat["run.output_dir"] = fs::absolute(root_dir / name).string();
    build_config(flat);  // every variant is validated before any training
    variants.push_back(std::move(flat));
    names.push_back(name);
    // Odometer increment, last axis fastest.
    std::size_t g = grid.size();
    while (true) {
      if (g == 0) {
        done = true;
        break;
      }
      --g;
      if (++index[g] < grid[g].second.size()) break;
      index[g] = 0;
    }
  }

  std::vector<fs::path> out;
  std::ostringstream idx;
  idx << "format_version,variant,directory\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const ExperimentConfig c = build_config(variants[i]);
    run_experiment(c, false);
    out.push_back(resolve_output_dir(c));
    idx << kArtifactFormatVersion << ',' << '"' << names[i] << '"' << ',' << out.back().string() << '\n';
  }
  write_file(root_dir / "sweep.csv", idx.str());
  return out;
}

OracleReport oracle_check(const fs::path& run_dir) {
  const fs::path cfg_path = run_dir / "config.json";
  if (!fs::exists(cfg_path)) throw HarnessError("no config.json in '" + run_dir.string() + "'");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_file(cfg_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw HarnessError(std::string("config.json: format error (") + e.what() + ")");
  }
  if (!cfg.contains("config") || !cfg["config"].is_object()) {
    throw HarnessError("config.json: format error (missing 'config')");
  }
  const ExperimentConfig config = build_config(cfg["config"].get<FlatConfig>());
  if (!is_tabular(config.agent.kind)) {
    throw HarnessError("oracle-check needs a tabular agent, got '" + to_string(config.agent.kind) + "'");
  }
  EnvHandle env = make_run_env(config, 0);
  const TabularMdp* model = env.discrete ? env.discrete->tabular() : nullptr;
  if (model == nullptr) throw HarnessError("oracle-check needs an env with an exact model");
  TabularMdp mdp = *model;
  mdp.gamma = config.agent.cbdq.base.gamma;
  const QValues oracle = value_iteration(mdp, 1e-12).q;

  OracleReport report;
  report.tolerance = config.oracle_tolerance;
  report.pass = true;
  const std::regex step_re("step_([0-9]+)\\.json");
  for (const auto seed : config.seeds) {
    const fs::path dir = run_dir / ("seed_" + std::to_string(seed)) / "checkpoints";
    if (!fs::is_directory(dir)) throw HarnessError("missing checkpoints for seed " + std::to_string(seed));
    std::vector<std::pair<std::uint64_t, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::smatch m;
      const std::string fname = entry.path().filename().string();
      if (std::regex_match(fname, m, step_re)) files.emplace_back(std::stoull(m[1]), entry.path());
    }
    if (files.empty()) throw HarnessError("missing checkpoints for seed " + std::to_string(seed));
    std::sort(files.begin(), files.end());

    SeedOracleResult r;
    r.seed = seed;
    std::vector<QValues> series;
    for (const auto& [step, path] : files) {
      try {
        series.push_back(checkpoint_q(parse_checkpoint(read_file(path))));
      } catch (const CheckpointError& e) {
        throw HarnessError(path.string() + ": format error (" + e.what() + ")");
      }
      r.steps.push_back(step);
    }
    ConvergenceReport probe;
    try {
      probe = convergence_probe(series, oracle);
    } catch (const std::invalid_argument& e) {
      throw HarnessError(std::string("checkpoint shape does not match the env: ") + e.what());
    }
    r.delta = probe.delta;
    r.decreasing = probe.decreasing;
    if (series.size() < 2) {
      r.pass = false;
      r.reason = "insufficient data";
    } else if (!(r.delta.back() < config.oracle_tolerance)) {
      r.pass = false;
      r.reason = "final delta above tolerance";
    } else {
      r.pass = true;
    }
    report.pass = report.pass && r.pass;
    report.seeds.push_back(std::move(r));
  }

  nlohmann::ordered_json j;
  j["format_version"] = kArtifactFormatVersion;
  j["tolerance"] = report.tolerance;
  j["pass"] = report.pass;
  j["seeds"] = nlohmann::ordered_json::array();
  for (const auto& r : report.seeds) {
    nlohmann::ordered_json s;
    s["seed"] = r.seed;
    s["steps"] = r.steps;
    s["delta"] = r.delta;
    s["final_delta"] = r.delta.back();
    s["decreasing"] = r.decreasing;
    s["pass"] = r.pass;
    if (!r.reason.empty()) s["reason"] = r.reason;
    j["seeds"].push_back(std::move(s));
  }
  write_file(run_dir / "oracle_check.json", j.dump(2) + "\n");
  return report;
}

}  // namespace cbdrl
