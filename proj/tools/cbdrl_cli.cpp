#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cbdrl/harness.hpp"

namespace fs = std::filesystem;
using namespace cbdrl;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

Summary load_summary(const std::string& arg) {
  fs::path p(arg);
  if (fs::is_directory(p)) p /= "summary.csv";
  try {
    return parse_summary_csv(read_file(p));
  } catch (const std::runtime_error& e) {
    throw HarnessError(p.string() + ": " + e.what());
  }
}

std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("--grid", "expected key=v1,v2, got '" + spec + "'");
  }
  std::vector<std::string> values;
  std::string rest = spec.substr(eq + 1), item;
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.empty()) throw ConfigError("--grid", "empty value in '" + spec + "'");
    values.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return {spec.substr(0, eq), values};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Belief-driven tabular and linear RL experiments"};
  app.require_subcommand(1);

  std::string config_path, a_path, b_path, run_dir, out_path;
  bool force = false;
  double tolerance = 0.05;
  std::vector<std::string> grid;

  auto* run = app.add_subcommand("run", "Train every seed of a config and write metrics");
  run->add_option("config", config_path, "Config file (key = value or JSON)")->required();
  run->add_flag("--force", force, "Replace an existing output directory");

  auto* cmp = app.add_subcommand("compare", "Compare two run summaries");
  cmp->add_option("baseline", a_path, "Baseline summary.csv or run directory")->required();
  cmp->add_option("candidate", b_path, "Candidate summary.csv or run directory")->required();
  cmp->add_option("--tolerance", tolerance, "Relative final-return tolerance")->capture_default_str();
  cmp->add_option("--out", out_path, "Also write the report to this file");

  auto* oracle = app.add_subcommand("oracle-check", "Compare tabular checkpoints with value iteration");
  oracle->add_option("run_dir", run_dir, "Run directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run a config over a grid of overrides");
  sweep->add_option("config", config_path, "Base config file")->required();
  sweep->add_option("--grid", grid, "key=v1,v2 (repeatable)")->required();
  sweep->add_flag("--force", force, "Replace an existing output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) {
      const auto config = load_config(config_path);
      const Summary s = run_experiment(config, force);
      std::cout << "wrote " << resolve_output_dir(config).string() << '\n'
                << "final return " << s.mean_return << " +/- " << s.std_return << " over "
                << s.seeds.size() << " seeds\n";
      return kOk;
    }
    if (*cmp) {
      Comparison c;
      try {
        c = compare(load_summary(a_path), load_summary(b_path), tolerance);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("compare", e.what());
      }
      const std::string report = comparison_report(c);
      std::cout << report;
      if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!(out << report)) throw HarnessError("cannot write '" + out_path + "'");
      }
      return kOk;
    }
    if (*oracle) {
      const OracleReport r = oracle_check(run_dir);
      for (const auto& s : r.seeds) {
        std::cout << "seed " << s.seed << ": final delta " << s.delta.back() << " over "
                  << s.delta.size() << " checkpoints, " << (s.pass ? "pass" : "fail")
                  << (s.reason.empty() ? "" : " (" + s.reason + ")") << '\n';
      }
      std::cout << (r.pass ? "pass" : "fail") << '\n';
      return r.pass ? kOk : kCheckFailed;
    }
    if (*sweep) {
      std::vector<std::pair<std::string, std::vector<std::string>>> axes;
      for (const auto& g : grid) axes.push_back(parse_axis(g));
      for (const auto& dir : run_sweep(load_flat(config_path), axes, force)) {
        std::cout << "wrote " << dir.string() << '\n';
      }
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
