#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "cbdrl/harness.hpp"

using namespace cbdrl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cbdrl_harness_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

FlatConfig tiny_grid(const fs::path& out) {
  return {{"env.name", "gridworld"},    {"env.rows", "2"},          {"env.cols", "2"},
          {"env.max_steps", "5"},       {"agent.kind", "cbdq"},     {"run.seeds", "1,2"},
          {"run.steps", "10"},          {"run.output_dir", out.string()}};
}

FlatConfig chain_config(const fs::path& out, std::uint64_t steps) {
  return {{"env.name", "chain"},
          {"env.n", "5"},
          {"env.gamma", "0.3"},
          {"env.max_steps", "50"},
          {"agent.kind", "cbdq"},
          {"schedule.epsilon.start", "1"},
          {"schedule.epsilon.end", "1"},
          {"schedule.temperature.kind", "exponential"},
          {"schedule.temperature.start", "1"},
          {"schedule.temperature.end", "0.001"},
          {"schedule.temperature.decay_steps", "200"},
          {"schedule.beta.kind", "linear_ramp"},
          {"schedule.beta.beta0", "0.3"},
          {"schedule.beta.beta_star", "0"},
          {"schedule.beta.rate", "0.0015"},
          {"run.seeds", "123,321,666"},
          {"run.steps", std::to_string(steps)},
          {"run.checkpoint_every", "500"},
          {"run.output_dir", out.string()}};
}

std::string strip_wall_time(const std::string& text) {
  return std::regex_replace(text, std::regex(",\"wall_time\":[^}]*\\}"), "}");
}

std::vector<EpisodeRecord> read_metrics(const fs::path& p) {
  std::ifstream in(p);
  std::vector<EpisodeRecord> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(parse_metrics_line(line));
  return out;
}

std::string error_key(const FlatConfig& flat) {
  try {
    build_config(flat);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

Summary synthetic(std::vector<std::optional<std::uint64_t>> reach, std::vector<double> finals) {
  Summary s;
  s.env = "gridworld";
  s.agent = "x";
  s.steps = 1000;
  s.threshold = 0.8;
  for (std::size_t i = 0; i < reach.size(); ++i) {
    s.seeds.push_back({100 + i, 10, finals[i], reach[i]});
  }
  finalize(s);
  return s;
}

}  // namespace

TEST_CASE("flat config parsing") {
  const auto flat = parse_flat_config("# comment\nenv.name = chain  # trailing\n\nrun.steps=5\n");
  CHECK(flat.at("env.name") == "chain");
  CHECK(flat.at("run.steps") == "5");
  CHECK_THROWS_AS(parse_flat_config("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_config("just words\n"), ConfigError);
}

TEST_CASE("config defaults") {
  const auto c = build_config({{"env.name", "chain"}, {"env.gamma", "0.9"}, {"run.steps", "10"}});
  CHECK(c.seeds == std::vector<std::uint64_t>{123, 321, 666});
  CHECK(c.agent.kind == AgentKind::cbdq);
  CHECK(c.agent.cbdq.base.gamma == 0.9);
  CHECK(c.agent.cbdq.partition.memoize);
  const auto sac = build_config({{"env.name", "reach1d"}, {"agent.kind", "cbdsac"}, {"run.steps", "10"}});
  CHECK(sac.agent.sac.gamma == 0.99);
  CHECK_FALSE(sac.agent.sac.partition.memoize);
}

TEST_CASE("config errors name the offending key") {
  const FlatConfig base{{"env.name", "chain"}, {"run.steps", "10"}};
  auto with = [&](const std::string& k, const std::string& v) {
    FlatConfig f = base;
    f[k] = v;
    return f;
  };
  CHECK(error_key({{"run.steps", "10"}}) == "env.name");
  CHECK(error_key(with("env.name", "pong")) == "env.name");
  CHECK(error_key(with("run.steps", "0")) == "run.steps");
  CHECK(error_key(with("run.steps", "ten")) == "run.steps");
  CHECK(error_key(with("run.seeds", "")) == "run.seeds");
  CHECK(error_key(with("run.seeds", "1,1")) == "run.seeds");
  CHECK(error_key(with("agent.kind", "dqn")) == "agent.kind");
  CHECK(error_key(with("agent.kind", "cbdsac")) == "agent.kind");
  CHECK(error_key(with("agent.gamma", "1.5")) == "agent");
  CHECK(error_key(with("schedule.beta.kind", "cosine")) == "schedule.beta.kind");
  CHECK(error_key(with("schedule.beta.beta_star", "2")) == "schedule.beta");
  CHECK(error_key(with("agent.replay", "maybe")) == "agent.replay");
  CHECK(error_key(with("agent.colour", "blue")) == "agent.colour");
  CHECK(error_key(with("ccf.epsilon", "-1")) == "ccf");
  CHECK(error_key(with("env.n", "1")) == "env");
  CHECK(error_key(with("ppo.clip", "0.1")) == "ppo.clip");
}

TEST_CASE("json mirror matches the flat form") {
  const auto j = nlohmann::json::parse(R"({
    "env": {"name": "gridworld", "rows": 3, "cols": 3},
    "agent": {"kind": "cbdq", "smoothing": {"kind": "clipped_softmax", "top_k": 2}},
    "schedule": {"beta": {"beta_star": 0.25}},
    "run": {"seeds": [1, 2], "steps": 100, "threshold": 0.5}
  })");
  const auto flat = parse_flat_config(
      "env.name = gridworld\nenv.rows = 3\nenv.cols = 3\nagent.kind = cbdq\n"
      "agent.smoothing.kind = clipped_softmax\nagent.smoothing.top_k = 2\n"
      "schedule.beta.beta_star = 0.25\nrun.seeds = 1,2\nrun.steps = 100\nrun.threshold = 0.5\n");
  CHECK(flatten_json(j) == flat);
  CHECK(build_config(flat).resolved == build_config(flatten_json(j)).resolved);
}

TEST_CASE("resolved config rebuilds to itself") {
  const auto c = build_config(chain_config("x", 100));
  CHECK(build_config(c.resolved).resolved == c.resolved);
}

TEST_CASE("steps to threshold and final window") {
  std::vector<EpisodeRecord> eps(6);
  const double returns[] = {0.0, 1.0, 0.2, 0.9, 0.9, 0.95};
  for (std::size_t i = 0; i < 6; ++i) {
    eps[i].return_ = returns[i];
    eps[i].env_steps = 10 * (i + 1);
  }
  CHECK(steps_to_threshold(eps, 0.8, 1) == 20u);
  CHECK(steps_to_threshold(eps, 0.8, 2) == 50u);
  CHECK_FALSE(steps_to_threshold(eps, 0.99, 2).has_value());
  CHECK(final_window_mean(eps, 2) == doctest::Approx(0.925));
  CHECK(final_window_mean(eps, 100) == doctest::Approx(3.95 / 6.0));
  CHECK(std::isnan(final_window_mean({}, 3)));
}

TEST_CASE("sample statistics") {
  const std::vector<double> xs{1.0, 2.0, 4.0};
  CHECK(mean(xs) == doctest::Approx(7.0 / 3.0));
  CHECK(sample_std(xs) == doctest::Approx(std::sqrt((16.0 / 9 + 1.0 / 9 + 25.0 / 9) / 2.0)));
  CHECK(sample_std(std::vector<double>{3.0}) == 0.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median({1.0, inf, inf}) == inf);
}

TEST_CASE("summary csv round trip") {
  const Summary s = synthetic({100u, std::nullopt, 90u}, {0.5, 0.25, 1.0 / 3.0});
  const Summary back = parse_summary_csv(summary_csv(s));
  CHECK(back.seeds.size() == 3);
  CHECK(back.seeds[2].final_return == 1.0 / 3.0);
  CHECK_FALSE(back.seeds[1].steps_to_threshold.has_value());
  CHECK(back.mean_return == s.mean_return);
  CHECK(back.std_return == s.std_return);
  CHECK_THROWS_AS(parse_summary_csv("nope\n"), std::runtime_error);
}

TEST_CASE("compare verdicts") {
  const Summary base = synthetic({200u, 210u, 190u}, {0.8, 0.82, 0.81});
  CHECK(compare(base, base).verdict == "no difference");

  const Summary fast = synthetic({100u, 120u, 90u}, {0.8, 0.82, 0.81});
  CHECK(compare(base, fast).verdict == "candidate-better");
  CHECK(compare(fast, base).verdict == "baseline-better");

  Summary other_env = fast;
  other_env.env = "chain";
  CHECK_THROWS_AS(compare(base, other_env), std::invalid_argument);
  Summary other_steps = fast;
  other_steps.steps = 5;
  CHECK_THROWS_AS(compare(base, other_steps), std::invalid_argument);
}

TEST_CASE("compare on crossing curves follows the stated rule") {
  // Synthetic learning curves: the candidate rises early and plateaus low,
  // the baseline rises late and ends high. Verdicts are recomputed by hand.
  auto curve = [](double rise_at, double plateau) {
    std::vector<EpisodeRecord> eps(100);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      eps[i].env_steps = 10 * (i + 1);
      eps[i].return_ = static_cast<double>(i) >= rise_at ? plateau : 0.0;
    }
    return eps;
  };
  auto summarize = [&](double rise_at, double plateau) {
    Summary s;
    s.env = "gridworld";
    s.agent = "x";
    s.steps = 1000;
    s.threshold = 0.5;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto eps = curve(rise_at + 5.0 * static_cast<double>(seed), plateau);
      s.seeds.push_back({seed, eps.size(), final_window_mean(eps, 10), steps_to_threshold(eps, 0.5, 5)});
    }
    finalize(s);
    return s;
  };
  const Summary baseline = summarize(60, 1.0);
  // Median seed rises at episode 65; the 5-episode mean first reaches 0.5 with
  // three high episodes, at episode 67 -> 680 steps.
  CHECK(baseline.median_steps_to_threshold == 680.0);

  const Summary early_low = summarize(20, 0.9);   // faster, 10% lower final return
  CHECK(early_low.median_steps_to_threshold == 280.0);
  CHECK(compare(baseline, early_low).verdict == "inconclusive");
  CHECK(compare(baseline, early_low, 0.10).verdict == "candidate-better");

  const Summary early_close = summarize(20, 0.96);  // faster, 4% lower
  CHECK(compare(baseline, early_close).verdict == "candidate-better");
}

TEST_CASE("run writes metrics, checkpoints and a summary") {
  TempDir tmp;
  const auto c = build_config(tiny_grid(tmp.path / "run"));
  const Summary s = run_experiment(c, false);
  CHECK(s.seeds.size() == 2);
  for (const auto seed : {1, 2}) {
    const fs::path dir = tmp.path / "run" / ("seed_" + std::to_string(seed));
    CHECK(read_metrics(dir / "metrics.jsonl").size() >= 1);
    CHECK(fs::exists(dir / "checkpoints" / "step_0.json"));
    CHECK(fs::exists(dir / "checkpoints" / "step_10.json"));
  }
  CHECK(fs::exists(tmp.path / "run" / "summary.csv"));
  CHECK(nlohmann::json::parse(read_file(tmp.path / "run" / "config.json"))["format_version"] == 1);

  CHECK_THROWS_AS(run_experiment(c, false), HarnessError);
  CHECK_NOTHROW(run_experiment(c, true));
}

TEST_CASE("metrics are reproducible apart from wall time") {
  TempDir tmp;
  auto flat = chain_config(tmp.path / "a", 3000);
  const Summary a = run_experiment(build_config(flat), false);
  flat["run.output_dir"] = (tmp.path / "b").string();
  const Summary b = run_experiment(build_config(flat), false);
  for (const auto seed : {123, 321, 666}) {
    const std::string name = "seed_" + std::to_string(seed);
    const auto ma = read_file(tmp.path / "a" / name / "metrics.jsonl");
    const auto mb = read_file(tmp.path / "b" / name / "metrics.jsonl");
    CHECK_FALSE(ma.empty());
    CHECK(strip_wall_time(ma) == strip_wall_time(mb));
    CHECK(read_file(tmp.path / "a" / name / "checkpoints" / "step_3000.json") ==
          read_file(tmp.path / "b" / name / "checkpoints" / "step_3000.json"));
  }
  CHECK(a.mean_return == b.mean_return);
}

TEST_CASE("summary arithmetic matches the per-seed files") {
  TempDir tmp;
  auto flat = chain_config(tmp.path / "run", 2000);
  flat["run.final_window"] = "7";
  const auto c = build_config(flat);
  run_experiment(c, false);
  const Summary s = parse_summary_csv(read_file(tmp.path / "run" / "summary.csv"));
  REQUIRE(s.seeds.size() == 3);
  std::vector<double> finals;
  for (const auto seed : c.seeds) {
    const auto eps = read_metrics(tmp.path / "run" / ("seed_" + std::to_string(seed)) / "metrics.jsonl");
    REQUIRE(eps.size() >= 7);
    double sum = 0.0;
    for (std::size_t i = eps.size() - 7; i < eps.size(); ++i) sum += eps[i].return_;
    finals.push_back(sum / 7.0);
  }
  const double m = (finals[0] + finals[1] + finals[2]) / 3.0;
  double ss = 0.0;
  for (const double f : finals) ss += (f - m) * (f - m);
  CHECK(std::abs(s.mean_return - m) <= 1e-12);
  CHECK(std::abs(s.std_return - std::sqrt(ss / 2.0)) <= 1e-12);
}

TEST_CASE("output root environment variable") {
  TempDir tmp;
  auto flat = tiny_grid("nested/run");
  setenv("CBDRL_OUTPUT_ROOT", tmp.path.c_str(), 1);
  const auto c = build_config(flat);
  CHECK(resolve_output_dir(c) == tmp.path / "nested" / "run");
  run_experiment(c, false);
  unsetenv("CBDRL_OUTPUT_ROOT");
  CHECK(fs::exists(tmp.path / "nested" / "run" / "summary.csv"));
}

TEST_CASE("oracle check") {
  TempDir tmp;
  const auto c = build_config(chain_config(tmp.path / "run", 5000));
  run_experiment(c, false);
  const auto report = oracle_check(tmp.path / "run");
  CHECK(report.pass);
  REQUIRE(report.seeds.size() == 3);
  for (const auto& s : report.seeds) {
    CHECK(s.delta.size() == 11);
    CHECK(s.delta.back() < 1e-2);
  }
  CHECK(fs::exists(tmp.path / "run" / "oracle_check.json"));

  SUBCASE("only the initial checkpoint") {
    for (const auto seed : c.seeds) {
      const fs::path dir = tmp.path / "run" / ("seed_" + std::to_string(seed)) / "checkpoints";
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename() != "step_0.json") fs::remove(e.path());
      }
    }
    const auto r = oracle_check(tmp.path / "run");
    CHECK_FALSE(r.pass);
    CHECK(r.seeds[0].delta.size() == 1);
    CHECK(r.seeds[0].reason == "insufficient data");
  }
  SUBCASE("corrupted checkpoint") {
    fs::remove(tmp.path / "run" / "oracle_check.json");
    std::ofstream(tmp.path / "run" / "seed_321" / "checkpoints" / "step_500.json") << "{\"format_";
    CHECK_THROWS_WITH_AS(oracle_check(tmp.path / "run"), doctest::Contains("format error"), HarnessError);
    CHECK_FALSE(fs::exists(tmp.path / "run" / "oracle_check.json"));
  }
  SUBCASE("missing checkpoints") {
    fs::remove_all(tmp.path / "run" / "seed_666" / "checkpoints");
    CHECK_THROWS_AS(oracle_check(tmp.path / "run"), HarnessError);
  }
}

TEST_CASE("sweep runs every grid point") {
  TempDir tmp;
  const auto dirs = run_sweep(tiny_grid(tmp.path / "sweep"),
                              {{"agent.kind", {"cbdq", "qlearning"}}, {"agent.gamma", {"0.9", "0.5"}}},
                              false);
  CHECK(dirs.size() == 4);
  for (const auto& d : dirs) CHECK(fs::exists(d / "summary.csv"));
  CHECK(fs::exists(tmp.path / "sweep" / "sweep.csv"));
  CHECK(build_config(nlohmann::json::parse(read_file(dirs[3] / "config.json"))["config"]
                         .get<FlatConfig>())
            .agent.kind == AgentKind::qlearning);
  CHECK_THROWS_AS(run_sweep(tiny_grid(tmp.path / "s2"), {{"agent.kind", {"dqn"}}}, false), ConfigError);
}
