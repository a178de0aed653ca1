#include "cbdrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cbdrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "never" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "never") return kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("summary: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kHeader =
    "format_version,env,agent,steps,threshold,seed,episodes,final_return,final_return_std,"
    "steps_to_threshold";

}  // namespace

std::string metrics_line(const EpisodeRecord& rec) {
  nlohmann::ordered_json j;
  j["format_version"] = kArtifactFormatVersion;
  j["episode"] = rec.episode;
  j["env_steps"] = rec.env_steps;
  j["return"] = rec.return_;
  j["length"] = rec.length;
  j["beta"] = rec.beta;
  j["epsilon"] = rec.epsilon;
  j["categories"] = rec.categories;
  j["q_bound_margin"] = rec.q_bound_margin ? nlohmann::ordered_json(*rec.q_bound_margin) : nullptr;
  j["wall_time"] = rec.wall_time;
  return j.dump();
}

EpisodeRecord parse_metrics_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.at("format_version").get<int>() != kArtifactFormatVersion) {
      throw std::runtime_error("metrics: unsupported format_version");
    }
    EpisodeRecord r;
    r.episode = j.at("episode").get<std::size_t>();
    r.env_steps = j.at("env_steps").get<std::uint64_t>();
    r.return_ = j.at("return").get<double>();
    r.length = j.at("length").get<std::size_t>();
    r.beta = j.at("beta").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    r.categories = j.at("categories").get<std::size_t>();
    if (!j.at("q_bound_margin").is_null()) r.q_bound_margin = j.at("q_bound_margin").get<double>();
    r.wall_time = j.at("wall_time").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("metrics: malformed record (") + e.what() + ")");
  }
}

std::optional<std::uint64_t> steps_to_threshold(std::span<const EpisodeRecord> episodes,
                                                double threshold, std::size_t window) {
  if (window == 0) throw std::invalid_argument("steps_to_threshold: window must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    sum += episodes[i].return_;
    if (i >= window) sum -= episodes[i - window].return_;
    if (i + 1 >= window && sum / static_cast<double>(window) >= threshold) {
      return episodes[i].env_steps;
    }
  }
  return std::nullopt;
}

double final_window_mean(std::span<const EpisodeRecord> episodes, std::size_t window) {
  if (episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::min(window, episodes.size());
  double sum = 0.0;
  for (std::size_t i = episodes.size() - n; i < episodes.size(); ++i) sum += episodes[i].return_;
  return sum / static_cast<double>(n);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (xs.size() == 1) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (const double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  const double lo = xs[n / 2 - 1], hi = xs[n / 2];
  if (std::isinf(hi)) return hi;
  return 0.5 * (lo + hi);
}

void finalize(Summary& s) {
  std::vector<double> returns, reach;
  for (const auto& seed : s.seeds) {
    returns.push_back(seed.final_return);
    reach.push_back(seed.steps_to_threshold ? static_cast<double>(*seed.steps_to_threshold) : kInf);
  }
  s.mean_return = mean(returns);
  s.std_return = sample_std(returns);
  s.median_steps_to_threshold = s.threshold ? median(reach) : kInf;
}

std::string summary_csv(const Summary& s) {
  std::ostringstream os;
  os << kHeader << '\n';
  const std::string prefix = std::to_string(kArtifactFormatVersion) + "," + s.env + "," + s.agent +
                             "," + std::to_string(s.steps) + "," +
                             (s.threshold ? num(*s.threshold) : std::string("none")) + ",";
  std::size_t total = 0;
  for (const auto& seed : s.seeds) {
    total += seed.episodes;
    os << prefix << seed.seed << ',' << seed.episodes << ',' << num(seed.final_return) << ",,"
       << (seed.steps_to_threshold ? std::to_string(*seed.steps_to_threshold) : "never") << '\n';
  }
  os << prefix << "all," << total << ',' << num(s.mean_return) << ',' << num(s.std_return) << ','
     << num(s.median_steps_to_threshold) << '\n';
  return os.str();
}

Summary parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error("summary: missing or unexpected header");
  }
  Summary s;
  bool saw_all = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 10) throw std::runtime_error("summary: expected 10 columns");
      if (std::stoi(f[0]) != kArtifactFormatVersion) {
        throw std::runtime_error("summary: unsupported format_version");
      }
      s.env = f[1];
      s.agent = f[2];
      s.steps = std::stoull(f[3]);
      s.threshold = f[4] == "none" ? std::nullopt : std::optional<double>(parse_num(f[4]));
      if (f[5] == "all") {
        saw_all = true;
        continue;
      }
      SeedSummary seed;
      seed.seed = std::stoull(f[5]);
      seed.episodes = std::stoull(f[6]);
      seed.final_return = parse_num(f[7]);
      if (f[9] != "never") seed.steps_to_threshold = std::stoull(f[9]);
      s.seeds.push_back(seed);
    }
  } catch (const std::logic_error& e) {
    throw std::runtime_error(std::string("summary: malformed row (") + e.what() + ")");
  }
  if (!saw_all || s.seeds.empty()) throw std::runtime_error("summary: no seed rows");
  finalize(s);
  return s;
}

Comparison compare(const Summary& baseline, const Summary& candidate, double tolerance) {
  if (baseline.env != candidate.env) {
    throw std::invalid_argument("compare: env differs ('" + baseline.env + "' vs '" + candidate.env + "')");
  }
  if (baseline.steps != candidate.steps) {
    throw std::invalid_argument("compare: step budgets differ");
  }
  if (!(tolerance >= 0.0)) throw std::invalid_argument("compare: tolerance must be non-negative");
  Comparison c{baseline, candidate, tolerance, ""};
  const double mb = baseline.mean_return, mc = candidate.mean_return;
  const double sb = baseline.median_steps_to_threshold, sc = candidate.median_steps_to_threshold;
  const bool candidate_better = sc < sb && mc >= mb - tolerance * std::abs(mb);
  const bool baseline_better = sb < sc && mb >= mc - tolerance * std::abs(mc);
  if (candidate_better) {
    c.verdict = "candidate-better";
  } else if (baseline_better) {
    c.verdict = "baseline-better";
  } else if (sb == sc && std::abs(mc - mb) <= tolerance * std::abs(mb)) {
    c.verdict = "no difference";
  } else {
    c.verdict = "inconclusive";
  }
  return c;
}

std::string comparison_report(const Comparison& c) {
  std::ostringstream os;
  auto side = [&](const char* label, const Summary& s) {
    os << label << ": agent=" << s.agent << " env=" << s.env << " steps=" << s.steps << '\n';
    for (const auto& seed : s.seeds) {
      os << "  seed " << seed.seed << ": steps_to_threshold="
         << (seed.steps_to_threshold ? std::to_string(*seed.steps_to_threshold) : "never")
         << " final_return=" << num(seed.final_return) << '\n';
    }
    os << "  median_steps_to_threshold=" << num(s.median_steps_to_threshold)
       << " final_mean=" << num(s.mean_return) << " final_std=" << num(s.std_return) << '\n';
  };
  side("baseline", c.baseline);
  side("candidate", c.candidate);
  os << "tolerance=" << num(c.tolerance) << '\n';
  os << "verdict: " << c.verdict << '\n';
  return os.str();
}

}  // namespace cbdrl
