#include "areid/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace areid {

namespace {

struct StrategyEntry {
  Strategy strategy;
  const char* name;
};

constexpr StrategyEntry kStrategies[] = {
    {Strategy::kViewAwareResample, "view_aware_resample"},
    {Strategy::kViewAwareOnly, "view_aware_only"},
    {Strategy::kMixedView, "mixed_view"},
    {Strategy::kRandom, "random"},
    {Strategy::kKMeans, "kmeans"},
};

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int ParseInt(const std::string& key, const std::string& value) {
  Int out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
  return out;
}

double ParseReal(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

std::string Real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string OptionalCount(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : "auto";
}

std::optional<std::size_t> ParseOptionalCount(const std::string& key, const std::string& value) {
  if (value == "auto") return std::nullopt;
  return ParseInt<std::size_t>(key, value);
}

}  // namespace

const char* StrategyName(Strategy s) {
  for (const auto& e : kStrategies) {
    if (e.strategy == s) return e.name;
  }
  return "unknown";
}

Strategy ParseStrategy(const std::string& s) {
  for (const auto& e : kStrategies) {
    if (s == e.name) return e.strategy;
  }
  throw ConfigError("unknown strategy '" + s + "'");
}

void RunConfig::Validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (t0 < 1) fail("t0 must be at least 1");
  if (k_dist == 0) fail("k_dist must be at least 1");
  if (k_recip == 0) fail("k_recip must be at least 1");
  if (resample_window == 0) fail("resample_window must be at least 1");
  if (sigma_mode == SigmaMode::kFixed && !(sigma > 0.0)) fail("sigma must be positive");
  if (!(dbscan_eps >= 0.0 && dbscan_eps < 1.0)) fail("dbscan_eps must lie in [0, 1)");
  if (dbscan_min_pts > 2) fail("dbscan_min_pts must be at most 2");
  if (prop_max_iters == 0) fail("prop_max_iters must be at least 1");
  if (!(prop_tol > 0.0)) fail("prop_tol must be positive");
  if (!(refresh_alpha >= 0.0 && refresh_alpha <= 1.0)) fail("refresh_alpha must lie in [0, 1]");
  if (max_iterations < 1) fail("max_iterations must be at least 1");
  if (tpa_runs == 0) fail("tpa_runs must be at least 1");
  if (workers == 0) fail("workers must be at least 1");
}

SamplingSchedule RunConfig::ResolveSchedule(std::size_t same_view_pairs,
                                            std::size_t cross_view_pairs) const {
  SamplingSchedule s = DefaultSchedule(same_view_pairs, cross_view_pairs);
  if (s1) s.s1 = *s1;
  if (s2) s.s2 = *s2;
  if (s3) s.s3 = *s3;
  if (s4) s.s4 = *s4;
  s.t0 = t0;
  if (!s.IsEasyToHard()) {
    const std::string what = "schedule (s1=" + std::to_string(s.s1) + ", s2=" +
                             std::to_string(s.s2) + ", s3=" + std::to_string(s.s3) +
                             ", s4=" + std::to_string(s.s4) +
                             ") is not easy-to-hard (needs s1 > s3 and s4 > s2)";
    if (!allow_schedule_override) throw ConfigError(what);
    std::cerr << "warning: " << what << '\n';
  }
  return s;
}

const std::vector<std::string>& ConfigKeys() {
  static const std::vector<std::string> keys = {
      "s1",          "s2",            "s3",
      "s4",          "t0",            "allow_schedule_override",
      "k_dist",      "k_recip",       "resample_window",
      "sigma",
      "dbscan_eps",  "dbscan_min_pts", "prop_max_iters",
      "prop_tol",    "refresh_alpha", "strategy",
      "max_iterations", "stop_when_pools_exhausted", "seed",
      "max_manual",  "tpa_runs",      "kmeans_k",
      "exclude_same_camera", "workers",
  };
  return keys;
}

void SetConfigValue(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = Trim(raw);
  if (key == "s1") c.s1 = ParseOptionalCount(key, v);
  else if (key == "s2") c.s2 = ParseOptionalCount(key, v);
  else if (key == "s3") c.s3 = ParseOptionalCount(key, v);
  else if (key == "s4") c.s4 = ParseOptionalCount(key, v);
  else if (key == "t0") c.t0 = ParseInt<int>(key, v);
  else if (key == "allow_schedule_override") c.allow_schedule_override = ParseBool(key, v);
  else if (key == "k_dist") c.k_dist = ParseInt<std::size_t>(key, v);
  else if (key == "k_recip") c.k_recip = ParseInt<std::size_t>(key, v);
  else if (key == "resample_window") c.resample_window = ParseInt<std::size_t>(key, v);
  else if (key == "sigma") {
    if (v == "median_sq") {
      c.sigma_mode = SigmaMode::kMedianSq;
    } else if (v == "neighbor_median_sq") {
      c.sigma_mode = SigmaMode::kNeighborMedianSq;
    } else {
      c.sigma_mode = SigmaMode::kFixed;
      c.sigma = ParseReal(key, v);
    }
  }
  else if (key == "dbscan_eps") c.dbscan_eps = ParseReal(key, v);
  else if (key == "dbscan_min_pts") c.dbscan_min_pts = ParseInt<std::size_t>(key, v);
  else if (key == "prop_max_iters") c.prop_max_iters = ParseInt<std::size_t>(key, v);
  else if (key == "prop_tol") c.prop_tol = ParseReal(key, v);
  else if (key == "refresh_alpha") c.refresh_alpha = ParseReal(key, v);
  else if (key == "strategy") c.strategy = ParseStrategy(v);
  else if (key == "max_iterations") c.max_iterations = ParseInt<int>(key, v);
  else if (key == "stop_when_pools_exhausted") c.stop_when_pools_exhausted = ParseBool(key, v);
  else if (key == "seed") c.seed = ParseInt<std::uint64_t>(key, v);
  else if (key == "max_manual") c.max_manual = ParseInt<std::size_t>(key, v);
  else if (key == "tpa_runs") c.tpa_runs = ParseInt<std::size_t>(key, v);
  else if (key == "kmeans_k") c.kmeans_k = ParseInt<std::size_t>(key, v);
  else if (key == "exclude_same_camera") c.exclude_same_camera = ParseBool(key, v);
  else if (key == "workers") c.workers = ParseInt<std::size_t>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig ParseConfig(std::istream& in) {
  RunConfig config;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      SetConfigValue(config, Trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  config.Validate();
  return config;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return ParseConfig(in);
}

std::string FormatConfig(const RunConfig& c) {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "s1 = " << OptionalCount(c.s1) << '\n'
      << "s2 = " << OptionalCount(c.s2) << '\n'
      << "s3 = " << OptionalCount(c.s3) << '\n'
      << "s4 = " << OptionalCount(c.s4) << '\n'
      << "t0 = " << c.t0 << '\n'
      << "allow_schedule_override = " << b(c.allow_schedule_override) << '\n'
      << "k_dist = " << c.k_dist << '\n'
      << "k_recip = " << c.k_recip << '\n'
      << "resample_window = " << c.resample_window << '\n'
      << "sigma = "
      << (c.sigma_mode == SigmaMode::kMedianSq           ? std::string("median_sq")
          : c.sigma_mode == SigmaMode::kNeighborMedianSq ? std::string("neighbor_median_sq")
                                                         : Real(c.sigma))
      << '\n'
      << "dbscan_eps = " << Real(c.dbscan_eps) << '\n'
      << "dbscan_min_pts = " << c.dbscan_min_pts << '\n'
      << "prop_max_iters = " << c.prop_max_iters << '\n'
      << "prop_tol = " << Real(c.prop_tol) << '\n'
      << "refresh_alpha = " << Real(c.refresh_alpha) << '\n'
      << "strategy = " << StrategyName(c.strategy) << '\n'
      << "max_iterations = " << c.max_iterations << '\n'
      << "stop_when_pools_exhausted = " << b(c.stop_when_pools_exhausted) << '\n'
      << "seed = " << c.seed << '\n'
      << "max_manual = " << c.max_manual << '\n'
      << "tpa_runs = " << c.tpa_runs << '\n'
      << "kmeans_k = " << c.kmeans_k << '\n'
      << "exclude_same_camera = " << b(c.exclude_same_camera) << '\n'
      << "workers = " << c.workers << '\n';
  return out.str();
}

void SaveConfig(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << FormatConfig(config);
}

}  // namespace areid
