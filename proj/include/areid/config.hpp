#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "areid/sampler.hpp"

namespace areid {

enum class Strategy : std::uint8_t {
  kViewAwareResample,
  kViewAwareOnly,
  kMixedView,
  kRandom,
  kKMeans,
};

const char* StrategyName(Strategy s);  // "view_aware_resample", ...
Strategy ParseStrategy(const std::string& s);

enum class SigmaMode : std::uint8_t {
  kMedianSq,          // median of all squared tracklet distances
  kNeighborMedianSq,  // median squared distance to the K_recip-th neighbour
  kFixed,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // Unset schedule counts are derived from the pool sizes (see
  // DefaultSchedule).
  std::optional<std::size_t> s1, s2, s3, s4;
  int t0 = 5;
  // Accept schedules that are not easy-to-hard (s1 <= s3 or s4 <= s2) with a
  // warning instead of an error.
  bool allow_schedule_override = false;
  std::size_t k_dist = 3;
  std::size_t k_recip = 5;
  // Candidates scanned per pool slot by the resampling strategy.
  std::size_t resample_window = 2;
  SigmaMode sigma_mode = SigmaMode::kNeighborMedianSq;
  double sigma = 1.0;  // used when sigma_mode is kFixed
  double dbscan_eps = 0.01;
  std::size_t dbscan_min_pts = 2;
  std::size_t prop_max_iters = 50;
  double prop_tol = 1e-6;
  double refresh_alpha = 0.3;
  Strategy strategy = Strategy::kViewAwareResample;
  int max_iterations = 50;
  bool stop_when_pools_exhausted = true;
  std::uint64_t seed = 0;
  // Stop once this many manual annotations were charged; 0 disables.
  std::size_t max_manual = 0;
  std::size_t tpa_runs = 10;
  // Cluster count for the k-means baseline; 0 picks round(sqrt(C)).
  std::size_t kmeans_k = 0;
  bool exclude_same_camera = true;
  std::size_t workers = 1;

  // Throws ConfigError on an out-of-range field.
  void Validate() const;

  // Fills unset counts from DefaultSchedule. Throws ConfigError when the
  // result is not easy-to-hard and the override flag is off.
  SamplingSchedule ResolveSchedule(std::size_t same_view_pairs,
                                   std::size_t cross_view_pairs) const;

  bool operator==(const RunConfig&) const = default;
};

// Every recognised key, in file order.
const std::vector<std::string>& ConfigKeys();

// Sets one key from its text form. Throws ConfigError on unknown keys or
// unparsable values.
void SetConfigValue(RunConfig& config, const std::string& key, const std::string& value);

// Flat "key = value" document; '#' starts a comment. Unknown keys are errors.
RunConfig ParseConfig(std::istream& in);
RunConfig LoadConfig(const std::filesystem::path& path);
std::string FormatConfig(const RunConfig& config);
void SaveConfig(const RunConfig& config, const std::filesystem::path& path);

}  // namespace areid
