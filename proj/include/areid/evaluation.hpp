#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "areid/dataset.hpp"
#include "areid/embedding.hpp"
#include "areid/label_state.hpp"
#include "areid/metric_core.hpp"

namespace areid {

struct TpaEstimate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation across runs
  std::vector<std::size_t> per_run;
};

// Simulated annotation cost of labeling the whole set by random pair
// queries: each run repeatedly annotates a uniformly random undecided
// tracklet pair from ground truth, with the same closure rules as
// LabelState, until every pair is decided. Throws std::invalid_argument when
// runs == 0.
TpaEstimate EstimateTpa(std::span<const IdentityId> tracklet_identities, std::size_t runs,
                        std::uint64_t seed);

// |must_link ∩ true-positive pairs| / |true-positive pairs|; 1 when the set
// has no true-positive pairs.
double GainedTpRatio(const LabelState& state, const GroundTruth& truth);
std::size_t GainedTpCount(const LabelState& state, const GroundTruth& truth);

struct BudgetReport {
  std::size_t tp_manual = 0;
  std::size_t auto_count = 0;
  double t_pa = 0.0;
  double ar = 0.0;
  double gained_tp_ratio = 0.0;
};

BudgetReport MakeBudgetReport(const LabelState& state, double t_pa, const GroundTruth& truth);

struct ReidOptions {
  // Drop gallery entries sharing both camera and identity with the query.
  bool exclude_same_camera = true;
};

struct ReidResult {
  // cmc[r] is the fraction of evaluated queries with a true match within the
  // first r + 1 results.
  std::vector<double> cmc;
  double mean_ap = 0.0;
  std::size_t evaluated_queries = 0;
  // Queries with no valid true match in the gallery; excluded from averages.
  std::vector<TrackletIndex> skipped_queries;

  // Rate at a 1-based rank, saturating at the longest ranking.
  double RankRate(std::size_t rank) const;
};

// Ranks gallery tracklets by ascending distance (ties by tracklet index),
// excluding the query itself.
ReidResult EvaluateReid(const DistanceCache& distances, const DatasetManifest& manifest,
                        const GroundTruth& truth, std::span<const TrackletIndex> queries,
                        std::span<const TrackletIndex> gallery, const ReidOptions& options = {});

// Same, computing the query × gallery set-to-set distances from `embeddings`.
ReidResult EvaluateReid(const DatasetManifest& manifest, const EmbeddingSnapshot& embeddings,
                        const GroundTruth& truth, std::span<const TrackletIndex> queries,
                        std::span<const TrackletIndex> gallery, std::size_t k_dist,
                        const ReidOptions& options = {});

struct IterationMetrics {
  int iteration = 0;
  std::size_t tp_manual = 0;
  std::size_t auto_count = 0;
  std::size_t already_known = 0;
  std::size_t cluster_count = 0;
  std::optional<double> ar;
  std::optional<double> gained_tp_ratio;
  std::optional<double> rank1;
  std::optional<double> rank5;
  std::optional<double> rank10;
  std::optional<double> rank20;
  std::optional<double> map;

  bool operator==(const IterationMetrics&) const = default;
};

// One JSON object per line; absent values are written as null.
std::string FormatMetricsLine(const IterationMetrics& m);
IterationMetrics ParseMetricsLine(const std::string& line);
std::vector<IterationMetrics> LoadMetrics(std::istream& in);

// Wide CSV for plotting curves. `prefix` columns (name, value) are repeated
// at the start of every row.
void WriteMetricsTable(std::ostream& out, const std::vector<IterationMetrics>& history,
                       const std::vector<std::pair<std::string, std::string>>& prefix = {},
                       bool header = true);

}  // namespace areid
