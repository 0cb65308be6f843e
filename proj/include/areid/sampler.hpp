#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "areid/dataset.hpp"
#include "areid/embedding.hpp"
#include "areid/label_state.hpp"
#include "areid/metric_core.hpp"

namespace areid {

// Per-iteration selection counts: m1 = s1 (t < t0) else s2 from same-view
// pairs, m2 = s3 (t < t0) else s4 from cross-view pairs.
struct SamplingSchedule {
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  std::size_t s3 = 0;
  std::size_t s4 = 0;
  int t0 = 5;

  // True when s1 > s3 and s4 > s2 (same-view first, cross-view later).
  bool IsEasyToHard() const { return s1 > s3 && s4 > s2; }

  bool operator==(const SamplingSchedule&) const = default;
};

struct ScheduleCounts {
  std::size_t m1 = 0;
  std::size_t m2 = 0;

  bool operator==(const ScheduleCounts&) const = default;
};

ScheduleCounts CountsForIteration(int t, const SamplingSchedule& schedule);

// s1 = max(1, round(0.2% of same-view pairs)), s3 = max(1, round(0.05% of
// cross-view pairs)), s2 = max(1, s1 / 2), s4 = 4·s3, t0 = 5.
SamplingSchedule DefaultSchedule(std::size_t same_view_pairs, std::size_t cross_view_pairs);

struct CandidateBatch {
  // Same-view candidates first, then cross-view, each ascending by distance.
  std::vector<PairDistance> pairs;
  int iteration = 0;
  std::size_t same_view_selected = 0;
  std::size_t cross_view_selected = 0;

  bool operator==(const CandidateBatch&) const = default;
};

// Smallest undecided pairs from each pool per the schedule; short pools give
// short batches.
CandidateBatch SelectViewAware(const DistancePools& pools, const LabelState& state, int t,
                               const SamplingSchedule& schedule);

// The m1 + m2 smallest undecided pairs of the merged pool, ignoring views.
CandidateBatch SelectMixedView(const DistancePools& pools, const LabelState& state, int t,
                               const SamplingSchedule& schedule);

// Uniform sample without replacement from all undecided pairs.
CandidateBatch SelectRandom(const DistanceCache& distances, const LabelState& state,
                            std::size_t budget, std::uint64_t seed, int t = 0);

struct KMeansSelection {
  // Selected tracklets, ascending by distance to their assigned center.
  std::vector<TrackletIndex> tracklets;
  std::vector<double> center_distance;
  std::vector<std::size_t> assignment;  // center per selected tracklet
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

// Lloyd's k-means with k-means++ seeding on tracklet mean features. Ranks the
// tracklets not marked in `labeled` by distance to their center (ties by
// index) and returns the first `budget`. Throws std::invalid_argument when
// k == 0 or k > C.
KMeansSelection SelectKMeans(const DatasetManifest& manifest, const EmbeddingSnapshot& embeddings,
                             std::span<const bool> labeled, std::size_t k, std::size_t budget,
                             std::uint64_t seed, const KMeansOptions& options = {});

// Uniform integer in [0, bound) from a 64-bit engine, independent of the
// standard library's distribution implementations.
template <typename Engine>
std::uint64_t UniformBelow(Engine& engine, std::uint64_t bound) {
  const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % bound));
  for (;;) {
    const std::uint64_t x = engine();
    if (x < limit) return x % bound;
  }
}

}  // namespace areid
