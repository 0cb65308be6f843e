#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "areid/dataset.hpp"
#include "areid/embedding.hpp"

namespace areid {

enum class ViewClass : std::uint8_t { kSameView, kCrossView };

// Unordered tracklet pair stored as (a < b). Identity and ordering use only
// (a, b); the view class is derived from the tracklets' cameras.
class PairKey {
 public:
  PairKey() = default;
  PairKey(TrackletIndex a, TrackletIndex b, ViewClass view);

  TrackletIndex a() const { return a_; }
  TrackletIndex b() const { return b_; }
  ViewClass view() const { return view_; }

  friend bool operator==(const PairKey& x, const PairKey& y) {
    return x.a_ == y.a_ && x.b_ == y.b_;
  }
  friend std::strong_ordering operator<=>(const PairKey& x, const PairKey& y) {
    if (auto c = x.a_ <=> y.a_; c != 0) return c;
    return x.b_ <=> y.b_;
  }

 private:
  TrackletIndex a_ = 0;
  TrackletIndex b_ = 1;
  ViewClass view_ = ViewClass::kSameView;
};

struct PairKeyHash {
  std::size_t operator()(const PairKey& p) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{p.a()} << 32) | p.b());
  }
};

PairKey MakePair(const DatasetManifest& manifest, TrackletIndex a, TrackletIndex b);

// Mean of the K smallest Euclidean distances over all |P|·|Q| image pairs.
// When K exceeds |P|·|Q| every pair is averaged. Throws std::invalid_argument
// on an empty set or K == 0.
double SetToSetDistance(std::span<const std::span<const double>> p,
                        std::span<const std::span<const double>> q, std::size_t k);

// Dense symmetric tracklet distance table (condensed upper triangle).
class DistanceCache {
 public:
  DistanceCache() = default;
  DistanceCache(std::size_t tracklets, std::uint64_t stamp);

  std::size_t size() const { return n_; }
  std::uint64_t stamp() const { return stamp_; }

  double at(TrackletIndex i, TrackletIndex j) const {
    if (i == j) return 0.0;
    return values_[Offset(i, j)];
  }
  double at(const PairKey& p) const { return values_[Offset(p.a(), p.b())]; }
  void set(TrackletIndex i, TrackletIndex j, double d) { values_[Offset(i, j)] = d; }

  const std::vector<double>& condensed() const { return values_; }
  std::vector<double>& condensed() { return values_; }

  bool operator==(const DistanceCache&) const = default;

 private:
  std::size_t Offset(TrackletIndex i, TrackletIndex j) const {
    if (i > j) std::swap(i, j);
    // Row i of the strict upper triangle starts after i rows of decreasing length.
    return static_cast<std::size_t>(i) * (2 * n_ - i - 1) / 2 + (j - i - 1);
  }

  std::size_t n_ = 0;
  std::uint64_t stamp_ = 0;
  std::vector<double> values_;
};

struct PairDistance {
  PairKey pair;
  double distance = 0.0;

  bool operator==(const PairDistance&) const = default;
};

// Ascending distance, ties by (a, b).
inline bool PoolOrder(const PairDistance& x, const PairDistance& y) {
  if (x.distance != y.distance) return x.distance < y.distance;
  return x.pair < y.pair;
}

struct PoolOptions {
  // When set, each pool keeps only its `top_m` smallest pairs.
  std::optional<std::size_t> top_m;
  // Worker threads for the pairwise pass; results do not depend on this.
  std::size_t workers = 1;
};

struct DistancePools {
  DistanceCache cache;
  std::vector<PairDistance> same_view;
  std::vector<PairDistance> cross_view;
};

// Full pairwise tracklet distance table. Deterministic and independent of
// `workers`.
DistanceCache ComputeDistances(const DatasetManifest& manifest, const EmbeddingSnapshot& embeddings,
                               std::size_t k, std::size_t workers = 1);

DistancePools BuildDistancePools(const DatasetManifest& manifest,
                                 const EmbeddingSnapshot& embeddings, std::size_t k,
                                 const PoolOptions& options = {});

// Both pools merged into one ascending list (view class ignored).
std::vector<PairDistance> MergePools(const DistancePools& pools);

// FNV-1a over ids, cameras and features; keys the on-disk distance cache.
std::uint64_t ManifestHash(const DatasetManifest& manifest);

void SaveDistanceCache(const std::filesystem::path& path, const DistanceCache& cache,
                       std::uint64_t manifest_hash);
// Returns nullopt when the file is absent or keyed to a different
// (manifest hash, stamp); throws on a corrupt file.
std::optional<DistanceCache> LoadDistanceCache(const std::filesystem::path& path,
                                               std::uint64_t manifest_hash, std::uint64_t stamp);

}  // namespace areid
