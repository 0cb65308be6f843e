#include "areid/metric_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace areid {

PairKey::PairKey(TrackletIndex a, TrackletIndex b, ViewClass view) : view_(view) {
  if (a == b) throw std::invalid_argument("a pair needs two distinct tracklets");
  a_ = std::min(a, b);
  b_ = std::max(a, b);
}

PairKey MakePair(const DatasetManifest& manifest, TrackletIndex a, TrackletIndex b) {
  const bool same = manifest.tracklet_camera(a) == manifest.tracklet_camera(b);
  return PairKey(a, b, same ? ViewClass::kSameView : ViewClass::kCrossView);
}

namespace {

double SquaredDistance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - y[d];
    s += diff * diff;
  }
  return s;
}

// Mean of the square roots of the k smallest entries; reorders `squared`.
double MeanOfSmallest(std::vector<double>& squared, std::size_t k) {
  k = std::min(k, squared.size());
  constexpr std::size_t kSmall = 16;
  double sum = 0.0;
  if (k <= kSmall) {
    // Insertion into a sorted buffer; cheaper than partial_sort for small k.
    double best[kSmall];
    std::size_t held = 0;
    for (double v : squared) {
      if (held == k && !(v < best[k - 1])) continue;
      std::size_t p = held < k ? held++ : k - 1;
      while (p > 0 && best[p - 1] > v) {
        best[p] = best[p - 1];
        --p;
      }
      best[p] = v;
    }
    for (std::size_t i = 0; i < k; ++i) sum += std::sqrt(best[i]);
  } else {
    std::partial_sort(squared.begin(), squared.begin() + static_cast<std::ptrdiff_t>(k),
                      squared.end());
    for (std::size_t i = 0; i < k; ++i) sum += std::sqrt(squared[i]);
  }
  return sum / static_cast<double>(k);
}

}  // namespace

double SetToSetDistance(std::span<const std::span<const double>> p,
                        std::span<const std::span<const double>> q, std::size_t k) {
  if (p.empty() || q.empty()) throw std::invalid_argument("set-to-set distance of an empty set");
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  std::vector<double> squared;
  squared.reserve(p.size() * q.size());
  for (const auto& x : p) {
    for (const auto& y : q) {
      if (x.size() != y.size()) throw std::invalid_argument("feature dimension mismatch");
      squared.push_back(SquaredDistance(x, y));
    }
  }
  return MeanOfSmallest(squared, k);
}

DistanceCache::DistanceCache(std::size_t tracklets, std::uint64_t stamp)
    : n_(tracklets), stamp_(stamp), values_(tracklets < 2 ? 0 : tracklets * (tracklets - 1) / 2) {}

DistanceCache ComputeDistances(const DatasetManifest& manifest, const EmbeddingSnapshot& embeddings,
                               std::size_t k, std::size_t workers) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  if (embeddings.rows() != manifest.image_count()) {
    throw std::invalid_argument("embedding snapshot does not cover every image");
  }
  const auto& tracklets = manifest.tracklets();
  const std::size_t n = tracklets.size();
  DistanceCache cache(n, embeddings.stamp());

  // Features packed tracklet by tracklet and stored dimension-major, so the
  // inner loop runs across candidate images. Each squared distance still sums
  // dimensions in order, matching SetToSetDistance bit for bit.
  const std::size_t dim = embeddings.dimension();
  std::vector<std::size_t> start(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) start[i + 1] = start[i] + tracklets[i].image_rows.size();
  const std::size_t total = start[n];
  std::vector<double> packed(dim * total);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < tracklets[i].image_rows.size(); ++r) {
      const auto x = embeddings.row(tracklets[i].image_rows[r]);
      for (std::size_t d = 0; d < dim; ++d) packed[d * total + start[i] + r] = x[d];
    }
  }

  auto work = [&](std::size_t first_row, std::size_t stride) {
    std::vector<double> to_rest, squared;
    for (std::size_t i = first_row; i + 1 < n; i += stride) {
      const std::size_t own = start[i + 1] - start[i];
      const std::size_t rest = total - start[i + 1];
      // to_rest[a * rest + c]: image a of tracklet i against image c after it.
      to_rest.assign(own * rest, 0.0);
      constexpr std::size_t kBlock = 256;
      for (std::size_t c0 = 0; c0 < rest; c0 += kBlock) {
        const std::size_t c1 = std::min(rest, c0 + kBlock);
        for (std::size_t a = 0; a < own; ++a) {
          double* out = to_rest.data() + a * rest;
          for (std::size_t d = 0; d < dim; ++d) {
            const double x = packed[d * total + start[i] + a];
            const double* y = packed.data() + d * total + start[i + 1];
            for (std::size_t c = c0; c < c1; ++c) {
              const double diff = x - y[c];
              out[c] += diff * diff;
            }
          }
        }
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        squared.clear();
        const std::size_t first = start[j] - start[i + 1];
        const std::size_t count = start[j + 1] - start[j];
        for (std::size_t a = 0; a < own; ++a) {
          const double* row = to_rest.data() + a * rest + first;
          squared.insert(squared.end(), row, row + count);
        }
        cache.set(static_cast<TrackletIndex>(i), static_cast<TrackletIndex>(j),
                  MeanOfSmallest(squared, k));
      }
    }
  };

  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  return cache;
}

DistancePools BuildDistancePools(const DatasetManifest& manifest,
                                 const EmbeddingSnapshot& embeddings, std::size_t k,
                                 const PoolOptions& options) {
  DistancePools pools;
  pools.cache = ComputeDistances(manifest, embeddings, k, options.workers);
  const std::size_t n = manifest.tracklet_count();
  for (TrackletIndex i = 0; i < n; ++i) {
    for (TrackletIndex j = i + 1; j < n; ++j) {
      const PairKey key = MakePair(manifest, i, j);
      auto& pool = key.view() == ViewClass::kSameView ? pools.same_view : pools.cross_view;
      pool.push_back({key, pools.cache.at(i, j)});
    }
  }
  for (auto* pool : {&pools.same_view, &pools.cross_view}) {
    if (options.top_m && *options.top_m < pool->size()) {
      const auto mid = pool->begin() + static_cast<std::ptrdiff_t>(*options.top_m);
      std::partial_sort(pool->begin(), mid, pool->end(), PoolOrder);
      pool->erase(mid, pool->end());
    } else {
      std::sort(pool->begin(), pool->end(), PoolOrder);
    }
  }
  return pools;
}

std::vector<PairDistance> MergePools(const DistancePools& pools) {
  std::vector<PairDistance> merged;
  merged.reserve(pools.same_view.size() + pools.cross_view.size());
  std::merge(pools.same_view.begin(), pools.same_view.end(), pools.cross_view.begin(),
             pools.cross_view.end(), std::back_inserter(merged), PoolOrder);
  return merged;
}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
constexpr char kCacheMagic[8] = {'A', 'R', 'D', 'C', 'A', 'C', 'H', '1'};

template <typename T>
void Mix(std::uint64_t& h, const T& value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
}

template <typename T>
void WritePod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated distance cache file");
  return v;
}

}  // namespace

std::uint64_t ManifestHash(const DatasetManifest& manifest) {
  std::uint64_t h = kFnvOffset;
  Mix(h, manifest.dimension());
  for (const ImageRecord& rec : manifest.images()) {
    Mix(h, rec.image_id);
    Mix(h, rec.tracklet_id);
    Mix(h, rec.camera_id);
    for (double x : rec.feature) Mix(h, x);
  }
  return h;
}

void SaveDistanceCache(const std::filesystem::path& path, const DistanceCache& cache,
                       std::uint64_t manifest_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write distance cache " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  WritePod(out, manifest_hash);
  WritePod(out, cache.stamp());
  WritePod(out, static_cast<std::uint64_t>(cache.size()));
  out.write(reinterpret_cast<const char*>(cache.condensed().data()),
            static_cast<std::streamsize>(cache.condensed().size() * sizeof(double)));
}

std::optional<DistanceCache> LoadDistanceCache(const std::filesystem::path& path,
                                               std::uint64_t manifest_hash, std::uint64_t stamp) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof(kCacheMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a distance cache file: " + path.string());
  }
  const auto hash = ReadPod<std::uint64_t>(in);
  const auto file_stamp = ReadPod<std::uint64_t>(in);
  const auto n = ReadPod<std::uint64_t>(in);
  if (hash != manifest_hash || file_stamp != stamp) return std::nullopt;
  DistanceCache cache(n, file_stamp);
  in.read(reinterpret_cast<char*>(cache.condensed().data()),
          static_cast<std::streamsize>(cache.condensed().size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated distance cache file");
  return cache;
}

}  // namespace areid
