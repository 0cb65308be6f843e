#include "areid/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace areid {

ScheduleCounts CountsForIteration(int t, const SamplingSchedule& schedule) {
  if (t < 1) throw std::invalid_argument("iterations are numbered from 1");
  if (t < schedule.t0) return {schedule.s1, schedule.s3};
  return {schedule.s2, schedule.s4};
}

SamplingSchedule DefaultSchedule(std::size_t same_view_pairs, std::size_t cross_view_pairs) {
  auto fraction = [](std::size_t n, double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
  };
  SamplingSchedule s;
  s.s1 = fraction(same_view_pairs, 0.002);
  s.s3 = fraction(cross_view_pairs, 0.0005);
  s.s2 = std::max<std::size_t>(1, s.s1 / 2);
  s.s4 = 4 * s.s3;
  s.t0 = 5;
  return s;
}

namespace {

std::size_t TakeUndecided(const std::vector<PairDistance>& pool, const LabelState& state,
                          std::size_t count, std::vector<PairDistance>& out) {
  std::size_t taken = 0;
  for (const PairDistance& pd : pool) {
    if (taken == count) break;
    if (state.graph().IsDecided(pd.pair.a(), pd.pair.b())) continue;
    out.push_back(pd);
    ++taken;
  }
  return taken;
}

void SortBatch(CandidateBatch& batch) {
  std::stable_sort(batch.pairs.begin(), batch.pairs.end(),
                   [](const PairDistance& x, const PairDistance& y) {
                     if (x.pair.view() != y.pair.view()) return x.pair.view() < y.pair.view();
                     return PoolOrder(x, y);
                   });
  batch.same_view_selected = static_cast<std::size_t>(
      std::count_if(batch.pairs.begin(), batch.pairs.end(), [](const PairDistance& p) {
        return p.pair.view() == ViewClass::kSameView;
      }));
  batch.cross_view_selected = batch.pairs.size() - batch.same_view_selected;
}

}  // namespace

CandidateBatch SelectViewAware(const DistancePools& pools, const LabelState& state, int t,
                               const SamplingSchedule& schedule) {
  const ScheduleCounts counts = CountsForIteration(t, schedule);
  CandidateBatch batch;
  batch.iteration = t;
  batch.same_view_selected = TakeUndecided(pools.same_view, state, counts.m1, batch.pairs);
  batch.cross_view_selected = TakeUndecided(pools.cross_view, state, counts.m2, batch.pairs);
  return batch;
}

CandidateBatch SelectMixedView(const DistancePools& pools, const LabelState& state, int t,
                               const SamplingSchedule& schedule) {
  const ScheduleCounts counts = CountsForIteration(t, schedule);
  CandidateBatch batch;
  batch.iteration = t;
  TakeUndecided(MergePools(pools), state, counts.m1 + counts.m2, batch.pairs);
  SortBatch(batch);
  return batch;
}

CandidateBatch SelectRandom(const DistanceCache& distances, const LabelState& state,
                            std::size_t budget, std::uint64_t seed, int t) {
  const auto& graph = state.graph();
  const std::size_t n = state.tracklet_count();
  std::vector<PairKey> undecided;
  for (TrackletIndex a = 0; a < n; ++a) {
    for (TrackletIndex b = a + 1; b < n; ++b) {
      if (!graph.IsDecided(a, b)) undecided.push_back(graph.Pair(a, b));
    }
  }
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(budget, undecided.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + UniformBelow(rng, undecided.size() - i);
    std::swap(undecided[i], undecided[j]);
  }
  CandidateBatch batch;
  batch.iteration = t;
  batch.pairs.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    batch.pairs.push_back({undecided[i], distances.at(undecided[i])});
  }
  SortBatch(batch);
  return batch;
}

namespace {

double Squared(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) s += (x[d] - y[d]) * (x[d] - y[d]);
  return s;
}

double UnitReal(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

KMeansSelection SelectKMeans(const DatasetManifest& manifest, const EmbeddingSnapshot& embeddings,
                             std::span<const bool> labeled, std::size_t k, std::size_t budget,
                             std::uint64_t seed, const KMeansOptions& options) {
  const std::size_t n = manifest.tracklet_count();
  const std::size_t dim = embeddings.dimension();
  if (k == 0) throw std::invalid_argument("k-means needs k >= 1");
  if (k > n) throw std::invalid_argument("k-means k exceeds the tracklet count");
  if (!labeled.empty() && labeled.size() != n) {
    throw std::invalid_argument("labeled mask must cover every tracklet");
  }

  // Tracklet mean features.
  std::vector<double> points(n * dim, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& rows = manifest.tracklets()[t].image_rows;
    for (std::size_t r : rows) {
      auto f = embeddings.row(r);
      for (std::size_t d = 0; d < dim; ++d) points[t * dim + d] += f[d];
    }
    for (std::size_t d = 0; d < dim; ++d) points[t * dim + d] /= static_cast<double>(rows.size());
  }
  auto point = [&](std::size_t t) { return std::span<const double>(points.data() + t * dim, dim); };

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<double> centers;
  centers.reserve(k * dim);
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  auto add_center = [&](std::size_t t) {
    chosen[t] = true;
    auto p = point(t);
    centers.insert(centers.end(), p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], Squared(point(i), p));
  };
  add_center(UniformBelow(rng, n));
  while (centers.size() < k * dim) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = UnitReal(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (nearest[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail
        for (std::size_t i = n; i-- > 0;) {
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[UniformBelow(rng, free.size())];
    }
    add_center(pick);
  }
  auto center = [&](std::size_t c) { return std::span<const double>(centers.data() + c * dim, dim); };

  // Lloyd iterations.
  std::vector<std::size_t> assign(n, 0);
  auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = Squared(point(i), center(c));
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
  };
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    assign_all();
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i] * dim + d] += points[i * dim + d];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      double shift = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double updated = sums[c * dim + d] / static_cast<double>(counts[c]);
        shift += (updated - centers[c * dim + d]) * (updated - centers[c * dim + d]);
        centers[c * dim + d] = updated;
      }
      moved = std::max(moved, std::sqrt(shift));
    }
    if (moved < options.tolerance) break;
  }
  assign_all();

  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labeled.empty() && labeled[i]) continue;
    ranked.emplace_back(std::sqrt(Squared(point(i), center(assign[i]))), i);
  }
  std::sort(ranked.begin(), ranked.end());
  KMeansSelection out;
  for (std::size_t i = 0; i < std::min(budget, ranked.size()); ++i) {
    out.tracklets.push_back(static_cast<TrackletIndex>(ranked[i].second));
    out.center_distance.push_back(ranked[i].first);
    out.assignment.push_back(assign[ranked[i].second]);
  }
  return out;
}

}  // namespace areid
