#include "areid/sampler.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "test_support.hpp"

namespace areid {
namespace {

using testing::RandomManifest;

struct Fixture {
  DatasetManifest manifest;
  DistancePools pools;
  LabelState state;
};

// Random manifest, its pools, and a label state with a few random verdicts.
Fixture MakeFixture(std::uint64_t seed, std::size_t verdicts) {
  Fixture f;
  do {
    f.manifest = RandomManifest(seed++, 8);
  } while (f.manifest.camera_count() < 2);
  f.pools = BuildDistancePools(f.manifest, EmbeddingSnapshot::FromManifest(f.manifest), 2);
  f.state = LabelState::Init(f.manifest);
  const GroundTruth truth = ExtractGroundTruth(f.manifest);
  std::mt19937_64 rng(seed);
  const std::size_t n = f.manifest.tracklet_count();
  for (std::size_t i = 0; i < verdicts; ++i) {
    TrackletIndex a = rng() % n, b = rng() % n;
    if (a == b || f.state.graph().IsDecided(a, b)) continue;
    f.state.Apply(MakePair(f.manifest, a, b),
                  truth.SameIdentity(a, b) ? Verdict::kMatch : Verdict::kNoMatch);
  }
  return f;
}

std::vector<PairDistance> UndecidedPrefix(const std::vector<PairDistance>& pool,
                                          const LabelState& s, std::size_t count) {
  std::vector<PairDistance> out;
  for (const auto& pd : pool) {
    if (out.size() == count) break;
    if (!s.graph().IsDecided(pd.pair.a(), pd.pair.b())) out.push_back(pd);
  }
  return out;
}

TEST(ViewAwareTest, TakesUndecidedHeadOfEachPool) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = MakeFixture(seed * 7, 30);
    const SamplingSchedule sched{6, 2, 3, 9, 3};
    for (int t : {1, 2, 3, 8}) {
      const CandidateBatch b = SelectViewAware(f.pools, f.state, t, sched);
      const ScheduleCounts c = CountsForIteration(t, sched);
      auto want = UndecidedPrefix(f.pools.same_view, f.state, c.m1);
      const auto cross = UndecidedPrefix(f.pools.cross_view, f.state, c.m2);
      EXPECT_EQ(b.same_view_selected, want.size());
      EXPECT_EQ(b.cross_view_selected, cross.size());
      want.insert(want.end(), cross.begin(), cross.end());
      EXPECT_EQ(b.pairs, want);
      EXPECT_EQ(b.iteration, t);
    }
  }
}

TEST(ViewAwareTest, ShortPoolsGiveShortBatches) {
  const Fixture f = MakeFixture(3, 0);
  const SamplingSchedule sched{100000, 1, 1, 100000, 2};
  const CandidateBatch b = SelectViewAware(f.pools, f.state, 1, sched);
  EXPECT_EQ(b.same_view_selected, f.pools.same_view.size());
  EXPECT_EQ(b.cross_view_selected, 1u);
}

TEST(MixedViewTest, TakesHeadOfMergedPool) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = MakeFixture(seed * 5 + 1, 20);
    const SamplingSchedule sched{4, 2, 2, 5, 2};
    for (int t : {1, 4}) {
      const CandidateBatch b = SelectMixedView(f.pools, f.state, t, sched);
      const ScheduleCounts c = CountsForIteration(t, sched);
      std::vector<PairDistance> merged = f.pools.same_view;
      merged.insert(merged.end(), f.pools.cross_view.begin(), f.pools.cross_view.end());
      std::sort(merged.begin(), merged.end(), PoolOrder);
      auto want = UndecidedPrefix(merged, f.state, c.m1 + c.m2);
      std::stable_partition(want.begin(), want.end(), [](const PairDistance& p) {
        return p.pair.view() == ViewClass::kSameView;
      });
      EXPECT_EQ(b.pairs, want);
      EXPECT_EQ(b.same_view_selected + b.cross_view_selected, want.size());
    }
  }
}

TEST(RandomSelectionTest, OnlyDistinctUndecidedPairs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = MakeFixture(seed, 25);
    const CandidateBatch b = SelectRandom(f.pools.cache, f.state, 12, seed);
    std::set<std::pair<TrackletIndex, TrackletIndex>> seen;
    for (const auto& pd : b.pairs) {
      EXPECT_FALSE(f.state.graph().IsDecided(pd.pair.a(), pd.pair.b()));
      EXPECT_TRUE(seen.insert({pd.pair.a(), pd.pair.b()}).second);
      EXPECT_EQ(pd.distance, f.pools.cache.at(pd.pair));
    }
    const std::size_t c = f.manifest.tracklet_count();
    const std::size_t open = c * (c - 1) / 2 - f.state.graph().decided_count();
    EXPECT_EQ(b.pairs.size(), std::min<std::size_t>(12, open));
    EXPECT_EQ(SelectRandom(f.pools.cache, f.state, 12, seed), b);
  }
}

// Each undecided pair is included with probability budget / open.
TEST(RandomSelectionTest, InclusionIsUniform) {
  const Fixture f = MakeFixture(42, 10);
  const std::size_t c = f.manifest.tracklet_count();
  const std::size_t open = c * (c - 1) / 2 - f.state.graph().decided_count();
  const std::size_t budget = open / 4 + 1;
  const int trials = 4000;
  std::map<std::pair<TrackletIndex, TrackletIndex>, int> hits;
  for (int s = 0; s < trials; ++s) {
    for (const auto& pd : SelectRandom(f.pools.cache, f.state, budget, 1000 + s).pairs) {
      ++hits[{pd.pair.a(), pd.pair.b()}];
    }
  }
  EXPECT_EQ(hits.size(), open);
  const double p = static_cast<double>(budget) / static_cast<double>(open);
  const double mean = trials * p;
  const double sd = std::sqrt(trials * p * (1 - p));
  for (const auto& [pair, h] : hits) EXPECT_NEAR(h, mean, 5 * sd);
}

TEST(KMeansTest, SkipsLabeledAndRanksByCenterDistance) {
  const DatasetManifest m = RandomManifest(17, 8);
  const EmbeddingSnapshot e = EmbeddingSnapshot::FromManifest(m);
  const std::size_t n = m.tracklet_count();
  std::unique_ptr<bool[]> labeled(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) labeled[i] = i % 3 == 0;
  const std::span<const bool> span(labeled.get(), n);

  const KMeansSelection sel = SelectKMeans(m, e, span, 3, 5, 11);
  EXPECT_EQ(sel.tracklets.size(), std::min<std::size_t>(5, n - (n + 2) / 3));
  EXPECT_EQ(sel.center_distance.size(), sel.tracklets.size());
  EXPECT_TRUE(std::is_sorted(sel.center_distance.begin(), sel.center_distance.end()));
  std::set<TrackletIndex> distinct(sel.tracklets.begin(), sel.tracklets.end());
  EXPECT_EQ(distinct.size(), sel.tracklets.size());
  for (TrackletIndex t : sel.tracklets) EXPECT_FALSE(labeled[t]);
  for (std::size_t a : sel.assignment) EXPECT_LT(a, 3u);

  const KMeansSelection again = SelectKMeans(m, e, span, 3, 5, 11);
  EXPECT_EQ(again.tracklets, sel.tracklets);
  EXPECT_THROW(SelectKMeans(m, e, span, 0, 5, 11), std::invalid_argument);
  EXPECT_THROW(SelectKMeans(m, e, span, n + 1, 5, 11), std::invalid_argument);
}

TEST(KMeansTest, SeparatedBlobsGiveExactCenters) {
  // Two tight groups; with k = 2 every tracklet sits at distance 0 from its
  // center, ties broken by index.
  const DatasetManifest m = testing::MakeManifest(
      1, 1, {{1, 0, 0, {{0}}}, {2, 0, 0, {{0}}}, {3, 0, 1, {{50}}}, {4, 0, 1, {{50}}}});
  std::unique_ptr<bool[]> none(new bool[4]{false, false, false, false});
  const KMeansSelection sel =
      SelectKMeans(m, EmbeddingSnapshot::FromManifest(m), {none.get(), 4}, 2, 4, 3);
  EXPECT_EQ(sel.tracklets, (std::vector<TrackletIndex>{0, 1, 2, 3}));
  for (double d : sel.center_distance) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(sel.assignment[0], sel.assignment[1]);
  EXPECT_NE(sel.assignment[0], sel.assignment[2]);
}

TEST(UniformBelowTest, CoversRange) {
  std::mt19937_64 rng(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[UniformBelow(rng, 7)];
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
}

}  // namespace
}  // namespace areid
