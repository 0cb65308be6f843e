#include "areid/label_state.hpp"

#include <gtest/gtest.h>

#include <random>

#include "areid/dbscan.hpp"
#include "test_support.hpp"

namespace areid {
namespace {

using testing::ClosureOracle;
using testing::MakeManifest;

DatasetManifest Line(std::size_t n, std::size_t cameras = 2) {
  std::vector<testing::TrackletSpec> specs;
  for (std::size_t i = 0; i < n; ++i) {
    specs.push_back({static_cast<TrackletId>(i + 1), static_cast<CameraId>(i % cameras),
                     static_cast<IdentityId>(i), {{static_cast<double>(i)}}});
  }
  return MakeManifest(1, cameras, specs);
}

std::set<std::pair<std::size_t, std::size_t>> AsSet(const std::vector<PairKey>& pairs) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : pairs) out.insert({p.a(), p.b()});
  return out;
}

TEST(LabelStateTest, InitIsSingletons) {
  const DatasetManifest m = Line(4);
  const LabelState s = LabelState::Init(m);
  EXPECT_EQ(s.assignments(), (std::vector<ClusterId>{1, 2, 3, 4}));
  EXPECT_EQ(s.cluster_count(), 4u);
  EXPECT_EQ(s.generation(), 0u);
  EXPECT_EQ(s.graph().decided_count(), 0u);
}

TEST(LabelStateTest, PositiveClosure) {
  const DatasetManifest m = Line(4);
  LabelState s = LabelState::Init(m);
  EXPECT_TRUE(s.Apply(MakePair(m, 0, 1), Verdict::kMatch).auto_annotated.empty());
  const auto out = s.Apply(MakePair(m, 1, 2), Verdict::kMatch);
  ASSERT_EQ(out.auto_annotated.size(), 1u);
  EXPECT_EQ(out.auto_annotated[0].pair, MakePair(m, 0, 2));
  EXPECT_EQ(out.auto_annotated[0].verdict, Verdict::kMatch);
  EXPECT_TRUE(s.graph().IsMustLink(0, 2));
  EXPECT_EQ(s.cluster_of(0), s.cluster_of(2));
  EXPECT_EQ(s.manual_count(), 2u);
  EXPECT_EQ(s.auto_count(), 1u);
}

TEST(LabelStateTest, NegativePropagatesAcrossComponent) {
  const DatasetManifest m = Line(4);
  LabelState s = LabelState::Init(m);
  s.Apply(MakePair(m, 0, 1), Verdict::kMatch);
  const auto out = s.Apply(MakePair(m, 1, 3), Verdict::kNoMatch);
  ASSERT_EQ(out.auto_annotated.size(), 1u);
  EXPECT_EQ(out.auto_annotated[0].pair, MakePair(m, 0, 3));
  EXPECT_EQ(out.auto_annotated[0].verdict, Verdict::kNoMatch);
  // Joining 2 to {0, 1} inherits the negative against 3.
  const auto join = s.Apply(MakePair(m, 2, 0), Verdict::kMatch);
  std::set<std::pair<std::size_t, std::size_t>> got;
  for (const auto& d : join.auto_annotated) got.insert({d.pair.a(), d.pair.b()});
  EXPECT_EQ(got, (std::set<std::pair<std::size_t, std::size_t>>{{1, 2}, {2, 3}}));
  EXPECT_TRUE(s.graph().IsCannotLink(2, 3));
}

TEST(LabelStateTest, AlreadyKnownAndContradictionLeaveStateUntouched) {
  const DatasetManifest m = Line(3);
  LabelState s = LabelState::Init(m);
  s.Apply(MakePair(m, 0, 1), Verdict::kMatch);
  s.Apply(MakePair(m, 1, 2), Verdict::kMatch);
  const LabelState before = s;
  try {
    s.Apply(MakePair(m, 0, 2), Verdict::kMatch);
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.kind(), AnnotationError::Kind::kAlreadyKnown);
  }
  try {
    s.Apply(MakePair(m, 0, 2), Verdict::kNoMatch);
    FAIL();
  } catch (const AnnotationError& e) {
    EXPECT_EQ(e.kind(), AnnotationError::Kind::kContradiction);
    EXPECT_EQ(e.pair(), MakePair(m, 0, 2));
  }
  EXPECT_EQ(s, before);
}

TEST(LabelStateTest, VerdictNames) {
  EXPECT_STREQ(VerdictName(Verdict::kMatch), "match");
  EXPECT_EQ(ParseVerdict("nomatch"), Verdict::kNoMatch);
  EXPECT_THROW(ParseVerdict("maybe"), std::invalid_argument);
}

// Random consistent verdict sequences against the union-find oracle.
TEST(LabelStateTest, ClosureMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + rng() % 12;
    const DatasetManifest m = Line(n, 1 + rng() % 3);
    std::vector<int> identity(n);
    const int ids = 1 + static_cast<int>(rng() % n);
    for (auto& x : identity) x = static_cast<int>(rng() % ids);

    LabelState s = LabelState::Init(m);
    ClosureOracle oracle(n);
    std::size_t manual = 0, derived = 0;
    for (int step = 0; step < 3 * static_cast<int>(n); ++step) {
      TrackletIndex a = rng() % n, b = rng() % n;
      if (a == b) continue;
      const Verdict v = identity[a] == identity[b] ? Verdict::kMatch : Verdict::kNoMatch;
      const PairKey p = MakePair(m, a, b);
      if (s.graph().IsDecided(a, b)) {
        EXPECT_THROW(s.Apply(p, v), AnnotationError);
        continue;
      }
      const std::size_t decided_before = s.graph().decided_count();
      const auto out = s.Apply(p, v);
      ++manual;
      derived += out.auto_annotated.size();
      oracle.Add(a, b, v);
      EXPECT_EQ(s.graph().decided_count(), decided_before + 1 + out.auto_annotated.size());
      for (const auto& d : out.auto_annotated) {
        EXPECT_EQ(d.verdict == Verdict::kMatch, identity[d.pair.a()] == identity[d.pair.b()]);
      }
    }
    const auto [must, cannot] = oracle.Closure();
    EXPECT_EQ(AsSet(s.graph().MustLinkPairs()), must);
    EXPECT_EQ(AsSet(s.graph().CannotLinkPairs()), cannot);
    EXPECT_EQ(s.manual_count(), manual);
    EXPECT_EQ(s.auto_count(), derived);
    EXPECT_EQ(s.graph().decided_count(), manual + derived);
    // Cluster ids follow the must-link components.
    for (TrackletIndex a = 0; a < n; ++a)
      for (TrackletIndex b = a + 1; b < n; ++b)
        EXPECT_EQ(s.cluster_of(a) == s.cluster_of(b), must.contains({a, b}));
  }
}

TEST(MergeLabelsTest, ClustersAreMustLinkComponentsRenumbered) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 15;
    const DatasetManifest m = Line(n);
    LabelState s = LabelState::Init(m);
    ClosureOracle oracle(n);
    for (int step = 0; step < static_cast<int>(n); ++step) {
      TrackletIndex a = rng() % n, b = rng() % n;
      if (a == b || s.graph().IsDecided(a, b)) continue;
      s.Apply(MakePair(m, a, b), Verdict::kMatch);
      oracle.Add(a, b, Verdict::kMatch);
    }
    const std::uint64_t gen = s.generation();
    s.MergeLabels();
    EXPECT_EQ(s.generation(), gen + 1);
    oracle.Closure();
    // Lowest member order: ids 1..N_c assigned by first appearance.
    ClusterId next = 1;
    std::map<std::size_t, ClusterId> by_root;
    for (TrackletIndex t = 0; t < n; ++t) {
      auto [it, fresh] = by_root.try_emplace(oracle.Find(t), next);
      if (fresh) ++next;
      EXPECT_EQ(s.cluster_of(t), it->second);
    }
    EXPECT_EQ(s.cluster_count(), by_root.size());
    std::size_t total = 0;
    for (ClusterId id : s.cluster_ids()) total += s.cluster_size(id);
    EXPECT_EQ(total, n);
    // Idempotent apart from the generation.
    LabelState again = s;
    again.MergeLabels();
    EXPECT_EQ(again.assignments(), s.assignments());
  }
}

TEST(MergeLabelsTest, MinPtsOneAndTwoAgree) {
  const DatasetManifest m = Line(5);
  LabelState s = LabelState::Init(m);
  s.Apply(MakePair(m, 3, 1), Verdict::kMatch);
  LabelState t = s;
  s.MergeLabels({0.01, 1});
  t.MergeLabels({0.5, 2});
  EXPECT_EQ(s.assignments(), t.assignments());
  EXPECT_EQ(s.assignments(), (std::vector<ClusterId>{1, 2, 3, 2, 4}));
}

TEST(MergeLabelsTest, RejectsParametersThatBreakMustLink) {
  LabelState s = LabelState::Init(Line(3));
  EXPECT_THROW(s.MergeLabels({1.0, 2}), std::invalid_argument);
  EXPECT_THROW(s.MergeLabels({-0.1, 2}), std::invalid_argument);
  EXPECT_THROW(s.MergeLabels({0.01, 3}), std::invalid_argument);
}

TEST(LabelStateTest, ImageLabelsFollowTracklets) {
  const DatasetManifest m =
      MakeManifest(1, 1, {{5, 0, 0, {{0}, {1}}}, {6, 0, 0, {{2}}}, {7, 0, 0, {{3}, {4}}}});
  LabelState s = LabelState::Init(m);
  s.Apply(MakePair(m, 0, 2), Verdict::kMatch);
  s.MergeLabels();
  EXPECT_EQ(s.ImageLabels(m), (std::vector<ClusterId>{1, 1, 2, 1, 1}));
  EXPECT_EQ(s.clusters(), (std::vector<std::vector<TrackletIndex>>{{0, 2}, {1}}));
}

TEST(DbscanTest, ClassicExample) {
  // Points on a line: a dense group {0, 0.1, 0.2}, a pair {5, 5.1}, and an
  // outlier at 9.
  const std::vector<double> x{0, 0.1, 0.2, 5, 5.1, 9};
  const std::size_t n = x.size();
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs(x[i] - x[j]);
  EXPECT_EQ(Dbscan(d, n, {0.15, 2}), (std::vector<int>{0, 0, 0, 1, 1, kDbscanNoise}));
  EXPECT_EQ(Dbscan(d, n, {0.15, 3}),
            (std::vector<int>{0, 0, 0, kDbscanNoise, kDbscanNoise, kDbscanNoise}));
  EXPECT_EQ(Dbscan(d, n, {0.05, 1}), (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(DbscanTest, BorderPointJoinsCluster) {
  // 1 is core (0, 1, 2 within 1.0); 3 is only reachable from 2, a border.
  const std::vector<double> x{0, 1, 2, 3};
  std::vector<double> d(16);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) d[i * 4 + j] = std::abs(x[i] - x[j]);
  EXPECT_EQ(Dbscan(d, 4, {1.0, 3}), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_THROW(Dbscan(std::vector<double>(3), 2, {}), std::invalid_argument);
}

}  // namespace
}  // namespace areid
