// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "areid/config.hpp"
#include "areid/dataset.hpp"
#include "areid/evaluation.hpp"
#include "areid/label_state.hpp"
#include "areid/metric_core.hpp"
#include "areid/model_hook.hpp"
#include "areid/orchestrator.hpp"
#include "areid/resampler.hpp"

namespace {

using namespace areid;
using Clock = std::chrono::steady_clock;

constexpr double kDistanceTol = 1e-9;
constexpr double kDistanceSeconds = 5.0;
constexpr double kMergeSeconds = 10.0;
constexpr double kRowSumTol = 1e-9;
constexpr double kTpaRelStd = 0.10;
constexpr double kPerfectTol = 1e-12;
constexpr double kSeedSeconds = 120.0;
constexpr int kBenchmarkSeeds = 5;

int failures = 0;

void Report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// Union-find over tracklet indices.
struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t Find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void Union(std::size_t a, std::size_t b) { parent[Find(a)] = Find(b); }
  std::vector<std::size_t> parent;
};

DatasetManifest SmallManifest(std::mt19937_64& rng, std::size_t max_identities) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  SyntheticOptions o;
  o.identities = pick(2, max_identities);
  o.cameras = pick(1, 3);
  o.tracklets_per_identity_per_camera = {1, pick(1, 3)};
  o.images_per_tracklet = {1, pick(1, 4)};
  o.dimension = pick(2, 8);
  o.within_id_std = 0.4;
  o.cross_camera_shift_std = 0.5;
  o.camera_bias_std = 0.3;
  o.seed = rng();
  return GenerateSynthetic(o);
}

// ---------------------------------------------------------------------------

void SetDistance() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const auto start = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t dim = pick(1, 16), np = pick(1, 10), nq = pick(1, 10), k = pick(1, 110);
    std::vector<std::vector<double>> p(np, std::vector<double>(dim)), q(nq, std::vector<double>(dim));
    for (auto& v : p) for (double& x : v) x = normal(rng);
    for (auto& v : q) for (double& x : v) x = normal(rng);

    std::vector<double> all;
    for (const auto& a : p) {
      for (const auto& b : q) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        all.push_back(std::sqrt(s));
      }
    }
    std::sort(all.begin(), all.end());
    const std::size_t take = std::min(k, all.size());
    const double expected = std::accumulate(all.begin(), all.begin() + take, 0.0) / take;

    std::vector<std::span<const double>> ps(p.begin(), p.end()), qs(q.begin(), q.end());
    const double got = SetToSetDistance(ps, qs, k);
    worst = std::max(worst, std::abs(got - expected));
  }
  const double secs = Seconds(start);
  Report(1, worst <= kDistanceTol && secs < kDistanceSeconds,
         Fmt("set-to-set distance vs brute force, 1000 pairs: max |err| = %.2e (tol %.0e), %.2f s",
             worst, kDistanceTol, secs));
}

void MergePartition() {
  std::mt19937_64 rng(202);
  const auto start = Clock::now();
  int mismatched = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng() % 99;
    const std::size_t ids = 1 + rng() % c;
    std::vector<IdentityId> identity(c);
    for (auto& x : identity) x = static_cast<IdentityId>(rng() % ids);

    std::vector<ImageRecord> images;
    for (std::size_t t = 0; t < c; ++t) {
      ImageRecord r;
      r.image_id = static_cast<ImageId>(t);
      r.tracklet_id = static_cast<TrackletId>(t);
      r.camera_id = static_cast<CameraId>(t % 2);
      r.feature = {static_cast<double>(t)};
      images.push_back(std::move(r));
    }
    const DatasetManifest m = DatasetManifest::Build(1, 2, std::move(images));
    LabelState s = LabelState::Init(m);
    UnionFind uf(c);
    const std::size_t steps = rng() % (3 * c);
    for (std::size_t i = 0; i < steps; ++i) {
      const TrackletIndex a = rng() % c, b = rng() % c;
      if (a == b || s.graph().IsDecided(a, b)) continue;
      const Verdict v = identity[a] == identity[b] ? Verdict::kMatch : Verdict::kNoMatch;
      s.Apply(MakePair(m, a, b), v);
      if (v == Verdict::kMatch) uf.Union(a, b);
    }
    s.MergeLabels();

    // Partitions agree up to relabeling iff the root <-> cluster map is a
    // bijection.
    std::map<std::size_t, ClusterId> root_to_cluster;
    std::map<ClusterId, std::size_t> cluster_to_root;
    bool ok = true;
    for (TrackletIndex t = 0; t < c; ++t) {
      const auto r = uf.Find(t);
      const auto [i1, f1] = root_to_cluster.try_emplace(r, s.cluster_of(t));
      const auto [i2, f2] = cluster_to_root.try_emplace(s.cluster_of(t), r);
      ok = ok && i1->second == s.cluster_of(t) && i2->second == r;
    }
    ok = ok && s.cluster_count() == root_to_cluster.size();
    if (!ok) ++mismatched;
  }
  const double secs = Seconds(start);
  Report(2, mismatched == 0 && secs < kMergeSeconds,
         Fmt("merged labels vs union-find components, 1000 sequences: %d mismatched, %.2f s",
             mismatched, secs));
}

void PropagationInvariants() {
  std::mt19937_64 rng(303);
  int runs = 0, converged_runs = 0, bad_sum = 0, unstable = 0, bad_residual = 0;
  double worst_sum = 0.0, worst_residual = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const DatasetManifest m = SmallManifest(rng, 12);
    const std::size_t c = m.tracklet_count();
    if (c < 2) continue;
    const GroundTruth truth = ExtractGroundTruth(m);
    const DistanceCache d = ComputeDistances(m, EmbeddingSnapshot::FromManifest(m), 1 + rng() % 4);
    LabelState s = LabelState::Init(m);
    for (std::size_t i = 0; i < c; ++i) {
      const TrackletIndex a = rng() % c, b = rng() % c;
      if (a == b || s.graph().IsDecided(a, b)) continue;
      s.Apply(MakePair(m, a, b), truth.SameIdentity(a, b) ? Verdict::kMatch : Verdict::kNoMatch);
    }
    s.MergeLabels();
    const double median = MedianSquaredDistance(d);
    const Eigen::MatrixXd transition = BuildTransition(d, median > 0 ? median : 1.0);
    const PropagationOptions opts{5 + rng() % 200, trial % 2 ? 1e-6 : 1e-9};

    std::vector<Eigen::MatrixXd> iterates;
    const PropagationResult r =
        Propagate(transition, s, opts, [&](std::size_t, const Eigen::MatrixXd& z) {
          iterates.push_back(z);
        });
    ++runs;
    const SoftLabelMatrix& z = r.labels;
    for (const auto& it : iterates) {
      for (Eigen::Index i = 0; i < it.rows(); ++i) {
        const double err = std::abs(it.row(i).sum() - 1.0);
        worst_sum = std::max(worst_sum, err);
        if (err > kRowSumTol) ++bad_sum;
      }
    }
    for (std::size_t i = 0; i < c; ++i) {
      if (!z.clamped[i]) continue;
      Eigen::RowVectorXd one_hot = Eigen::RowVectorXd::Zero(z.values.cols());
      one_hot(static_cast<Eigen::Index>(z.own_column[i])) = 1.0;
      for (const auto& it : iterates) {
        if (std::memcmp(it.row(i).eval().data(), one_hot.data(),
                        sizeof(double) * one_hot.size()) != 0) {
          ++unstable;
        }
      }
    }
    if (r.converged) {
      ++converged_runs;
      // One more step computed here: Z <- T Z, row-normalize, clamp.
      Eigen::MatrixXd next = transition * z.values;
      for (Eigen::Index i = 0; i < next.rows(); ++i) next.row(i) /= next.row(i).sum();
      for (std::size_t i = 0; i < c; ++i) {
        if (!z.clamped[i]) continue;
        next.row(static_cast<Eigen::Index>(i)).setZero();
        next(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(z.own_column[i])) = 1.0;
      }
      const double residual = (next - z.values).cwiseAbs().rowwise().sum().maxCoeff();
      worst_residual = std::max(worst_residual, residual / opts.tol);
      if (!(residual < opts.tol)) ++bad_residual;
    }
  }
  Report(3, bad_sum == 0 && unstable == 0 && bad_residual == 0 && converged_runs > 0,
         Fmt("propagation over %d runs: max |row sum - 1| = %.1e (tol %.0e), %d unstable clamped "
             "rows, %d/%d converged runs with residual >= tol (worst residual/tol %.2f)",
             runs, worst_sum, kRowSumTol, unstable, bad_residual, converged_runs, worst_residual));
}

std::vector<std::size_t> TopColumns(const Eigen::RowVectorXd& row, std::size_t k) {
  std::vector<std::size_t> cols(static_cast<std::size_t>(row.size()));
  std::iota(cols.begin(), cols.end(), 0);
  std::stable_sort(cols.begin(), cols.end(), [&](std::size_t x, std::size_t y) {
    return row(static_cast<Eigen::Index>(x)) > row(static_cast<Eigen::Index>(y));
  });
  cols.resize(std::min(k, cols.size()));
  return cols;
}

void ReciprocalFilterProperties() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int not_subset = 0, not_idempotent = 0, wrong_membership = 0;
  std::size_t kept = 0, total = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng() % 40;
    const std::size_t nc = 1 + rng() % c;
    SoftLabelMatrix soft;
    soft.values = Eigen::MatrixXd(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(nc));
    for (Eigen::Index i = 0; i < soft.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < soft.values.cols(); ++j) {
        // Coarse values so ties occur.
        soft.values(i, j) = std::floor(unit(rng) * 8.0) + 0.5;
      }
      soft.values.row(i) /= soft.values.row(i).sum();
    }
    for (std::size_t j = 0; j < nc; ++j) soft.columns.push_back(static_cast<ClusterId>(j + 1));
    for (std::size_t i = 0; i < c; ++i) {
      soft.own_column.push_back(rng() % nc);
      soft.clamped.push_back(rng() % 2 == 0);
    }
    CandidateBatch batch;
    batch.iteration = 1;
    const std::size_t n = rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      TrackletIndex a = rng() % c, b = rng() % c;
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      const ViewClass v = rng() % 2 ? ViewClass::kSameView : ViewClass::kCrossView;
      batch.pairs.push_back({PairKey(a, b, v), unit(rng)});
      ++(v == ViewClass::kSameView ? batch.same_view_selected : batch.cross_view_selected);
    }
    const std::size_t k = 1 + rng() % (nc + 1);
    const CandidateBatch out = ReciprocalFilter(batch, soft, k);

    // Order-preserving subsequence of the input.
    std::size_t j = 0;
    for (const auto& pd : batch.pairs) {
      if (j < out.pairs.size() && out.pairs[j] == pd) ++j;
    }
    if (j != out.pairs.size()) ++not_subset;
    if (!(ReciprocalFilter(out, soft, k) == out)) ++not_idempotent;

    // Membership against an independent mutual top-k test.
    std::vector<PairDistance> expected;
    for (const auto& pd : batch.pairs) {
      const auto ta = TopColumns(soft.values.row(pd.pair.a()), k);
      const auto tb = TopColumns(soft.values.row(pd.pair.b()), k);
      const bool mutual =
          std::find(ta.begin(), ta.end(), soft.own_column[pd.pair.b()]) != ta.end() &&
          std::find(tb.begin(), tb.end(), soft.own_column[pd.pair.a()]) != tb.end();
      if (mutual) expected.push_back(pd);
    }
    if (expected != out.pairs) ++wrong_membership;
    kept += out.pairs.size();
    total += batch.pairs.size();
  }
  Report(4, not_subset == 0 && not_idempotent == 0 && wrong_membership == 0,
         Fmt("reciprocal filter on 1000 batches (%zu of %zu pairs kept): %d not subsets, "
             "%d not idempotent, %d differ from the mutual top-k test",
             kept, total, not_subset, not_idempotent, wrong_membership));
}

// Truthful answers, except that a fraction are flipped.
class NoisyProvider final : public VerdictProvider {
 public:
  NoisyProvider(GroundTruth truth, double flip, std::uint64_t seed)
      : truth_(std::move(truth)), flip_(flip), rng_(seed) {}
  std::vector<OracleVerdict> Collect(const CandidateBatch& batch, std::uint64_t) override {
    std::vector<OracleVerdict> out;
    for (const auto& pd : batch.pairs) {
      bool match = truth_.SameIdentity(pd.pair.a(), pd.pair.b());
      if (std::bernoulli_distribution(flip_)(rng_)) match = !match;
      out.push_back({pd.pair, match ? Verdict::kMatch : Verdict::kNoMatch});
      // Occasionally repeat an answer.
      if (rng_() % 10 == 0) out.push_back(out.back());
    }
    return out;
  }

 private:
  GroundTruth truth_;
  double flip_;
  std::mt19937_64 rng_;
};

void LedgerReplay() {
  std::mt19937_64 rng(505);
  int mismatched = 0, with_noise = 0;
  std::size_t records = 0;
  // Dropped-verdict warnings from noisy runs are not part of the report.
  std::ostringstream sink;
  auto* saved = std::cerr.rdbuf(sink.rdbuf());
  for (int trial = 0; trial < 200; ++trial) {
    const DatasetManifest m = SmallManifest(rng, 10);
    const GroundTruth truth = ExtractGroundTruth(m);
    RunConfig c;
    c.s3 = 1 + rng() % 3;
    c.s1 = *c.s3 + 1 + rng() % 6;
    c.s2 = 1 + rng() % 4;
    c.s4 = *c.s2 + 1 + rng() % 6;
    c.t0 = 1 + static_cast<int>(rng() % 4);
    c.strategy = static_cast<Strategy>(rng() % 5);
    c.max_iterations = 60;
    c.tpa_runs = 1;
    c.seed = rng();
    c.k_recip = 1 + rng() % 6;
    OrchestratorOptions opts;
    std::unique_ptr<VerdictProvider> provider;
    if (trial % 2) {
      provider = std::make_unique<NoisyProvider>(truth, 0.1, rng());
      opts.tolerate_contradictions = true;
      ++with_noise;
    } else {
      provider = std::make_unique<SimulatedProvider>(truth);
    }
    Orchestrator orch(m, c, nullptr, *provider, truth, opts);
    orch.Run();
    const LabelState replayed = ReplayLedger(orch.manifest(), orch.ledger().records(), c,
                                             orch.state().iteration);
    records += orch.ledger().records().size();
    if (!(replayed == orch.state().labels)) ++mismatched;
  }
  std::cerr.rdbuf(saved);
  Report(5, mismatched == 0,
         Fmt("ledger replay vs live state on 200 runs (%d with noisy answers, %zu records): "
             "%d mismatched",
             with_noise, records, mismatched));
}

// ---------------------------------------------------------------------------

DatasetManifest Benchmark(std::uint64_t seed) {
  SyntheticOptions o;
  o.identities = 200;
  o.cameras = 2;
  o.tracklets_per_identity_per_camera = {2, 2};
  o.images_per_tracklet = {5, 5};
  o.dimension = 32;
  o.within_id_std = 0.15;
  o.cross_camera_shift_std = 0.15;
  o.camera_bias_std = 0.9;
  o.seed = seed;
  return GenerateSynthetic(o);
}

struct StrategyRun {
  std::optional<std::size_t> to90, to95, to99;
  bool monotone = true;
  bool pools_left_at_stop = false;
  int iterations = 0;
  double seconds = 0.0;
  // Wall time until the ratio first reached 0.95.
  std::optional<double> seconds_to95;
};

// Runs until the gained-TP ratio reaches `target` or a stop rule fires.
StrategyRun RunUntil(const DatasetManifest& m, const GroundTruth& truth, RunConfig c,
                     double t_pa, double target) {
  const auto start = Clock::now();
  SimulatedProvider provider(truth);
  OrchestratorOptions opts;
  opts.t_pa = t_pa;
  Orchestrator orch(m, std::move(c), nullptr, provider, truth, opts);
  StrategyRun r;
  while (!orch.AnnotationsToReach(target) && orch.RunIteration()) {
    if (!r.seconds_to95 && orch.AnnotationsToReach(0.95)) r.seconds_to95 = Seconds(start);
  }
  r.to90 = orch.AnnotationsToReach(0.90);
  r.to95 = orch.AnnotationsToReach(0.95);
  r.to99 = orch.AnnotationsToReach(0.99);
  r.iterations = orch.state().iteration;
  const auto& h = orch.state().history;
  for (std::size_t i = 1; i < h.size(); ++i) {
    r.monotone = r.monotone && *h[i].gained_tp_ratio >= *h[i - 1].gained_tp_ratio;
  }
  const auto& trace = orch.trace();
  for (std::size_t i = 1; i < trace.size(); ++i) {
    r.monotone = r.monotone && trace[i].gained_tp >= trace[i - 1].gained_tp;
  }
  const std::size_t c_count = m.tracklet_count();
  r.pools_left_at_stop = orch.state().labels.graph().decided_count() < c_count * (c_count - 1) / 2;
  r.seconds = Seconds(start);
  return r;
}

std::string Count(std::optional<std::size_t> v) { return v ? std::to_string(*v) : "never"; }

void BenchmarkComparison() {
  bool c6 = true, c8 = true;
  double sum_var = 0, sum_vao = 0, sum_mixed = 0;
  bool c7_complete = true;
  std::vector<std::string> lines6, lines7, lines8;
  for (int seed = 1; seed <= kBenchmarkSeeds; ++seed) {
    const DatasetManifest m = Benchmark(static_cast<std::uint64_t>(seed));
    const GroundTruth truth = ExtractGroundTruth(m);
    RunConfig base;
    base.seed = static_cast<std::uint64_t>(seed);
    base.max_iterations = 1000;
    const double t_pa = EstimateTpa(truth.identity, 3, base.seed).mean;

    RunConfig var = base;
    var.strategy = Strategy::kViewAwareResample;
    const StrategyRun v = RunUntil(m, truth, var, t_pa, 0.99);

    // Random gets exactly the budget the resampling run used for 0.95; it
    // passes only if it cannot reach 0.90 within that budget.
    const auto rand_start = Clock::now();
    std::optional<std::size_t> random90;
    if (v.to95) {
      RunConfig rnd = base;
      rnd.strategy = Strategy::kRandom;
      rnd.max_manual = *v.to95;
      random90 = RunUntil(m, truth, rnd, t_pa, 0.90).to90;
    }
    const double seed_seconds = v.seconds_to95.value_or(v.seconds) + Seconds(rand_start);
    const bool ok6 = v.to95 && !random90 && seed_seconds < kSeedSeconds;
    c6 = c6 && ok6;
    lines6.push_back(Fmt("seed %d: resample to 0.95 = %s, random to 0.90 %s, %.1f s", seed,
                         Count(v.to95).c_str(),
                         random90 ? ("= " + std::to_string(*random90)).c_str()
                                  : ("> " + Count(v.to95)).c_str(),
                         seed_seconds));

    const bool ok8 = v.monotone && v.to99 && v.pools_left_at_stop;
    c8 = c8 && ok8;
    lines8.push_back(Fmt("seed %d: monotone=%s to 0.99 = %s (%d iterations), pools left=%s", seed,
                         v.monotone ? "yes" : "no", Count(v.to99).c_str(), v.iterations,
                         v.pools_left_at_stop ? "yes" : "no"));

    RunConfig vao = base;
    vao.strategy = Strategy::kViewAwareOnly;
    RunConfig mixed = base;
    mixed.strategy = Strategy::kMixedView;
    const StrategyRun o = RunUntil(m, truth, vao, t_pa, 0.90);
    const StrategyRun x = RunUntil(m, truth, mixed, t_pa, 0.90);
    c7_complete = c7_complete && v.to90 && o.to90 && x.to90;
    if (v.to90) sum_var += static_cast<double>(*v.to90);
    if (o.to90) sum_vao += static_cast<double>(*o.to90);
    if (x.to90) sum_mixed += static_cast<double>(*x.to90);
    lines7.push_back(Fmt("seed %d: to 0.90 resample=%s view_aware_only=%s mixed=%s", seed,
                         Count(v.to90).c_str(), Count(o.to90).c_str(), Count(x.to90).c_str()));
    for (const auto* lines : {&lines6, &lines7, &lines8}) {
      std::printf("  %s\n", lines->back().c_str());
    }
    std::fflush(stdout);
  }
  const double n = kBenchmarkSeeds;
  Report(6, c6,
         Fmt("resample reaches 0.95 with fewer manual annotations than random needs for 0.90 "
             "on %d seeds, both runs under %.0f s per seed",
             kBenchmarkSeeds, kSeedSeconds));
  const bool c7 = c7_complete && sum_var <= sum_vao && sum_vao <= sum_mixed;
  Report(7, c7,
         Fmt("mean manual annotations to 0.90: resample %.1f <= view_aware_only %.1f <= mixed %.1f",
             sum_var / n, sum_vao / n, sum_mixed / n));
  Report(8, c8, "gained-TP curve monotone and >= 0.99 before the pools run out on every seed");
}

void TpaEstimates() {
  // 50 tracklets, 25 identities of two.
  std::vector<IdentityId> ids(50);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<IdentityId>(i / 2);
  const TpaEstimate c50 = EstimateTpa(ids, 50, 9);
  const double rel = c50.stddev / c50.mean;
  const std::vector<IdentityId> two_a{1, 1}, two_b{1, 2}, three{4, 4, 4};
  const TpaEstimate e2a = EstimateTpa(two_a, 50, 1), e2b = EstimateTpa(two_b, 50, 2);
  const TpaEstimate e3 = EstimateTpa(three, 50, 3);
  const bool exact = e2a.mean == 1.0 && e2a.stddev == 0.0 && e2b.mean == 1.0 &&
                     e2b.stddev == 0.0 && e3.mean == 2.0 && e3.stddev == 0.0;
  Report(9, rel < kTpaRelStd && exact,
         Fmt("C=50: T_pa = %.1f, relative std %.3f (limit %.2f); C=2: %.1f/%.1f; "
             "C=3 one identity: %.1f",
             c50.mean, rel, kTpaRelStd, e2a.mean, e2b.mean, e3.mean));
}

void PerfectRetrieval() {
  const DatasetManifest m = Benchmark(1);
  const GroundTruth truth = ExtractGroundTruth(m);
  LabelState s = LabelState::Init(m);
  const std::size_t c = m.tracklet_count();
  for (TrackletIndex a = 0; a < c; ++a) {
    for (TrackletIndex b = a + 1; b < c; ++b) {
      if (s.graph().IsDecided(a, b)) continue;
      s.Apply(MakePair(m, a, b), truth.SameIdentity(a, b) ? Verdict::kMatch : Verdict::kNoMatch);
    }
  }
  s.MergeLabels();
  const EmbeddingSnapshot e = CentroidPull(EmbeddingSnapshot::FromManifest(m), s, m, 1.0);
  std::vector<TrackletIndex> all(c);
  std::iota(all.begin(), all.end(), TrackletIndex{0});
  const ReidResult r = EvaluateReid(m, e, truth, all, all, RunConfig{}.k_dist);
  const bool ok = std::abs(r.RankRate(1) - 1.0) <= kPerfectTol &&
                  std::abs(r.mean_ap - 1.0) <= kPerfectTol && r.evaluated_queries == c &&
                  s.graph().decided_count() == c * (c - 1) / 2;
  Report(10, ok,
         Fmt("fully annotated benchmark after alpha=1 refresh: rank-1 = %.12f, mAP = %.12f "
             "over %zu queries (tol %.0e)",
             r.RankRate(1), r.mean_ap, r.evaluated_queries, kPerfectTol));
}

std::string ReadAll(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void CliDeterminism() {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("areid_acceptance_" + std::to_string(getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string cli = AREID_CLI_PATH;
  const std::string manifest = (dir / "manifest.jsonl").string();
  auto sh = [](const std::string& cmd) { return std::system((cmd + " 2>/dev/null").c_str()); };
  int rc = sh("'" + cli + "' generate --out '" + manifest +
              "' --identities 50 --cameras 2 --tracklets-min 2 --tracklets-max 2"
              " --images-min 5 --images-max 5 --dimension 32 --within-id-std 0.15"
              " --cross-camera-shift-std 0.15 --camera-bias-std 0.9 --seed 3");
  for (const char* run : {"a", "b"}) {
    rc |= sh("'" + cli + "' run --manifest '" + manifest + "' --seed 11 --out-dir '" +
             (dir / run).string() + "' --max-iterations 25 --tpa-runs 5");
  }
  bool same = rc == 0;
  std::size_t bytes = 0;
  for (const char* f : {"metrics.jsonl", "metrics.csv"}) {
    const std::string a = ReadAll(dir / "a" / f), b = ReadAll(dir / "b" / f);
    same = same && !a.empty() && a == b;
    bytes += a.size();
  }
  std::filesystem::remove_all(dir);
  Report(11, same,
         Fmt("two CLI runs with the same config and seed: metrics exports %s (%zu bytes, exit %d)",
             same ? "byte-identical" : "differ", bytes, rc));
}

}  // namespace

// Criterion numbers on the command line select what runs; 6 to 8 share one
// benchmark pass.
int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  auto want = [&](std::initializer_list<int> ids) {
    if (wanted.empty()) return true;
    return std::any_of(ids.begin(), ids.end(), [&](int id) {
      return std::find(wanted.begin(), wanted.end(), id) != wanted.end();
    });
  };
  const auto start = Clock::now();
  if (want({1})) SetDistance();
  if (want({2})) MergePartition();
  if (want({3})) PropagationInvariants();
  if (want({4})) ReciprocalFilterProperties();
  if (want({5})) LedgerReplay();
  if (want({6, 7, 8})) BenchmarkComparison();
  if (want({9})) TpaEstimates();
  if (want({10})) PerfectRetrieval();
  if (want({11})) CliDeterminism();
  std::printf("%d criteria failed, %.1f s\n", failures, Seconds(start));
  return failures;
}
