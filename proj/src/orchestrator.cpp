#include "areid/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "areid/resampler.hpp"
#include "json.hpp"

namespace areid {

namespace {

constexpr std::uint64_t kTpaSalt = 0x7461705f73616c74ULL;

// splitmix64 finalizer; decorrelates per-iteration seeds.
std::uint64_t Mix(std::uint64_t seed, std::uint64_t t) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (t + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<std::size_t> FirstReaching(const std::vector<TracePoint>& trace, std::size_t total,
                                         double ratio) {
  if (total == 0) return std::size_t{0};
  for (const TracePoint& p : trace) {
    if (static_cast<double>(p.gained_tp) / static_cast<double>(total) >= ratio) return p.manual;
  }
  return std::nullopt;
}

// Complete lines of a text file; a trailing fragment without '\n' is dropped.
std::vector<std::string> CompleteLines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t nl = text.find('\n'); nl != std::string::npos; nl = text.find('\n', start)) {
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::pair<std::size_t, std::size_t> PoolSizes(const DatasetManifest& manifest) {
  std::map<CameraId, std::size_t> per_camera;
  for (const Tracklet& t : manifest.tracklets()) ++per_camera[t.camera_id];
  const std::size_t c = manifest.tracklet_count();
  std::size_t same = 0;
  for (const auto& [cam, n] : per_camera) same += n * (n - 1) / 2;
  const std::size_t total = c < 2 ? 0 : c * (c - 1) / 2;
  return {same, total - same};
}

}  // namespace

const char* StopReasonName(StopReason r) {
  switch (r) {
    case StopReason::kNone: return "none";
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kPoolsExhausted: return "pools_exhausted";
    case StopReason::kNoGain: return "no_gain";
    case StopReason::kManualBudget: return "manual_budget";
    case StopReason::kOracleClosed: return "oracle_closed";
  }
  return "unknown";
}

std::vector<OracleVerdict> SimulatedProvider::Collect(const CandidateBatch& batch,
                                                      std::uint64_t) {
  std::vector<OracleVerdict> out;
  out.reserve(batch.pairs.size());
  for (const PairDistance& pd : batch.pairs) out.push_back(oracle_.Answer(pd.pair));
  return out;
}

std::vector<OracleVerdict> HumanQueueProvider::Collect(const CandidateBatch& batch,
                                                       std::uint64_t generation) {
  std::vector<OracleVerdict> out;
  if (batch.pairs.empty()) return out;
  queue_.Enqueue(batch, generation);
  while (queue_.outstanding() > 0 && !queue_.closed()) {
    if (auto v = queue_.WaitVerdict(std::chrono::milliseconds(100))) out.push_back(*v);
  }
  while (auto v = queue_.WaitVerdict(std::chrono::milliseconds(0))) out.push_back(*v);
  return out;
}

LabelState ReplayLedger(const DatasetManifest& manifest, const std::vector<LedgerRecord>& records,
                        const RunConfig& config, std::optional<int> iterations,
                        const std::function<void(int, const LabelState&)>& after_iteration) {
  const int last = iterations.value_or(records.empty() ? 0 : records.back().iteration);
  const DbscanParams params{config.dbscan_eps, config.dbscan_min_pts};
  LabelState labels = LabelState::Init(manifest);
  auto index_of = [&](TrackletId id, std::uint64_t seq) {
    auto t = manifest.FindTracklet(id);
    if (!t) {
      throw std::runtime_error("ledger record " + std::to_string(seq) + ": unknown tracklet " +
                               std::to_string(id));
    }
    return *t;
  };
  std::size_t i = 0;
  for (int t = 1; t <= last; ++t) {
    while (i < records.size() && records[i].iteration == t) {
      const LedgerRecord& r = records[i];
      if (r.source != DecisionSource::kManual) {
        throw std::runtime_error("ledger record " + std::to_string(r.seq) +
                                 ": auto record without a preceding manual one");
      }
      const PairKey pair = MakePair(manifest, index_of(r.a, r.seq), index_of(r.b, r.seq));
      LabelState::Outcome outcome;
      try {
        outcome = labels.Apply(pair, r.verdict);
      } catch (const AnnotationError& e) {
        throw std::runtime_error("ledger record " + std::to_string(r.seq) + ": " + e.what());
      }
      ++i;
      for (const Decision& d : outcome.auto_annotated) {
        if (i >= records.size() || records[i].source != DecisionSource::kAuto ||
            records[i].iteration != t ||
            records[i].a != manifest.tracklets()[d.pair.a()].tracklet_id ||
            records[i].b != manifest.tracklets()[d.pair.b()].tracklet_id ||
            records[i].verdict != d.verdict) {
          throw std::runtime_error("ledger record " + std::to_string(r.seq) +
                                   ": auto-derived records do not match the closure");
        }
        ++i;
      }
    }
    labels.MergeLabels(params);
    if (after_iteration) after_iteration(t, labels);
  }
  if (i < records.size()) {
    throw std::runtime_error("ledger record " + std::to_string(records[i].seq) +
                             ": iteration " + std::to_string(records[i].iteration) +
                             " out of range");
  }
  return labels;
}

Orchestrator::Orchestrator(DatasetManifest manifest, RunConfig config,
                           std::unique_ptr<ModelHook> hook, VerdictProvider& provider,
                           std::optional<GroundTruth> truth, OrchestratorOptions options)
    : manifest_(manifest.WithoutIdentities()),
      config_(std::move(config)),
      hook_(std::move(hook)),
      provider_(provider),
      truth_(std::move(truth)),
      options_(std::move(options)) {
  config_.Validate();
  if (!hook_) hook_ = std::make_unique<CentroidPullHook>(config_.refresh_alpha);
  if (truth_ && truth_->size() != manifest_.tracklet_count()) {
    throw std::invalid_argument("ground truth does not cover every tracklet");
  }
  const auto [same, cross] = PoolSizes(manifest_);
  total_pairs_ = same + cross;
  schedule_ = config_.ResolveSchedule(same, cross);
  if (options_.t_pa) {
    t_pa_ = options_.t_pa;
  } else if (truth_) {
    t_pa_ = EstimateTpa(truth_->identity, config_.tpa_runs, Mix(config_.seed, kTpaSalt)).mean;
  }
  state_.labels = LabelState::Init(manifest_);
  state_.embeddings = EmbeddingSnapshot::FromManifest(manifest_);
  CheckStop();
}

void Orchestrator::AttachOutput(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  out_dir_ = dir;
  SaveConfig(config_, dir / "config.txt");
  {
    nlohmann::json run = {{"manifest_hash", ManifestHash(manifest_)},
                          {"tracklets", manifest_.tracklet_count()},
                          {"schedule",
                           {{"s1", schedule_.s1},
                            {"s2", schedule_.s2},
                            {"s3", schedule_.s3},
                            {"s4", schedule_.s4},
                            {"t0", schedule_.t0}}},
                          {"t_pa", t_pa_ ? nlohmann::json(*t_pa_) : nlohmann::json(nullptr)}};
    std::ofstream out(dir / "run.json");
    out << run.dump(2) << '\n';
  }
  ledger_.AttachFile(dir / "ledger.jsonl");
  metrics_file_ = std::ofstream(dir / "metrics.jsonl", std::ios::trunc);
  if (!metrics_file_) throw std::runtime_error("cannot write " + (dir / "metrics.jsonl").string());
  for (const auto& m : state_.history) metrics_file_ << FormatMetricsLine(m) << '\n';
  metrics_file_.flush();
  std::ofstream csv(dir / "metrics.csv");
  WriteMetricsTable(csv, state_.history);
}

void Orchestrator::Resume(const std::filesystem::path& dir) {
  if (state_.iteration != 0 || !ledger_.records().empty()) {
    throw std::logic_error("Resume needs a fresh orchestrator");
  }
  const RunConfig saved = LoadConfig(dir / "config.txt");
  if (!(saved == config_)) throw ConfigError("config differs from the one saved in " + dir.string());
  {
    std::ifstream in(dir / "run.json");
    if (in) {
      const auto run = nlohmann::json::parse(in);
      if (run.at("manifest_hash").get<std::uint64_t>() != ManifestHash(manifest_)) {
        throw std::runtime_error("manifest differs from the one used in " + dir.string());
      }
    }
  }

  std::vector<IterationMetrics> history;
  for (const std::string& line : CompleteLines(dir / "metrics.jsonl")) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    history.push_back(ParseMetricsLine(line));
    if (history.back().iteration != static_cast<int>(history.size())) {
      throw std::runtime_error("metrics.jsonl: iterations out of sequence");
    }
  }
  const int last = static_cast<int>(history.size());

  std::ostringstream kept;
  for (const std::string& line : CompleteLines(dir / "ledger.jsonl")) kept << line << '\n';
  std::istringstream ledger_in(kept.str());
  ledger_ = AnnotationLedger::Parse(ledger_in);
  ledger_.TruncateAfter(last);

  // Embeddings: start from the saved snapshot when it is not ahead of the
  // completed iterations, and redo the refreshes after it.
  EmbeddingSnapshot emb = EmbeddingSnapshot::FromManifest(manifest_);
  if (std::filesystem::exists(dir / "snapshot.jsonl")) {
    EmbeddingSnapshot saved_emb = ReadSnapshot(dir / "snapshot.jsonl", manifest_);
    if (saved_emb.stamp() <= static_cast<std::uint64_t>(last)) emb = std::move(saved_emb);
  }
  const int have = static_cast<int>(emb.stamp());
  if (have == 0 && last >= 1) emb = hook_->Refresh(emb, LabelState::Init(manifest_), manifest_);
  state_.labels = ReplayLedger(manifest_, ledger_.records(), config_, last,
                               [&](int t, const LabelState& labels) {
                                 if (t >= std::max(have, 1) && t < last) {
                                   emb = hook_->Refresh(emb, labels, manifest_);
                                 }
                               });
  state_.embeddings = std::move(emb);
  state_.iteration = last;
  state_.history = std::move(history);
  state_.already_known = state_.history.empty() ? 0 : state_.history.back().already_known;

  std::vector<std::size_t> gain(static_cast<std::size_t>(last) + 1, 0);
  const auto& records = ledger_.records();
  std::size_t manual = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const LedgerRecord& r = records[i];
    ++gain[static_cast<std::size_t>(r.iteration)];
    if (r.source == DecisionSource::kManual) ++manual;
    if (!truth_) continue;
    const auto a = *manifest_.FindTracklet(r.a);
    const auto b = *manifest_.FindTracklet(r.b);
    CountGain({MakePair(manifest_, a, b), r.verdict});
    if (i + 1 == records.size() || records[i + 1].source == DecisionSource::kManual) {
      trace_.push_back({manual, gained_tp_});
    }
  }
  state_.zero_gain_streak = 0;
  for (int t = last; t >= 1 && gain[static_cast<std::size_t>(t)] == 0; --t) {
    ++state_.zero_gain_streak;
  }

  AttachOutput(dir);
  CheckStop();
}

void Orchestrator::CountGain(const Decision& d) {
  if (truth_ && d.verdict == Verdict::kMatch && truth_->SameIdentity(d.pair.a(), d.pair.b())) {
    ++gained_tp_;
  }
}

bool Orchestrator::CheckStop() {
  if (state_.stopped != StopReason::kNone) return true;
  if (config_.stop_when_pools_exhausted &&
      state_.labels.graph().decided_count() >= total_pairs_) {
    state_.stopped = StopReason::kPoolsExhausted;
  } else if (config_.max_manual > 0 && state_.labels.manual_count() >= config_.max_manual) {
    state_.stopped = StopReason::kManualBudget;
  } else if (state_.zero_gain_streak >= 2) {
    state_.stopped = StopReason::kNoGain;
  } else if (state_.iteration >= config_.max_iterations) {
    state_.stopped = StopReason::kMaxIterations;
  } else if (provider_.exhausted()) {
    state_.stopped = StopReason::kOracleClosed;
  }
  return state_.stopped != StopReason::kNone;
}

CandidateBatch Orchestrator::Select(const DistancePools& pools, int t) {
  const ScheduleCounts counts = CountsForIteration(t, schedule_);
  switch (config_.strategy) {
    case Strategy::kViewAwareResample:
    case Strategy::kViewAwareOnly:
      return SelectViewAware(pools, state_.labels, t, schedule_);
    case Strategy::kMixedView:
      return SelectMixedView(pools, state_.labels, t, schedule_);
    case Strategy::kRandom:
      return SelectRandom(pools.cache, state_.labels, counts.m1 + counts.m2, Mix(config_.seed, t),
                          t);
    case Strategy::kKMeans:
      return SelectKMeansPairs(pools.cache, t, counts.m1 + counts.m2);
  }
  return {};
}

CandidateBatch Orchestrator::SelectKMeansPairs(const DistanceCache& distances, int t,
                                               std::size_t budget) {
  const std::size_t c = manifest_.tracklet_count();
  std::vector<bool> labeled_bits(c, false);
  for (const LedgerRecord& r : ledger_.records()) {
    if (r.source != DecisionSource::kManual) continue;
    labeled_bits[*manifest_.FindTracklet(r.a)] = true;
    labeled_bits[*manifest_.FindTracklet(r.b)] = true;
  }
  // One representative per labelled must-link component, lowest index first.
  std::vector<TrackletIndex> reps;
  std::vector<bool> component_seen(c, false);
  for (TrackletIndex x = 0; x < c; ++x) {
    if (!labeled_bits[x]) continue;
    const TrackletIndex root = state_.labels.graph().Component(x).front();
    if (component_seen[root]) continue;
    component_seen[root] = true;
    reps.push_back(x);
  }
  std::size_t k = config_.kmeans_k;
  if (k == 0) k = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(c))));
  k = std::clamp<std::size_t>(k, 1, c);
  const std::unique_ptr<bool[]> mask(new bool[c]);
  for (std::size_t i = 0; i < c; ++i) mask[i] = labeled_bits[i];
  const KMeansSelection selection =
      SelectKMeans(manifest_, state_.embeddings, std::span<const bool>(mask.get(), c), k, budget,
                   Mix(config_.seed, t));

  // Each selected tracklet is compared with the labelled clusters nearest
  // first; once it matches, the remaining comparisons are implied by the
  // cannot-links between labelled clusters and are not charged.
  CandidateBatch batch;
  batch.iteration = t;
  std::vector<std::pair<double, TrackletIndex>> order;
  for (TrackletIndex x : selection.tracklets) {
    order.clear();
    for (TrackletIndex r : reps) {
      if (!state_.labels.graph().IsDecided(x, r)) order.emplace_back(distances.at(x, r), r);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [d, r] : order) {
      const PairKey pair = MakePair(manifest_, x, r);
      batch.pairs.push_back({pair, d});
      if (pair.view() == ViewClass::kSameView) {
        ++batch.same_view_selected;
      } else {
        ++batch.cross_view_selected;
      }
    }
    reps.push_back(x);
  }
  return batch;
}

void Orchestrator::ApplyVerdicts(const std::vector<OracleVerdict>& verdicts, int t) {
  for (const OracleVerdict& v : verdicts) {
    if (config_.max_manual > 0 && state_.labels.manual_count() >= config_.max_manual) break;
    LabelState::Outcome outcome;
    try {
      outcome = state_.labels.Apply(v.pair, v.verdict);
    } catch (const AnnotationError& e) {
      if (e.kind() == AnnotationError::Kind::kAlreadyKnown) {
        ++state_.already_known;
        continue;
      }
      if (!options_.tolerate_contradictions) throw;
      ++state_.contradictions;
      std::cerr << "dropped contradicting verdict: " << e.what() << '\n';
      continue;
    }
    const Decision manual{v.pair, v.verdict};
    ledger_.Record(manifest_, t, manual, outcome.auto_annotated);
    CountGain(manual);
    for (const Decision& d : outcome.auto_annotated) CountGain(d);
    if (truth_) trace_.push_back({state_.labels.manual_count(), gained_tp_});
  }
  ledger_.Flush();
}

IterationMetrics Orchestrator::Measure(int t, const DistanceCache& distances) const {
  IterationMetrics m;
  m.iteration = t;
  m.tp_manual = state_.labels.manual_count();
  m.auto_count = state_.labels.auto_count();
  m.already_known = state_.already_known;
  m.cluster_count = state_.labels.cluster_count();
  if (t_pa_ && *t_pa_ > 0.0) m.ar = static_cast<double>(m.tp_manual) / *t_pa_;
  if (truth_) {
    m.gained_tp_ratio = GainedTpRatio(state_.labels, *truth_);
    std::vector<TrackletIndex> all(manifest_.tracklet_count());
    std::iota(all.begin(), all.end(), TrackletIndex{0});
    const ReidResult r = EvaluateReid(distances, manifest_, *truth_, all, all,
                                      {config_.exclude_same_camera});
    if (r.evaluated_queries > 0) {
      m.rank1 = r.RankRate(1);
      m.rank5 = r.RankRate(5);
      m.rank10 = r.RankRate(10);
      m.rank20 = r.RankRate(20);
      m.map = r.mean_ap;
    }
  }
  return m;
}

void Orchestrator::WriteSnapshotFile() {
  if (!out_dir_) return;
  const auto tmp = *out_dir_ / "snapshot.jsonl.tmp";
  WriteSnapshot(state_.embeddings, manifest_, tmp);
  std::filesystem::rename(tmp, *out_dir_ / "snapshot.jsonl");
}

void Orchestrator::WriteIterationOutputs(const IterationMetrics& m) {
  if (!out_dir_) return;
  metrics_file_ << FormatMetricsLine(m) << '\n';
  metrics_file_.flush();
  std::ofstream csv(*out_dir_ / "metrics.csv");
  WriteMetricsTable(csv, state_.history);
  WriteSnapshotFile();
}

void Orchestrator::Publish(std::shared_ptr<const DistanceCache> distances) {
  if (!options_.observer) return;
  auto snap = std::make_shared<RunSnapshot>();
  snap->generation = state_.labels.generation();
  snap->iteration = state_.iteration;
  snap->labels = state_.labels;
  snap->distances = std::move(distances);
  snap->history = state_.history;
  snap->t_pa = t_pa_;
  snap->stopped = state_.stopped;
  options_.observer(std::move(snap));
}

bool Orchestrator::RunIteration() {
  if (CheckStop()) return false;
  const int t = state_.iteration + 1;

  // (1) model update
  state_.embeddings = hook_->Refresh(state_.embeddings, state_.labels, manifest_);
  // (2) distances and pools
  DistancePools pools = BuildDistancePools(manifest_, state_.embeddings, config_.k_dist,
                                           PoolOptions{std::nullopt, config_.workers});
  // (3) selection
  CandidateBatch batch = Select(pools, t);
  // (4) resampling
  if (config_.strategy == Strategy::kViewAwareResample && !batch.pairs.empty()) {
    double sigma = config_.sigma;
    if (config_.sigma_mode == SigmaMode::kMedianSq) {
      sigma = MedianSquaredDistance(pools.cache);
    } else if (config_.sigma_mode == SigmaMode::kNeighborMedianSq) {
      sigma = NeighborMedianSquaredDistance(pools.cache, config_.k_recip);
    }
    const Eigen::MatrixXd transition = BuildTransition(pools.cache, sigma);
    const PropagationResult prop = Propagate(transition, state_.labels,
                                             {config_.prop_max_iters, config_.prop_tol});
    batch = ResampleViewAware(pools, state_.labels, t, schedule_, prop.ranking, config_.k_recip,
                              config_.resample_window);
  }
  // (5) oracle
  const std::vector<OracleVerdict> verdicts =
      provider_.Collect(batch, state_.labels.generation());
  // (6) annotations with closure
  const std::size_t decided_before = state_.labels.graph().decided_count();
  ApplyVerdicts(verdicts, t);
  const bool gained = state_.labels.graph().decided_count() > decided_before;
  state_.zero_gain_streak = gained ? 0 : state_.zero_gain_streak + 1;
  // (7) label merging
  state_.labels.MergeLabels({config_.dbscan_eps, config_.dbscan_min_pts});
  // (8) metrics
  state_.iteration = t;
  state_.history.push_back(Measure(t, pools.cache));
  WriteIterationOutputs(state_.history.back());
  CheckStop();
  Publish(std::make_shared<const DistanceCache>(std::move(pools.cache)));
  return true;
}

void Orchestrator::Run() {
  Publish(nullptr);
  while (RunIteration()) {
  }
  if (!out_dir_) return;
  nlohmann::json summary = {
      {"stop_reason", StopReasonName(state_.stopped)},
      {"iterations", state_.iteration},
      {"tp_manual", state_.labels.manual_count()},
      {"auto_count", state_.labels.auto_count()},
      {"already_known", state_.already_known},
      {"cluster_count", state_.labels.cluster_count()},
      {"t_pa", t_pa_ ? nlohmann::json(*t_pa_) : nlohmann::json(nullptr)},
  };
  if (truth_) {
    for (double ratio : {0.9, 0.95, 0.99}) {
      char key[40];
      std::snprintf(key, sizeof(key), "manual_to_reach_%.2f", ratio);
      const auto n = AnnotationsToReach(ratio);
      summary[key] = n ? nlohmann::json(*n) : nlohmann::json(nullptr);
    }
  }
  std::ofstream out(*out_dir_ / "summary.json");
  out << summary.dump(2) << '\n';
}

std::optional<std::size_t> Orchestrator::AnnotationsToReach(double ratio) const {
  if (!truth_) return std::nullopt;
  return FirstReaching(trace_, truth_->TruePositivePairCount(), ratio);
}

std::optional<std::size_t> StrategyOutcome::AnnotationsToReach(double ratio) const {
  return FirstReaching(trace, total_tp, ratio);
}

std::vector<StrategyOutcome> CompareStrategies(const DatasetManifest& manifest,
                                               const RunConfig& base,
                                               const std::vector<Strategy>& strategies,
                                               const std::optional<std::filesystem::path>& out_dir) {
  const GroundTruth truth = ExtractGroundTruth(manifest);
  const double t_pa = EstimateTpa(truth.identity, base.tpa_runs, Mix(base.seed, kTpaSalt)).mean;
  std::vector<StrategyOutcome> outcomes;
  for (Strategy s : strategies) {
    RunConfig config = base;
    config.strategy = s;
    SimulatedProvider provider(truth);
    OrchestratorOptions options;
    options.t_pa = t_pa;
    Orchestrator orch(manifest, config, nullptr, provider, truth, options);
    if (out_dir) orch.AttachOutput(*out_dir / StrategyName(s));
    orch.Run();
    StrategyOutcome o;
    o.strategy = s;
    o.history = orch.state().history;
    o.trace = orch.trace();
    o.total_tp = truth.TruePositivePairCount();
    o.stopped = orch.state().stopped;
    outcomes.push_back(std::move(o));
  }
  if (out_dir) {
    std::ofstream csv(*out_dir / "curves.csv");
    bool header = true;
    for (const StrategyOutcome& o : outcomes) {
      WriteMetricsTable(csv, o.history, {{"strategy", StrategyName(o.strategy)}}, header);
      header = false;
    }
  }
  return outcomes;
}

}  // namespace areid
