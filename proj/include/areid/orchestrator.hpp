#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "areid/config.hpp"
#include "areid/dataset.hpp"
#include "areid/embedding.hpp"
#include "areid/evaluation.hpp"
#include "areid/label_state.hpp"
#include "areid/ledger.hpp"
#include "areid/metric_core.hpp"
#include "areid/model_hook.hpp"
#include "areid/oracle.hpp"
#include "areid/sampler.hpp"

namespace areid {

// Source of verdicts for one candidate batch.
class VerdictProvider {
 public:
  virtual ~VerdictProvider() = default;

  // Answers for (a subset of) the batch, in the order they should be
  // applied. Pairs left unanswered stay undecided.
  virtual std::vector<OracleVerdict> Collect(const CandidateBatch& batch,
                                             std::uint64_t generation) = 0;

  // True once the provider can no longer answer (e.g. the queue was closed).
  virtual bool exhausted() const { return false; }
};

class SimulatedProvider final : public VerdictProvider {
 public:
  explicit SimulatedProvider(GroundTruth truth) : oracle_(std::move(truth)) {}
  std::vector<OracleVerdict> Collect(const CandidateBatch& batch, std::uint64_t) override;

 private:
  SimulatedOracle oracle_;
};

// Publishes the batch on `queue` and blocks until every pair was answered or
// the queue was closed.
class HumanQueueProvider final : public VerdictProvider {
 public:
  explicit HumanQueueProvider(AnnotationQueue& queue) : queue_(queue) {}
  std::vector<OracleVerdict> Collect(const CandidateBatch& batch,
                                     std::uint64_t generation) override;
  bool exhausted() const override { return queue_.closed(); }

 private:
  AnnotationQueue& queue_;
};

enum class StopReason : std::uint8_t {
  kNone,
  kMaxIterations,
  kPoolsExhausted,
  kNoGain,
  kManualBudget,
  kOracleClosed,
};

const char* StopReasonName(StopReason r);

// Cumulative counts after one charged annotation.
struct TracePoint {
  std::size_t manual = 0;
  std::size_t gained_tp = 0;
};

struct RunState {
  int iteration = 0;  // completed iterations
  LabelState labels;
  EmbeddingSnapshot embeddings;
  std::vector<IterationMetrics> history;
  std::size_t already_known = 0;
  std::size_t contradictions = 0;
  int zero_gain_streak = 0;
  StopReason stopped = StopReason::kNone;
};

// Immutable view handed to observers after every iteration.
struct RunSnapshot {
  std::uint64_t generation = 0;
  int iteration = 0;
  LabelState labels;
  std::shared_ptr<const DistanceCache> distances;
  std::vector<IterationMetrics> history;
  std::optional<double> t_pa;
  StopReason stopped = StopReason::kNone;
};

using RunObserver = std::function<void(std::shared_ptr<const RunSnapshot>)>;

struct OrchestratorOptions {
  // Human verdicts that contradict earlier ones are dropped and counted
  // instead of aborting the run.
  bool tolerate_contradictions = false;
  // Precomputed annotation total; estimated from ground truth when unset.
  std::optional<double> t_pa;
  RunObserver observer;
};

// Replays a ledger onto a fresh label state: manual records are applied per
// iteration, their auto-derived records are verified, and labels are merged
// after each of `iterations` iterations (default: the last iteration in the
// ledger). `after_iteration` is called with every merged state. Throws
// std::runtime_error on a ledger inconsistent with the manifest.
LabelState ReplayLedger(const DatasetManifest& manifest, const std::vector<LedgerRecord>& records,
                        const RunConfig& config, std::optional<int> iterations = std::nullopt,
                        const std::function<void(int, const LabelState&)>& after_iteration = {});

class Orchestrator {
 public:
  // `truth` enables the simulated scorers (AR, gained-TP ratio, CMC/mAP);
  // it never reaches the sampling path.
  Orchestrator(DatasetManifest manifest, RunConfig config, std::unique_ptr<ModelHook> hook,
               VerdictProvider& provider, std::optional<GroundTruth> truth,
               OrchestratorOptions options = {});

  // Writes config.txt, ledger.jsonl, metrics.jsonl, metrics.csv and
  // snapshot.jsonl into `dir`, truncating existing files.
  void AttachOutput(const std::filesystem::path& dir);

  // Continues the run recorded in `dir`: keeps the completed iterations of
  // metrics.jsonl, drops later ledger records, rebuilds the state and
  // re-attaches the output files. Throws when config.txt differs from the
  // current config.
  void Resume(const std::filesystem::path& dir);

  // Executes one full iteration. Returns false (without doing anything) once
  // a stop condition holds.
  bool RunIteration();
  void Run();

  const RunState& state() const { return state_; }
  const AnnotationLedger& ledger() const { return ledger_; }
  const RunConfig& config() const { return config_; }
  const DatasetManifest& manifest() const { return manifest_; }
  const SamplingSchedule& schedule() const { return schedule_; }
  std::optional<double> t_pa() const { return t_pa_; }
  const std::vector<TracePoint>& trace() const { return trace_; }

  // Manual annotations charged when the gained-TP ratio first reached
  // `ratio`; nullopt when it never did or no ground truth is available.
  std::optional<std::size_t> AnnotationsToReach(double ratio) const;

 private:
  CandidateBatch Select(const DistancePools& pools, int t);
  CandidateBatch SelectKMeansPairs(const DistanceCache& distances, int t, std::size_t budget);
  void ApplyVerdicts(const std::vector<OracleVerdict>& verdicts, int t);
  IterationMetrics Measure(int t, const DistanceCache& distances) const;
  bool CheckStop();
  void Publish(std::shared_ptr<const DistanceCache> distances);
  void WriteIterationOutputs(const IterationMetrics& m);
  void WriteSnapshotFile();
  void CountGain(const Decision& d);

  DatasetManifest manifest_;  // identities stripped
  RunConfig config_;
  std::unique_ptr<ModelHook> hook_;
  VerdictProvider& provider_;
  std::optional<GroundTruth> truth_;
  OrchestratorOptions options_;
  SamplingSchedule schedule_;
  std::optional<double> t_pa_;
  std::size_t total_pairs_ = 0;

  RunState state_;
  AnnotationLedger ledger_;
  std::vector<TracePoint> trace_;
  std::size_t gained_tp_ = 0;

  std::optional<std::filesystem::path> out_dir_;
  std::ofstream metrics_file_;
};

struct StrategyOutcome {
  Strategy strategy = Strategy::kViewAwareResample;
  std::vector<IterationMetrics> history;
  std::vector<TracePoint> trace;
  std::size_t total_tp = 0;
  StopReason stopped = StopReason::kNone;

  std::optional<std::size_t> AnnotationsToReach(double ratio) const;
};

// Runs one simulated experiment per strategy on the same manifest and seed,
// writing each run into `out_dir/<strategy>` when `out_dir` is set.
std::vector<StrategyOutcome> CompareStrategies(const DatasetManifest& manifest,
                                               const RunConfig& base,
                                               const std::vector<Strategy>& strategies,
                                               const std::optional<std::filesystem::path>& out_dir);

}  // namespace areid
