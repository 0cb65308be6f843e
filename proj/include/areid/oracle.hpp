#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "areid/dataset.hpp"
#include "areid/label_state.hpp"
#include "areid/sampler.hpp"

namespace areid {

enum class VerdictOrigin : std::uint8_t { kSimulated, kHuman };

struct OracleVerdict {
  PairKey pair;
  Verdict verdict = Verdict::kMatch;
  std::chrono::nanoseconds latency{0};
  VerdictOrigin origin = VerdictOrigin::kSimulated;
};

// Answers from ground truth: Match iff both tracklets share an identity.
class SimulatedOracle {
 public:
  explicit SimulatedOracle(GroundTruth truth) : truth_(std::move(truth)) {}

  OracleVerdict Answer(const PairKey& pair) const;
  const GroundTruth& truth() const { return truth_; }

 private:
  GroundTruth truth_;
};

enum class HumanVerdict : std::uint8_t { kMatch, kNoMatch, kSkip };

HumanVerdict ParseHumanVerdict(const std::string& s);  // "match" | "nomatch" | "skip"

struct PendingQuery {
  std::uint64_t pair_id = 0;
  PairDistance candidate;
  std::uint64_t generation = 0;
};

// Pending human queries. One producer (the orchestrator) enqueues a batch;
// any number of annotators lease pairs with Next() and answer them. A leased
// pair is handed to nobody else until it is answered or its lease expires.
// Verdicts are drained in arrival order. Thread-safe.
class AnnotationQueue {
 public:
  enum class SubmitStatus { kAccepted, kAlreadyAnswered, kUnknownPair };

  explicit AnnotationQueue(std::chrono::milliseconds lease = std::chrono::seconds(60));

  // Returns the pair ids assigned to the batch, in batch order.
  std::vector<std::uint64_t> Enqueue(const CandidateBatch& batch, std::uint64_t generation);

  std::optional<PendingQuery> Next();
  std::optional<PendingQuery> Peek(std::uint64_t pair_id) const;

  // Skip re-queues the pair at the tail without producing a verdict.
  SubmitStatus Submit(std::uint64_t pair_id, HumanVerdict verdict);

  // Blocks until a verdict is available, the queue is closed, or the timeout
  // passes.
  std::optional<OracleVerdict> WaitVerdict(std::chrono::milliseconds timeout);

  // Pairs enqueued but not yet answered with match/nomatch.
  std::size_t outstanding() const;
  std::size_t skipped() const;

  void Close();
  bool closed() const;

 private:
  struct Entry {
    PendingQuery query;
    std::chrono::steady_clock::time_point leased_until{};
    std::chrono::steady_clock::time_point enqueued_at{};
  };

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::chrono::milliseconds lease_;
  std::deque<std::uint64_t> order_;           // pending ids, head first
  std::map<std::uint64_t, Entry> pending_;
  std::set<std::uint64_t> answered_;
  std::deque<OracleVerdict> verdicts_;
  std::uint64_t next_id_ = 1;
  std::size_t skipped_ = 0;
  bool closed_ = false;
};

}  // namespace areid
