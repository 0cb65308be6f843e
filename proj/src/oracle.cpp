#include "areid/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace areid {

OracleVerdict SimulatedOracle::Answer(const PairKey& pair) const {
  if (pair.b() >= truth_.size()) throw std::out_of_range("pair refers to an unknown tracklet");
  OracleVerdict v;
  v.pair = pair;
  v.verdict = truth_.SameIdentity(pair.a(), pair.b()) ? Verdict::kMatch : Verdict::kNoMatch;
  v.origin = VerdictOrigin::kSimulated;
  return v;
}

HumanVerdict ParseHumanVerdict(const std::string& s) {
  if (s == "match") return HumanVerdict::kMatch;
  if (s == "nomatch") return HumanVerdict::kNoMatch;
  if (s == "skip") return HumanVerdict::kSkip;
  throw std::invalid_argument("verdict must be match, nomatch or skip");
}

AnnotationQueue::AnnotationQueue(std::chrono::milliseconds lease) : lease_(lease) {}

std::vector<std::uint64_t> AnnotationQueue::Enqueue(const CandidateBatch& batch,
                                                    std::uint64_t generation) {
  std::lock_guard lock(mu_);
  std::vector<std::uint64_t> ids;
  const auto now = std::chrono::steady_clock::now();
  for (const PairDistance& pd : batch.pairs) {
    const std::uint64_t id = next_id_++;
    pending_.emplace(id, Entry{PendingQuery{id, pd, generation}, {}, now});
    order_.push_back(id);
    ids.push_back(id);
  }
  return ids;
}

std::optional<PendingQuery> AnnotationQueue::Next() {
  std::lock_guard lock(mu_);
  const auto now = std::chrono::steady_clock::now();
  for (std::uint64_t id : order_) {
    Entry& e = pending_.at(id);
    if (e.leased_until <= now) {
      e.leased_until = now + lease_;
      return e.query;
    }
  }
  return std::nullopt;
}

std::optional<PendingQuery> AnnotationQueue::Peek(std::uint64_t pair_id) const {
  std::lock_guard lock(mu_);
  auto it = pending_.find(pair_id);
  if (it == pending_.end()) return std::nullopt;
  return it->second.query;
}

AnnotationQueue::SubmitStatus AnnotationQueue::Submit(std::uint64_t pair_id,
                                                      HumanVerdict verdict) {
  std::lock_guard lock(mu_);
  if (answered_.contains(pair_id)) return SubmitStatus::kAlreadyAnswered;
  auto it = pending_.find(pair_id);
  if (it == pending_.end()) return SubmitStatus::kUnknownPair;
  order_.erase(std::find(order_.begin(), order_.end(), pair_id));
  if (verdict == HumanVerdict::kSkip) {
    it->second.leased_until = {};
    order_.push_back(pair_id);
    ++skipped_;
    return SubmitStatus::kAccepted;
  }
  OracleVerdict v;
  v.pair = it->second.query.candidate.pair;
  v.verdict = verdict == HumanVerdict::kMatch ? Verdict::kMatch : Verdict::kNoMatch;
  v.origin = VerdictOrigin::kHuman;
  v.latency = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - it->second.enqueued_at);
  pending_.erase(it);
  answered_.insert(pair_id);
  verdicts_.push_back(v);
  cv_.notify_all();
  return SubmitStatus::kAccepted;
}

std::optional<OracleVerdict> AnnotationQueue::WaitVerdict(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !verdicts_.empty() || closed_; });
  if (verdicts_.empty()) return std::nullopt;
  OracleVerdict v = verdicts_.front();
  verdicts_.pop_front();
  return v;
}

std::size_t AnnotationQueue::outstanding() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

std::size_t AnnotationQueue::skipped() const {
  std::lock_guard lock(mu_);
  return skipped_;
}

void AnnotationQueue::Close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool AnnotationQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

}  // namespace areid
