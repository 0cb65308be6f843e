#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "areid/dataset.hpp"
#include "areid/dbscan.hpp"
#include "areid/metric_core.hpp"

namespace areid {

using ClusterId = std::int64_t;

enum class Verdict : std::uint8_t { kMatch, kNoMatch };

const char* VerdictName(Verdict v);  // "match" / "nomatch"
Verdict ParseVerdict(const std::string& s);

struct Decision {
  PairKey pair;
  Verdict verdict = Verdict::kMatch;

  bool operator==(const Decision&) const = default;
};

class AnnotationError : public std::runtime_error {
 public:
  enum class Kind { kContradiction, kAlreadyKnown };

  AnnotationError(Kind kind, const PairKey& pair, const std::string& what)
      : std::runtime_error(what), kind_(kind), pair_(pair) {}

  Kind kind() const { return kind_; }
  const PairKey& pair() const { return pair_; }

 private:
  Kind kind_;
  PairKey pair_;
};

// Must-link / cannot-link constraints over tracklets. Must-link is kept as
// connected components, so it is transitively closed by construction;
// cannot-link is kept between components, so a negative between two
// tracklets covers every member pair of their components.
class ConstraintGraph {
 public:
  ConstraintGraph() = default;
  explicit ConstraintGraph(std::vector<CameraId> tracklet_cameras);

  std::size_t tracklet_count() const { return component_.size(); }
  PairKey Pair(TrackletIndex a, TrackletIndex b) const;

  bool IsMustLink(TrackletIndex a, TrackletIndex b) const {
    return a != b && component_[a] == component_[b];
  }
  bool IsCannotLink(TrackletIndex a, TrackletIndex b) const {
    return cannot_[component_[a]].contains(component_[b]);
  }
  bool IsDecided(TrackletIndex a, TrackletIndex b) const {
    return IsMustLink(a, b) || IsCannotLink(a, b);
  }

  std::size_t must_link_count() const { return must_count_; }
  std::size_t cannot_link_count() const { return cannot_count_; }
  std::size_t decided_count() const { return must_count_ + cannot_count_; }

  // Explicit pair sets, sorted by (a, b).
  std::vector<PairKey> MustLinkPairs() const;
  std::vector<PairKey> CannotLinkPairs() const;

  // Sorted members of the must-link component holding `t`.
  std::span<const TrackletIndex> Component(TrackletIndex t) const {
    return members_[component_[t]];
  }

  // Records a verdict on an undecided pair with distinct components and
  // restores both closures. Returns every newly decided pair, the queried one
  // included, sorted by (a, b). Does not check for contradictions.
  std::vector<Decision> Link(TrackletIndex a, TrackletIndex b, Verdict verdict);

  bool operator==(const ConstraintGraph&) const = default;

 private:
  std::vector<CameraId> cameras_;
  std::vector<std::uint32_t> component_;  // tracklet -> component slot
  std::vector<std::vector<TrackletIndex>> members_;  // slot -> members (empty once absorbed)
  std::vector<std::set<std::uint32_t>> cannot_;      // slot -> cannot-linked slots
  std::size_t must_count_ = 0;
  std::size_t cannot_count_ = 0;
};

// Pseudo-labels Z plus the constraint graph. Single writer; copies are
// snapshots tagged by `generation`.
class LabelState {
 public:
  LabelState() = default;

  // One singleton cluster per tracklet with ids 1..C, empty graph,
  // generation 0.
  static LabelState Init(const DatasetManifest& manifest);

  std::size_t tracklet_count() const { return assignments_.size(); }
  ClusterId cluster_of(TrackletIndex t) const { return assignments_[t]; }
  const std::vector<ClusterId>& assignments() const { return assignments_; }
  std::size_t cluster_count() const { return cluster_sizes_.size(); }
  std::size_t cluster_size(ClusterId id) const { return cluster_sizes_.at(id); }
  std::vector<ClusterId> cluster_ids() const;
  // Members of every cluster, clusters in ascending id order.
  std::vector<std::vector<TrackletIndex>> clusters() const;
  const ConstraintGraph& graph() const { return graph_; }
  std::uint64_t generation() const { return generation_; }
  std::size_t manual_count() const { return manual_count_; }
  std::size_t auto_count() const { return auto_count_; }

  // Image-level labels through the image→tracklet mapping.
  std::vector<ClusterId> ImageLabels(const DatasetManifest& manifest) const;

  struct Outcome {
    // Newly decided pairs other than the queried one.
    std::vector<Decision> auto_annotated;
  };

  // Records a manual verdict. Throws AnnotationError (kAlreadyKnown when the
  // pair is decided and agrees, kContradiction when it disagrees) without
  // modifying the state.
  Outcome Apply(const PairKey& pair, Verdict verdict);

  // Re-derives cluster ids by DBSCAN over the merge distance (0 for must-link
  // pairs, 1 otherwise). Ids are renumbered 1..N_c by lowest member; noise
  // points become singletons. Increments the generation. Throws
  // std::invalid_argument for parameters under which DBSCAN would not respect
  // the must-link partition (eps outside [0, 1) or min_pts > 2).
  void MergeLabels(const DbscanParams& params = {});

  bool operator==(const LabelState&) const = default;

 private:
  std::vector<ClusterId> assignments_;
  std::map<ClusterId, std::size_t> cluster_sizes_;
  ConstraintGraph graph_;
  std::uint64_t generation_ = 0;
  std::size_t manual_count_ = 0;
  std::size_t auto_count_ = 0;
};

}  // namespace areid
