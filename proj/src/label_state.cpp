#include "areid/label_state.hpp"

#include <algorithm>
#include <unordered_map>

namespace areid {

const char* VerdictName(Verdict v) { return v == Verdict::kMatch ? "match" : "nomatch"; }

Verdict ParseVerdict(const std::string& s) {
  if (s == "match") return Verdict::kMatch;
  if (s == "nomatch") return Verdict::kNoMatch;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

ConstraintGraph::ConstraintGraph(std::vector<CameraId> tracklet_cameras)
    : cameras_(std::move(tracklet_cameras)),
      component_(cameras_.size()),
      members_(cameras_.size()),
      cannot_(cameras_.size()) {
  for (std::uint32_t t = 0; t < component_.size(); ++t) {
    component_[t] = t;
    members_[t] = {t};
  }
}

PairKey ConstraintGraph::Pair(TrackletIndex a, TrackletIndex b) const {
  return PairKey(a, b, cameras_[a] == cameras_[b] ? ViewClass::kSameView : ViewClass::kCrossView);
}

std::vector<PairKey> ConstraintGraph::MustLinkPairs() const {
  std::vector<PairKey> out;
  out.reserve(must_count_);
  for (const auto& group : members_) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) out.push_back(Pair(group[i], group[j]));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PairKey> ConstraintGraph::CannotLinkPairs() const {
  std::vector<PairKey> out;
  out.reserve(cannot_count_);
  for (std::uint32_t s = 0; s < members_.size(); ++s) {
    for (std::uint32_t x : cannot_[s]) {
      if (x < s) continue;
      for (TrackletIndex a : members_[s]) {
        for (TrackletIndex b : members_[x]) out.push_back(Pair(a, b));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Decision> ConstraintGraph::Link(TrackletIndex a, TrackletIndex b, Verdict verdict) {
  std::uint32_t sa = component_[a];
  std::uint32_t sb = component_[b];
  std::vector<Decision> added;
  auto cross = [&](std::uint32_t x, std::uint32_t y, Verdict v) {
    for (TrackletIndex p : members_[x]) {
      for (TrackletIndex q : members_[y]) added.push_back({Pair(p, q), v});
    }
    return members_[x].size() * members_[y].size();
  };

  if (verdict == Verdict::kNoMatch) {
    cannot_count_ += cross(sa, sb, Verdict::kNoMatch);
    cannot_[sa].insert(sb);
    cannot_[sb].insert(sa);
  } else {
    must_count_ += cross(sa, sb, Verdict::kMatch);
    // Negatives of either side now cover the other side too.
    for (std::uint32_t x : cannot_[sa]) {
      if (!cannot_[sb].contains(x)) cannot_count_ += cross(sb, x, Verdict::kNoMatch);
    }
    for (std::uint32_t x : cannot_[sb]) {
      if (!cannot_[sa].contains(x)) cannot_count_ += cross(sa, x, Verdict::kNoMatch);
    }
    // Absorb the smaller component into the larger one.
    if (members_[sa].size() < members_[sb].size() ||
        (members_[sa].size() == members_[sb].size() && sb < sa)) {
      std::swap(sa, sb);
    }
    for (std::uint32_t x : cannot_[sb]) {
      cannot_[x].erase(sb);
      cannot_[x].insert(sa);
      cannot_[sa].insert(x);
    }
    cannot_[sb].clear();
    for (TrackletIndex t : members_[sb]) component_[t] = sa;
    std::vector<TrackletIndex> merged;
    merged.reserve(members_[sa].size() + members_[sb].size());
    std::merge(members_[sa].begin(), members_[sa].end(), members_[sb].begin(),
               members_[sb].end(), std::back_inserter(merged));
    members_[sa] = std::move(merged);
    members_[sb].clear();
  }
  std::sort(added.begin(), added.end(),
            [](const Decision& x, const Decision& y) { return x.pair < y.pair; });
  return added;
}

LabelState LabelState::Init(const DatasetManifest& manifest) {
  LabelState s;
  std::vector<CameraId> cameras;
  cameras.reserve(manifest.tracklet_count());
  for (const Tracklet& t : manifest.tracklets()) cameras.push_back(t.camera_id);
  s.graph_ = ConstraintGraph(std::move(cameras));
  s.assignments_.resize(manifest.tracklet_count());
  for (std::size_t t = 0; t < s.assignments_.size(); ++t) {
    s.assignments_[t] = static_cast<ClusterId>(t + 1);
    s.cluster_sizes_[static_cast<ClusterId>(t + 1)] = 1;
  }
  return s;
}

std::vector<ClusterId> LabelState::cluster_ids() const {
  std::vector<ClusterId> ids;
  ids.reserve(cluster_sizes_.size());
  for (const auto& [id, size] : cluster_sizes_) ids.push_back(id);
  return ids;
}

std::vector<std::vector<TrackletIndex>> LabelState::clusters() const {
  std::unordered_map<ClusterId, std::size_t> slot;
  std::vector<std::vector<TrackletIndex>> out;
  out.reserve(cluster_sizes_.size());
  for (const auto& [id, size] : cluster_sizes_) {
    slot.emplace(id, out.size());
    out.emplace_back().reserve(size);
  }
  for (TrackletIndex t = 0; t < assignments_.size(); ++t) out[slot.at(assignments_[t])].push_back(t);
  return out;
}

std::vector<ClusterId> LabelState::ImageLabels(const DatasetManifest& manifest) const {
  std::vector<ClusterId> labels(manifest.image_count());
  for (TrackletIndex t = 0; t < manifest.tracklet_count(); ++t) {
    for (std::size_t row : manifest.tracklets()[t].image_rows) labels[row] = assignments_[t];
  }
  return labels;
}

LabelState::Outcome LabelState::Apply(const PairKey& pair, Verdict verdict) {
  const TrackletIndex a = pair.a();
  const TrackletIndex b = pair.b();
  if (b >= tracklet_count()) throw std::out_of_range("pair refers to an unknown tracklet");
  const bool must = graph_.IsMustLink(a, b);
  const bool cannot = graph_.IsCannotLink(a, b);
  if (must || cannot) {
    const bool agrees = (must && verdict == Verdict::kMatch) || (cannot && verdict == Verdict::kNoMatch);
    const std::string where = "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
    if (agrees) {
      throw AnnotationError(AnnotationError::Kind::kAlreadyKnown, pair,
                            "pair " + where + " is already decided");
    }
    throw AnnotationError(AnnotationError::Kind::kContradiction, pair,
                          std::string("verdict ") + VerdictName(verdict) + " on pair " + where +
                              " contradicts the existing constraints");
  }

  auto added = graph_.Link(a, b, verdict);
  if (verdict == Verdict::kMatch) {
    ClusterId keep = std::min(assignments_[a], assignments_[b]);
    ClusterId drop = std::max(assignments_[a], assignments_[b]);
    for (TrackletIndex t : graph_.Component(a)) assignments_[t] = keep;
    cluster_sizes_[keep] += cluster_sizes_[drop];
    cluster_sizes_.erase(drop);
  }
  Outcome out;
  out.auto_annotated.reserve(added.size() - 1);
  for (const Decision& d : added) {
    if (!(d.pair == pair)) out.auto_annotated.push_back(d);
  }
  ++manual_count_;
  auto_count_ += out.auto_annotated.size();
  return out;
}

void LabelState::MergeLabels(const DbscanParams& params) {
  if (!(params.eps >= 0.0 && params.eps < 1.0) || params.min_pts > 2) {
    throw std::invalid_argument(
        "label merging needs eps in [0, 1) and min_pts <= 2 to respect must-link clusters");
  }
  const std::size_t n = tracklet_count();
  const auto labels = Dbscan(
      n,
      [&](std::size_t p) {
        auto members = graph_.Component(static_cast<TrackletIndex>(p));
        return std::vector<std::size_t>(members.begin(), members.end());
      },
      params.min_pts);

  std::unordered_map<int, ClusterId> renamed;
  ClusterId next = 1;
  cluster_sizes_.clear();
  for (std::size_t t = 0; t < n; ++t) {
    ClusterId id;
    if (labels[t] == kDbscanNoise) {
      id = next++;
    } else {
      auto [it, inserted] = renamed.try_emplace(labels[t], next);
      if (inserted) ++next;
      id = it->second;
    }
    assignments_[t] = id;
    ++cluster_sizes_[id];
  }
  ++generation_;
}

}  // namespace areid
