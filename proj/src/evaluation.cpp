#include "areid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "areid/sampler.hpp"
#include "json.hpp"

namespace areid {

TpaEstimate EstimateTpa(std::span<const IdentityId> identities, std::size_t runs,
                        std::uint64_t seed) {
  if (runs == 0) throw std::invalid_argument("T_pa estimation needs at least one run");
  const std::size_t n = identities.size();
  const std::size_t total_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  std::mt19937_64 rng(seed);
  TpaEstimate est;
  for (std::size_t run = 0; run < runs; ++run) {
    ConstraintGraph graph(std::vector<CameraId>(n, 0));
    std::size_t picks = 0;
    while (graph.decided_count() < total_pairs) {
      auto a = static_cast<TrackletIndex>(UniformBelow(rng, n));
      auto b = static_cast<TrackletIndex>(UniformBelow(rng, n - 1));
      if (b >= a) ++b;
      if (graph.IsDecided(a, b)) continue;
      graph.Link(a, b, identities[a] == identities[b] ? Verdict::kMatch : Verdict::kNoMatch);
      ++picks;
    }
    est.per_run.push_back(picks);
  }
  const double sum = std::accumulate(est.per_run.begin(), est.per_run.end(), 0.0);
  est.mean = sum / static_cast<double>(runs);
  if (runs > 1) {
    double sq = 0.0;
    for (std::size_t p : est.per_run) sq += (static_cast<double>(p) - est.mean) * (static_cast<double>(p) - est.mean);
    est.stddev = std::sqrt(sq / static_cast<double>(runs - 1));
  }
  return est;
}

std::size_t GainedTpCount(const LabelState& state, const GroundTruth& truth) {
  std::size_t gained = 0;
  std::vector<bool> seen(state.tracklet_count(), false);
  for (TrackletIndex t = 0; t < state.tracklet_count(); ++t) {
    if (seen[t]) continue;
    std::map<IdentityId, std::size_t> counts;
    for (TrackletIndex m : state.graph().Component(t)) {
      seen[m] = true;
      ++counts[truth.identity[m]];
    }
    for (const auto& [id, c] : counts) gained += c * (c - 1) / 2;
  }
  return gained;
}

double GainedTpRatio(const LabelState& state, const GroundTruth& truth) {
  const std::size_t total = truth.TruePositivePairCount();
  if (total == 0) return 1.0;
  return static_cast<double>(GainedTpCount(state, truth)) / static_cast<double>(total);
}

BudgetReport MakeBudgetReport(const LabelState& state, double t_pa, const GroundTruth& truth) {
  BudgetReport r;
  r.tp_manual = state.manual_count();
  r.auto_count = state.auto_count();
  r.t_pa = t_pa;
  r.ar = t_pa > 0.0 ? static_cast<double>(r.tp_manual) / t_pa : 0.0;
  r.gained_tp_ratio = GainedTpRatio(state, truth);
  return r;
}

double ReidResult::RankRate(std::size_t rank) const {
  if (cmc.empty() || rank == 0) return 0.0;
  return cmc[std::min(rank, cmc.size()) - 1];
}

namespace {

template <typename DistanceFn>
ReidResult Rank(const DatasetManifest& manifest, const GroundTruth& truth,
                std::span<const TrackletIndex> queries, std::span<const TrackletIndex> gallery,
                const ReidOptions& options, DistanceFn distance) {
  if (queries.empty() || gallery.empty()) {
    throw std::invalid_argument("re-ID evaluation needs non-empty query and gallery sets");
  }
  ReidResult result;
  std::vector<std::size_t> hits_at;  // hits_at[r]: queries whose first match is at rank r
  double ap_sum = 0.0;
  std::vector<std::pair<double, TrackletIndex>> ranked;
  for (TrackletIndex q : queries) {
    ranked.clear();
    for (TrackletIndex g : gallery) {
      if (g == q) continue;
      const bool same_id = truth.SameIdentity(q, g);
      if (options.exclude_same_camera && same_id &&
          manifest.tracklet_camera(q) == manifest.tracklet_camera(g)) {
        continue;
      }
      ranked.emplace_back(distance(q, g), g);
    }
    std::sort(ranked.begin(), ranked.end());
    std::size_t relevant = 0;
    double precision_sum = 0.0;
    std::optional<std::size_t> first;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (!truth.SameIdentity(q, ranked[r].second)) continue;
      ++relevant;
      precision_sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
      if (!first) first = r;
    }
    if (!first) {
      result.skipped_queries.push_back(q);
      continue;
    }
    ++result.evaluated_queries;
    if (hits_at.size() < ranked.size()) hits_at.resize(ranked.size(), 0);
    ++hits_at[*first];
    ap_sum += precision_sum / static_cast<double>(relevant);
  }
  if (result.evaluated_queries > 0) {
    const auto denom = static_cast<double>(result.evaluated_queries);
    result.cmc.resize(hits_at.size());
    std::size_t cumulative = 0;
    for (std::size_t r = 0; r < hits_at.size(); ++r) {
      cumulative += hits_at[r];
      result.cmc[r] = static_cast<double>(cumulative) / denom;
    }
    result.mean_ap = ap_sum / denom;
  }
  return result;
}

}  // namespace

ReidResult EvaluateReid(const DistanceCache& distances, const DatasetManifest& manifest,
                        const GroundTruth& truth, std::span<const TrackletIndex> queries,
                        std::span<const TrackletIndex> gallery, const ReidOptions& options) {
  return Rank(manifest, truth, queries, gallery, options,
              [&](TrackletIndex q, TrackletIndex g) { return distances.at(q, g); });
}

ReidResult EvaluateReid(const DatasetManifest& manifest, const EmbeddingSnapshot& embeddings,
                        const GroundTruth& truth, std::span<const TrackletIndex> queries,
                        std::span<const TrackletIndex> gallery, std::size_t k_dist,
                        const ReidOptions& options) {
  auto members = [&](TrackletIndex t) {
    std::vector<std::span<const double>> rows;
    for (std::size_t r : manifest.tracklets()[t].image_rows) rows.push_back(embeddings.row(r));
    return rows;
  };
  return Rank(manifest, truth, queries, gallery, options, [&](TrackletIndex q, TrackletIndex g) {
    return SetToSetDistance(members(q), members(g), k_dist);
  });
}

namespace {

using nlohmann::json;

json Optional(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> ReadOptional(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::string Cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

}  // namespace

std::string FormatMetricsLine(const IterationMetrics& m) {
  json obj = json::object();
  obj["iteration"] = m.iteration;
  obj["tp_manual"] = m.tp_manual;
  obj["auto_count"] = m.auto_count;
  obj["AR"] = Optional(m.ar);
  obj["gained_TP_ratio"] = Optional(m.gained_tp_ratio);
  obj["rank1"] = Optional(m.rank1);
  obj["rank5"] = Optional(m.rank5);
  obj["rank10"] = Optional(m.rank10);
  obj["rank20"] = Optional(m.rank20);
  obj["mAP"] = Optional(m.map);
  obj["already_known"] = m.already_known;
  obj["cluster_count"] = m.cluster_count;
  return obj.dump();
}

IterationMetrics ParseMetricsLine(const std::string& line) {
  const json obj = json::parse(line);
  IterationMetrics m;
  m.iteration = obj.at("iteration").get<int>();
  m.tp_manual = obj.at("tp_manual").get<std::size_t>();
  m.auto_count = obj.at("auto_count").get<std::size_t>();
  m.already_known = obj.value("already_known", std::size_t{0});
  m.cluster_count = obj.value("cluster_count", std::size_t{0});
  m.ar = ReadOptional(obj, "AR");
  m.gained_tp_ratio = ReadOptional(obj, "gained_TP_ratio");
  m.rank1 = ReadOptional(obj, "rank1");
  m.rank5 = ReadOptional(obj, "rank5");
  m.rank10 = ReadOptional(obj, "rank10");
  m.rank20 = ReadOptional(obj, "rank20");
  m.map = ReadOptional(obj, "mAP");
  return m;
}

std::vector<IterationMetrics> LoadMetrics(std::istream& in) {
  std::vector<IterationMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(ParseMetricsLine(line));
  }
  return out;
}

void WriteMetricsTable(std::ostream& out, const std::vector<IterationMetrics>& history,
                       const std::vector<std::pair<std::string, std::string>>& prefix,
                       bool header) {
  if (header) {
    for (const auto& [name, value] : prefix) out << name << ',';
    out << "iteration,tp_manual,auto_count,already_known,cluster_count,AR,gained_TP_ratio,"
           "rank1,rank5,rank10,rank20,mAP\n";
  }
  for (const IterationMetrics& m : history) {
    for (const auto& [name, value] : prefix) out << value << ',';
    out << m.iteration << ',' << m.tp_manual << ',' << m.auto_count << ',' << m.already_known
        << ',' << m.cluster_count << ',' << Cell(m.ar) << ',' << Cell(m.gained_tp_ratio) << ','
        << Cell(m.rank1) << ',' << Cell(m.rank5) << ',' << Cell(m.rank10) << ','
        << Cell(m.rank20) << ',' << Cell(m.map) << '\n';
  }
}

}  // namespace areid
