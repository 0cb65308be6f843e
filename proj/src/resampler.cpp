#include "areid/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace areid {

Eigen::MatrixXd BuildTransition(const DistanceCache& distances, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const auto n = static_cast<Eigen::Index>(distances.size());
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = distances.at(static_cast<TrackletIndex>(i), static_cast<TrackletIndex>(j));
      w(i, j) = std::max(std::exp(-d * d / sigma), std::numeric_limits<double>::min());
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) w.col(j) /= w.col(j).sum();
  return w;
}

double MedianSquaredDistance(const DistanceCache& distances) {
  std::vector<double> sq(distances.condensed());
  if (sq.empty()) return 1.0;
  for (double& x : sq) x *= x;
  const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
  std::nth_element(sq.begin(), mid, sq.end());
  double median = *mid;
  if (sq.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(sq.begin(), mid));
  }
  if (median > 0.0) return median;
  const double smallest_positive = std::accumulate(
      sq.begin(), sq.end(), std::numeric_limits<double>::infinity(),
      [](double acc, double x) { return x > 0.0 ? std::min(acc, x) : acc; });
  return std::isfinite(smallest_positive) ? smallest_positive : 1.0;
}

double NeighborMedianSquaredDistance(const DistanceCache& distances, std::size_t k) {
  const std::size_t n = distances.size();
  if (n < 2) return 1.0;
  k = std::clamp<std::size_t>(k, 1, n - 1);
  std::vector<double> kth(n), row(n - 1);
  for (TrackletIndex i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (TrackletIndex j = 0; j < n; ++j) {
      if (j != i) row[m++] = distances.at(i, j);
    }
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    kth[i] = row[k - 1] * row[k - 1];
  }
  const auto mid = kth.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(kth.begin(), mid, kth.end());
  return *mid > 0.0 ? *mid : MedianSquaredDistance(distances);
}

namespace {

void RowNormalize(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) /= m.row(r).sum();
}

}  // namespace

PropagationResult Propagate(const Eigen::MatrixXd& transition, const LabelState& state,
                            const PropagationOptions& options,
                            const PropagationObserver& observer) {
  const auto n = static_cast<Eigen::Index>(state.tracklet_count());
  if (transition.rows() != n || transition.cols() != n) {
    throw std::invalid_argument("transition matrix does not match the tracklet count");
  }
  SoftLabelMatrix soft;
  soft.columns = state.cluster_ids();
  std::unordered_map<ClusterId, std::size_t> column_of;
  for (std::size_t c = 0; c < soft.columns.size(); ++c) column_of.emplace(soft.columns[c], c);
  soft.own_column.resize(static_cast<std::size_t>(n));
  soft.clamped.resize(static_cast<std::size_t>(n));
  soft.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(soft.columns.size()));

  std::vector<Eigen::Index> free_rows;
  for (Eigen::Index t = 0; t < n; ++t) {
    const ClusterId id = state.cluster_of(static_cast<TrackletIndex>(t));
    const std::size_t c = column_of.at(id);
    soft.own_column[static_cast<std::size_t>(t)] = c;
    soft.clamped[static_cast<std::size_t>(t)] = state.cluster_size(id) >= 2;
    soft.values(t, static_cast<Eigen::Index>(c)) = 1.0;
    if (!soft.clamped[static_cast<std::size_t>(t)]) free_rows.push_back(t);
  }

  PropagationResult result;
  // Clamped rows never change, so only free rows are recomputed each step.
  const auto f = static_cast<Eigen::Index>(free_rows.size());
  Eigen::MatrixXd free_transition(f, n);
  for (Eigen::Index r = 0; r < f; ++r) free_transition.row(r) = transition.row(free_rows[r]);
  Eigen::MatrixXd step(f, soft.values.cols());
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    step.noalias() = free_transition * soft.values;
    RowNormalize(step);
    double residual = 0.0;
    for (Eigen::Index r = 0; r < f; ++r) {
      residual = std::max(residual, (step.row(r) - soft.values.row(free_rows[r])).lpNorm<1>());
      soft.values.row(free_rows[r]) = step.row(r);
    }
    result.iterations = iter + 1;
    result.residual = residual;
    if (observer) observer(result.iterations, soft.values);
    if (residual < options.tol) {
      result.converged = true;
      break;
    }
  }

  result.ranking = soft;
  result.ranking.values = transition * soft.values;
  RowNormalize(result.ranking.values);
  result.labels = std::move(soft);
  return result;
}

std::vector<std::size_t> NearestClusters(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                         std::size_t k) {
  std::vector<std::size_t> order(static_cast<std::size_t>(row.size()));
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t x, std::size_t y) {
                      const double vx = row(static_cast<Eigen::Index>(x));
                      const double vy = row(static_cast<Eigen::Index>(y));
                      if (vx != vy) return vx > vy;
                      return x < y;
                    });
  order.resize(k);
  return order;
}

namespace {

// Whether `column` is among the k largest entries of row `r` (ties by index).
bool InTopK(const Eigen::MatrixXd& values, Eigen::Index r, std::size_t column, std::size_t k) {
  const double v = values(r, static_cast<Eigen::Index>(column));
  std::size_t ahead = 0;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const double x = values(r, c);
    if (x > v || (x == v && static_cast<std::size_t>(c) < column)) {
      if (++ahead >= k) return false;
    }
  }
  return true;
}

}  // namespace

CandidateBatch ReciprocalFilter(const CandidateBatch& batch, const SoftLabelMatrix& soft,
                                std::size_t k) {
  CandidateBatch out;
  out.iteration = batch.iteration;
  for (const PairDistance& pd : batch.pairs) {
    const TrackletIndex a = pd.pair.a();
    const TrackletIndex b = pd.pair.b();
    if (InTopK(soft.values, a, soft.own_column[b], k) &&
        InTopK(soft.values, b, soft.own_column[a], k)) {
      out.pairs.push_back(pd);
      if (pd.pair.view() == ViewClass::kSameView) {
        ++out.same_view_selected;
      } else {
        ++out.cross_view_selected;
      }
    }
  }
  return out;
}

CandidateBatch ResampleViewAware(const DistancePools& pools, const LabelState& state, int t,
                                 const SamplingSchedule& schedule, const SoftLabelMatrix& soft,
                                 std::size_t k, std::size_t window) {
  if (window == 0) throw std::invalid_argument("resampling window must be at least 1");
  const ScheduleCounts counts = CountsForIteration(t, schedule);
  SamplingSchedule wide = schedule;
  wide.s1 *= window;
  wide.s2 *= window;
  wide.s3 *= window;
  wide.s4 *= window;
  const CandidateBatch kept = ReciprocalFilter(SelectViewAware(pools, state, t, wide), soft, k);
  CandidateBatch out;
  out.iteration = t;
  for (const PairDistance& pd : kept.pairs) {
    if (pd.pair.view() == ViewClass::kSameView) {
      if (out.same_view_selected == counts.m1) continue;
      ++out.same_view_selected;
    } else {
      if (out.cross_view_selected == counts.m2) continue;
      ++out.cross_view_selected;
    }
    out.pairs.push_back(pd);
  }
  if (out.pairs.empty()) return SelectViewAware(pools, state, t, schedule);
  return out;
}

}  // namespace areid
