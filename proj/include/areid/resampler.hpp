#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "areid/label_state.hpp"
#include "areid/metric_core.hpp"
#include "areid/sampler.hpp"

namespace areid {

// Row-stochastic C × N_c distribution of tracklets over merged clusters.
struct SoftLabelMatrix {
  Eigen::MatrixXd values;
  // Cluster id of each column, ascending.
  std::vector<ClusterId> columns;
  // Column holding each tracklet's own cluster.
  std::vector<std::size_t> own_column;
  // Rows reset to their one-hot indicator after every step (tracklets in
  // clusters of two or more).
  std::vector<bool> clamped;
};

// T_ij = w_ij / Σ_k w_kj with w_ij = exp(-d_ij² / sigma); columns sum to 1.
// Weights are floored at the smallest normal double so every entry stays
// positive. Throws std::invalid_argument when sigma <= 0.
Eigen::MatrixXd BuildTransition(const DistanceCache& distances, double sigma);

// Median of d_ij² over all pairs i < j.
double MedianSquaredDistance(const DistanceCache& distances);
// Median over tracklets of the squared distance to their k-th nearest other
// tracklet.
double NeighborMedianSquaredDistance(const DistanceCache& distances, std::size_t k);

struct PropagationOptions {
  std::size_t max_iters = 50;
  double tol = 1e-6;
};

struct PropagationResult {
  // Fixed-point labels after the last (multiply, row-normalize, clamp) step.
  SoftLabelMatrix labels;
  // One further multiply + row-normalize of `labels` without clamping: the
  // neighbourhood distribution of every tracklet, clamped ones included.
  SoftLabelMatrix ranking;
  std::size_t iterations = 0;
  bool converged = false;
  // Max row-wise L1 change of the last step.
  double residual = 0.0;
};

// Called after every step with the clamped iterate.
using PropagationObserver = std::function<void(std::size_t iteration, const Eigen::MatrixXd&)>;

// One-hot initialization from the current clusters, then repeat
// Z <- TZ, row-normalize, clamp until the max row L1 change drops below tol
// or max_iters steps ran.
PropagationResult Propagate(const Eigen::MatrixXd& transition, const LabelState& state,
                            const PropagationOptions& options = {},
                            const PropagationObserver& observer = {});

// Clusters holding the k largest entries of `row` (ties by column index),
// as column indices in rank order.
std::vector<std::size_t> NearestClusters(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                         std::size_t k);

// Keeps a pair only when each tracklet's cluster is among the other's k
// nearest clusters. Preserves input order.
CandidateBatch ReciprocalFilter(const CandidateBatch& batch, const SoftLabelMatrix& soft,
                                std::size_t k);

// View-aware selection with refill: scans window·m1 same-view and window·m2
// cross-view undecided candidates, keeps the first m1 / m2 that pass the
// reciprocal filter, and leaves the rest undecided. Falls back to the plain
// view-aware batch when nothing passes, so a run cannot stall on a pool head
// the filter keeps rejecting. Throws std::invalid_argument when window == 0.
CandidateBatch ResampleViewAware(const DistancePools& pools, const LabelState& state, int t,
                                 const SamplingSchedule& schedule, const SoftLabelMatrix& soft,
                                 std::size_t k, std::size_t window);

}  // namespace areid
