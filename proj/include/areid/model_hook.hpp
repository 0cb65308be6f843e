#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "areid/dataset.hpp"
#include "areid/embedding.hpp"
#include "areid/label_state.hpp"

namespace areid {

// Stand-in for the model-learning stage: produces the next embedding
// snapshot from the current one and the pseudo-labels. Implementations must
// not touch the label state.
class ModelHook {
 public:
  virtual ~ModelHook() = default;
  virtual EmbeddingSnapshot Refresh(const EmbeddingSnapshot& snapshot, const LabelState& state,
                                    const DatasetManifest& manifest) = 0;
};

// v' = (1 - alpha)·v + alpha·centroid(cluster(v)), centroid over every image
// of the cluster's tracklets. Stamp is incremented. Throws
// std::invalid_argument when alpha is outside [0, 1].
EmbeddingSnapshot CentroidPull(const EmbeddingSnapshot& snapshot, const LabelState& state,
                               const DatasetManifest& manifest, double alpha);

class CentroidPullHook final : public ModelHook {
 public:
  explicit CentroidPullHook(double alpha);
  EmbeddingSnapshot Refresh(const EmbeddingSnapshot& snapshot, const LabelState& state,
                            const DatasetManifest& manifest) override {
    return CentroidPull(snapshot, state, manifest, alpha_);
  }

 private:
  double alpha_;
};

// Shells out to an external trainer. Before each refresh the work directory
// receives manifest.jsonl (identities stripped), labels.jsonl
// ({"tracklet_id", "cluster_id"} per line) and snapshot_in.jsonl; the command
// must write snapshot_out.jsonl in the snapshot exchange format. Placeholders
// {manifest}, {labels}, {snapshot_in}, {snapshot_out} and {stamp} in the
// command are replaced with paths / the input stamp.
class ExternalTrainerHook final : public ModelHook {
 public:
  ExternalTrainerHook(std::string command, std::filesystem::path work_dir);
  EmbeddingSnapshot Refresh(const EmbeddingSnapshot& snapshot, const LabelState& state,
                            const DatasetManifest& manifest) override;

 private:
  std::string command_;
  std::filesystem::path work_dir_;
};

}  // namespace areid
