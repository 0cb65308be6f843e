#include "areid/model_hook.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace areid {

EmbeddingSnapshot CentroidPull(const EmbeddingSnapshot& snapshot, const LabelState& state,
                               const DatasetManifest& manifest, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  const std::size_t dim = snapshot.dimension();
  std::vector<double> data(snapshot.data());
  for (const auto& members : state.clusters()) {
    std::vector<double> centroid(dim, 0.0);
    std::size_t count = 0;
    for (TrackletIndex t : members) {
      for (std::size_t r : manifest.tracklets()[t].image_rows) {
        auto v = snapshot.row(r);
        for (std::size_t d = 0; d < dim; ++d) centroid[d] += v[d];
        ++count;
      }
    }
    for (double& x : centroid) x /= static_cast<double>(count);
    for (TrackletIndex t : members) {
      for (std::size_t r : manifest.tracklets()[t].image_rows) {
        auto v = snapshot.row(r);
        for (std::size_t d = 0; d < dim; ++d) {
          data[r * dim + d] = (1.0 - alpha) * v[d] + alpha * centroid[d];
        }
      }
    }
  }
  return EmbeddingSnapshot(snapshot.stamp() + 1, dim, std::move(data));
}

CentroidPullHook::CentroidPullHook(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
}

ExternalTrainerHook::ExternalTrainerHook(std::string command, std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {}

namespace {

void ReplaceAll(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

EmbeddingSnapshot ExternalTrainerHook::Refresh(const EmbeddingSnapshot& snapshot,
                                               const LabelState& state,
                                               const DatasetManifest& manifest) {
  std::filesystem::create_directories(work_dir_);
  const auto manifest_path = work_dir_ / "manifest.jsonl";
  const auto labels_path = work_dir_ / "labels.jsonl";
  const auto in_path = work_dir_ / "snapshot_in.jsonl";
  const auto out_path = work_dir_ / "snapshot_out.jsonl";

  WriteManifest(manifest.WithoutIdentities(), manifest_path);
  {
    std::ofstream labels(labels_path);
    for (TrackletIndex t = 0; t < manifest.tracklet_count(); ++t) {
      labels << nlohmann::json{{"tracklet_id", manifest.tracklets()[t].tracklet_id},
                               {"cluster_id", state.cluster_of(t)}}
                    .dump()
             << '\n';
    }
  }
  WriteSnapshot(snapshot, manifest, in_path);
  std::filesystem::remove(out_path);

  std::string command = command_;
  ReplaceAll(command, "{manifest}", manifest_path.string());
  ReplaceAll(command, "{labels}", labels_path.string());
  ReplaceAll(command, "{snapshot_in}", in_path.string());
  ReplaceAll(command, "{snapshot_out}", out_path.string());
  ReplaceAll(command, "{stamp}", std::to_string(snapshot.stamp()));
  const int status = std::system(command.c_str());
  if (status != 0) {
    throw std::runtime_error("external trainer exited with status " + std::to_string(status));
  }
  const EmbeddingSnapshot trained = ReadSnapshot(out_path, manifest);
  return EmbeddingSnapshot(snapshot.stamp() + 1, trained.dimension(), trained.data());
}

}  // namespace areid
