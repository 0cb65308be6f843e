#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "areid/dataset.hpp"

namespace areid {

// Current feature vectors for every image, row-aligned with
// DatasetManifest::images(). `stamp` versions the snapshot; distance caches
// record the stamp they were computed under.
class EmbeddingSnapshot {
 public:
  EmbeddingSnapshot() = default;
  EmbeddingSnapshot(std::uint64_t stamp, std::size_t dimension, std::vector<double> data);

  // Snapshot with stamp 0 holding the manifest's ingested features.
  static EmbeddingSnapshot FromManifest(const DatasetManifest& manifest);

  std::uint64_t stamp() const { return stamp_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t rows() const { return dimension_ == 0 ? 0 : data_.size() / dimension_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dimension_, dimension_}; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const EmbeddingSnapshot&) const = default;

 private:
  std::uint64_t stamp_ = 0;
  std::size_t dimension_ = 0;
  std::vector<double> data_;
};

// Exchange format for external trainers: a header line {"stamp": n} followed
// by one {"image_id": ..., "feature": [...]} line per image. Extra fields on
// feature lines (as in manifest lines) are ignored on read.
void WriteSnapshot(const EmbeddingSnapshot& snapshot, const DatasetManifest& manifest,
                   std::ostream& out);
void WriteSnapshot(const EmbeddingSnapshot& snapshot, const DatasetManifest& manifest,
                   const std::filesystem::path& path);
EmbeddingSnapshot ReadSnapshot(std::istream& in, const DatasetManifest& manifest);
EmbeddingSnapshot ReadSnapshot(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace areid
