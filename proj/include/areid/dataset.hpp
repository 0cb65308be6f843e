#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace areid {

using ImageId = std::int64_t;
using TrackletId = std::int64_t;
using CameraId = std::int64_t;
using IdentityId = std::int64_t;

// Dense position of a tracklet in DatasetManifest::tracklets(). All
// algorithmic modules work on these; external files use TrackletId.
using TrackletIndex = std::uint32_t;

struct ImageRecord {
  ImageId image_id = 0;
  TrackletId tracklet_id = 0;
  CameraId camera_id = 0;
  std::vector<double> feature;
  std::optional<std::string> image_path;
  std::optional<IdentityId> identity;

  bool operator==(const ImageRecord&) const = default;
};

struct Tracklet {
  TrackletId tracklet_id = 0;
  CameraId camera_id = 0;
  std::vector<ImageId> image_ids;
  // Positions of the member images in DatasetManifest::images().
  std::vector<std::size_t> image_rows;

  bool operator==(const Tracklet&) const = default;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}

  // 1-based line in the source file; 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Immutable after construction. Tracklets are ordered by ascending
// tracklet_id; images keep their input order.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  // Validates the records and derives the tracklet partition. `source_lines`
  // (optional, parallel to `images`) is used for error locations; otherwise
  // the record at position i is reported as line i + 2 (after the header).
  static DatasetManifest Build(std::size_t dimension, std::size_t camera_count,
                               std::vector<ImageRecord> images,
                               std::span<const std::size_t> source_lines = {});

  std::size_t dimension() const { return dimension_; }
  std::size_t camera_count() const { return camera_count_; }
  const std::vector<ImageRecord>& images() const { return images_; }
  const std::vector<Tracklet>& tracklets() const { return tracklets_; }
  std::size_t image_count() const { return images_.size(); }
  std::size_t tracklet_count() const { return tracklets_.size(); }

  std::optional<TrackletIndex> FindTracklet(TrackletId id) const;
  std::optional<std::size_t> FindImage(ImageId id) const;
  CameraId tracklet_camera(TrackletIndex t) const { return tracklets_[t].camera_id; }

  bool has_identities() const;

  // Copy with every ground-truth identity removed. This is the view handed to
  // everything except the simulated oracle and the scorers.
  DatasetManifest WithoutIdentities() const;

  bool operator==(const DatasetManifest& other) const {
    return dimension_ == other.dimension_ && camera_count_ == other.camera_count_ &&
           images_ == other.images_;
  }

 private:
  std::size_t dimension_ = 0;
  std::size_t camera_count_ = 0;
  std::vector<ImageRecord> images_;
  std::vector<Tracklet> tracklets_;
  std::unordered_map<TrackletId, TrackletIndex> tracklet_lookup_;
  std::unordered_map<ImageId, std::size_t> image_lookup_;
};

// Tracklet-level ground truth, indexed by TrackletIndex.
struct GroundTruth {
  std::vector<IdentityId> identity;

  std::size_t size() const { return identity.size(); }
  bool SameIdentity(TrackletIndex a, TrackletIndex b) const {
    return identity[a] == identity[b];
  }
  // Number of tracklet pairs sharing an identity.
  std::size_t TruePositivePairCount() const;
};

// Throws ManifestError when an image lacks an identity or a tracklet mixes
// identities.
GroundTruth ExtractGroundTruth(const DatasetManifest& manifest);

struct LoadOptions {
  // L2-normalize every feature vector on ingest.
  bool l2_normalize = false;
};

DatasetManifest LoadManifest(const std::filesystem::path& path, const LoadOptions& options = {});
DatasetManifest ParseManifest(std::istream& in, const LoadOptions& options = {});
void WriteManifest(const DatasetManifest& manifest, const std::filesystem::path& path);
void WriteManifest(const DatasetManifest& manifest, std::ostream& out);

// Inclusive uniform range for per-entity counts.
struct CountRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

struct SyntheticOptions {
  std::size_t identities = 10;
  std::size_t cameras = 2;
  CountRange tracklets_per_identity_per_camera{1, 1};
  CountRange images_per_tracklet{5, 5};
  std::size_t dimension = 32;
  double within_id_std = 0.5;
  double cross_camera_shift_std = 1.0;
  // Offset shared by every image of a camera (a camera-wide domain shift);
  // 0 disables it.
  double camera_bias_std = 0.0;
  std::uint64_t seed = 0;
};

// Every identity gets a unit-Gaussian base vector; every (identity, camera)
// an offset with std cross_camera_shift_std; every camera an optional shared
// offset with std camera_bias_std; every image adds noise with std
// within_id_std. Deterministic for a fixed seed.
DatasetManifest GenerateSynthetic(const SyntheticOptions& options);

}  // namespace areid
