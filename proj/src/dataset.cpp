#include "areid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace areid {

namespace {

using nlohmann::json;

std::string At(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::int64_t RequireInt(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ManifestError(At(line) + "missing field '" + key + "'", line);
  }
  if (!it->is_number_integer()) {
    throw ManifestError(At(line) + "field '" + key + "' must be an integer", line);
  }
  return it->get<std::int64_t>();
}

void L2Normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (double& x : v) x /= norm;
}

}  // namespace

DatasetManifest DatasetManifest::Build(std::size_t dimension, std::size_t camera_count,
                                       std::vector<ImageRecord> images,
                                       std::span<const std::size_t> source_lines) {
  auto line_of = [&](std::size_t i) {
    return source_lines.empty() ? i + 2 : source_lines[i];
  };
  if (dimension == 0) throw ManifestError("dimension must be positive", 1);
  if (camera_count == 0) throw ManifestError("camera_count must be at least 1", 1);
  if (images.empty()) throw ManifestError("manifest has no images (no tracklets)", 0);

  DatasetManifest m;
  m.dimension_ = dimension;
  m.camera_count_ = camera_count;

  std::map<TrackletId, Tracklet> by_id;
  std::map<TrackletId, std::size_t> first_line;
  std::set<CameraId> cameras;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageRecord& rec = images[i];
    const std::size_t line = line_of(i);
    if (rec.feature.size() != dimension) {
      throw ManifestError(At(line) + "dimension mismatch: feature has " +
                              std::to_string(rec.feature.size()) + " values, header declares " +
                              std::to_string(dimension),
                          line);
    }
    for (double x : rec.feature) {
      if (!std::isfinite(x)) throw ManifestError(At(line) + "non-finite feature value", line);
    }
    if (!m.image_lookup_.emplace(rec.image_id, i).second) {
      throw ManifestError(At(line) + "duplicate image_id " + std::to_string(rec.image_id), line);
    }
    auto [it, inserted] = by_id.try_emplace(rec.tracklet_id);
    Tracklet& t = it->second;
    if (inserted) {
      t.tracklet_id = rec.tracklet_id;
      t.camera_id = rec.camera_id;
      first_line[rec.tracklet_id] = line;
    } else if (t.camera_id != rec.camera_id) {
      throw ManifestError(At(line) + "tracklet " + std::to_string(rec.tracklet_id) +
                              " spans cameras " + std::to_string(t.camera_id) + " and " +
                              std::to_string(rec.camera_id),
                          line);
    }
    t.image_ids.push_back(rec.image_id);
    t.image_rows.push_back(i);
    cameras.insert(rec.camera_id);
  }
  if (cameras.size() > camera_count) {
    throw ManifestError("manifest uses " + std::to_string(cameras.size()) +
                            " distinct cameras but header declares camera_count " +
                            std::to_string(camera_count),
                        1);
  }
  for (auto& [id, t] : by_id) {
    if (t.image_ids.empty()) {
      throw ManifestError(At(first_line[id]) + "empty tracklet " + std::to_string(id),
                          first_line[id]);
    }
    m.tracklet_lookup_.emplace(id, static_cast<TrackletIndex>(m.tracklets_.size()));
    m.tracklets_.push_back(std::move(t));
  }
  m.images_ = std::move(images);
  return m;
}

std::optional<TrackletIndex> DatasetManifest::FindTracklet(TrackletId id) const {
  auto it = tracklet_lookup_.find(id);
  if (it == tracklet_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> DatasetManifest::FindImage(ImageId id) const {
  auto it = image_lookup_.find(id);
  if (it == image_lookup_.end()) return std::nullopt;
  return it->second;
}

bool DatasetManifest::has_identities() const {
  return std::all_of(images_.begin(), images_.end(),
                     [](const ImageRecord& r) { return r.identity.has_value(); });
}

DatasetManifest DatasetManifest::WithoutIdentities() const {
  DatasetManifest copy = *this;
  for (ImageRecord& r : copy.images_) r.identity.reset();
  return copy;
}

std::size_t GroundTruth::TruePositivePairCount() const {
  std::map<IdentityId, std::size_t> counts;
  for (IdentityId id : identity) ++counts[id];
  std::size_t total = 0;
  for (const auto& [id, n] : counts) total += n * (n - 1) / 2;
  return total;
}

GroundTruth ExtractGroundTruth(const DatasetManifest& manifest) {
  GroundTruth truth;
  truth.identity.reserve(manifest.tracklet_count());
  for (const Tracklet& t : manifest.tracklets()) {
    std::optional<IdentityId> id;
    for (std::size_t row : t.image_rows) {
      const auto& rec = manifest.images()[row];
      if (!rec.identity) {
        throw ManifestError("image " + std::to_string(rec.image_id) + " has no identity", 0);
      }
      if (id && *id != *rec.identity) {
        throw ManifestError("tracklet " + std::to_string(t.tracklet_id) + " mixes identities",
                            0);
      }
      id = rec.identity;
    }
    truth.identity.push_back(*id);
  }
  return truth;
}

DatasetManifest ParseManifest(std::istream& in, const LoadOptions& options) {
  std::string text;
  std::size_t line = 0;
  std::optional<std::size_t> dimension;
  std::size_t camera_count = 0;
  std::vector<ImageRecord> images;
  std::vector<std::size_t> lines;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ManifestError(At(line) + "malformed record: " + e.what(), line);
    }
    if (!obj.is_object()) throw ManifestError(At(line) + "record is not an object", line);
    if (!dimension) {
      const auto d = RequireInt(obj, "dimension", line);
      const auto k = RequireInt(obj, "camera_count", line);
      if (d <= 0) throw ManifestError(At(line) + "dimension must be positive", line);
      if (k <= 0) throw ManifestError(At(line) + "camera_count must be at least 1", line);
      dimension = static_cast<std::size_t>(d);
      camera_count = static_cast<std::size_t>(k);
      continue;
    }
    ImageRecord rec;
    rec.image_id = RequireInt(obj, "image_id", line);
    rec.tracklet_id = RequireInt(obj, "tracklet_id", line);
    rec.camera_id = RequireInt(obj, "camera_id", line);
    auto feat = obj.find("feature");
    if (feat == obj.end() || !feat->is_array()) {
      throw ManifestError(At(line) + "missing or malformed 'feature' array", line);
    }
    rec.feature.reserve(feat->size());
    for (const auto& v : *feat) {
      if (!v.is_number()) throw ManifestError(At(line) + "non-numeric feature value", line);
      rec.feature.push_back(v.get<double>());
    }
    if (rec.feature.size() != *dimension) {
      throw ManifestError(At(line) + "dimension mismatch: feature has " +
                              std::to_string(rec.feature.size()) +
                              " values, header declares " + std::to_string(*dimension),
                          line);
    }
    if (auto p = obj.find("image_path"); p != obj.end() && !p->is_null()) {
      if (!p->is_string()) throw ManifestError(At(line) + "image_path must be a string", line);
      rec.image_path = p->get<std::string>();
    }
    if (auto p = obj.find("identity"); p != obj.end() && !p->is_null()) {
      rec.identity = RequireInt(obj, "identity", line);
    }
    if (options.l2_normalize) L2Normalize(rec.feature);
    images.push_back(std::move(rec));
    lines.push_back(line);
  }
  if (!dimension) throw ManifestError("missing header line", 1);
  return DatasetManifest::Build(*dimension, camera_count, std::move(images), lines);
}

DatasetManifest LoadManifest(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string(), 0);
  return ParseManifest(in, options);
}

void WriteManifest(const DatasetManifest& manifest, std::ostream& out) {
  out << json{{"dimension", manifest.dimension()}, {"camera_count", manifest.camera_count()}}.dump()
      << '\n';
  for (const ImageRecord& rec : manifest.images()) {
    json obj = {{"image_id", rec.image_id},
                {"tracklet_id", rec.tracklet_id},
                {"camera_id", rec.camera_id},
                {"feature", rec.feature}};
    if (rec.image_path) obj["image_path"] = *rec.image_path;
    if (rec.identity) obj["identity"] = *rec.identity;
    out << obj.dump() << '\n';
  }
}

void WriteManifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  WriteManifest(manifest, out);
}

DatasetManifest GenerateSynthetic(const SyntheticOptions& o) {
  if (o.identities == 0 || o.cameras == 0 || o.dimension == 0) {
    throw std::invalid_argument("synthetic dataset counts must be positive");
  }
  if (o.tracklets_per_identity_per_camera.min == 0 || o.images_per_tracklet.min == 0 ||
      o.tracklets_per_identity_per_camera.min > o.tracklets_per_identity_per_camera.max ||
      o.images_per_tracklet.min > o.images_per_tracklet.max) {
    throw std::invalid_argument("synthetic count ranges must be positive and ordered");
  }
  if (o.within_id_std < 0 || o.cross_camera_shift_std < 0 || o.camera_bias_std < 0) {
    throw std::invalid_argument("synthetic standard deviations must be non-negative");
  }

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto draw_count = [&](const CountRange& r) {
    if (r.min == r.max) return r.min;
    return r.min + static_cast<std::size_t>(rng() % (r.max - r.min + 1));
  };

  // Drawn from a separate stream so that camera_bias_std = 0 leaves every
  // other draw unchanged.
  std::vector<std::vector<double>> bias(o.cameras, std::vector<double>(o.dimension, 0.0));
  if (o.camera_bias_std > 0) {
    std::mt19937_64 bias_rng(o.seed ^ 0x63616d657261ULL);
    for (auto& b : bias) {
      for (double& x : b) x = o.camera_bias_std * unit(bias_rng);
    }
  }

  std::vector<ImageRecord> images;
  TrackletId next_tracklet = 0;
  ImageId next_image = 0;
  std::vector<double> base(o.dimension), offset(o.dimension);
  for (std::size_t id = 0; id < o.identities; ++id) {
    for (double& x : base) x = unit(rng);
    for (std::size_t cam = 0; cam < o.cameras; ++cam) {
      for (double& x : offset) x = o.cross_camera_shift_std * unit(rng);
      const std::size_t tracklets = draw_count(o.tracklets_per_identity_per_camera);
      for (std::size_t t = 0; t < tracklets; ++t) {
        const TrackletId tid = next_tracklet++;
        const std::size_t count = draw_count(o.images_per_tracklet);
        for (std::size_t i = 0; i < count; ++i) {
          ImageRecord rec;
          rec.image_id = next_image++;
          rec.tracklet_id = tid;
          rec.camera_id = static_cast<CameraId>(cam);
          rec.identity = static_cast<IdentityId>(id);
          rec.feature.resize(o.dimension);
          for (std::size_t d = 0; d < o.dimension; ++d) {
            rec.feature[d] = base[d] + offset[d] + bias[cam][d] + o.within_id_std * unit(rng);
          }
          images.push_back(std::move(rec));
        }
      }
    }
  }
  return DatasetManifest::Build(o.dimension, o.cameras, std::move(images));
}

}  // namespace areid
