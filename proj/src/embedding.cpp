#include "areid/embedding.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace areid {

using nlohmann::json;

EmbeddingSnapshot::EmbeddingSnapshot(std::uint64_t stamp, std::size_t dimension,
                                     std::vector<double> data)
    : stamp_(stamp), dimension_(dimension), data_(std::move(data)) {
  if (dimension_ == 0 || data_.size() % dimension_ != 0) {
    throw std::invalid_argument("snapshot data is not a whole number of rows");
  }
}

EmbeddingSnapshot EmbeddingSnapshot::FromManifest(const DatasetManifest& manifest) {
  std::vector<double> data;
  data.reserve(manifest.image_count() * manifest.dimension());
  for (const ImageRecord& rec : manifest.images()) {
    data.insert(data.end(), rec.feature.begin(), rec.feature.end());
  }
  return EmbeddingSnapshot(0, manifest.dimension(), std::move(data));
}

void WriteSnapshot(const EmbeddingSnapshot& snapshot, const DatasetManifest& manifest,
                   std::ostream& out) {
  out << json{{"stamp", snapshot.stamp()}}.dump() << '\n';
  for (std::size_t i = 0; i < manifest.image_count(); ++i) {
    auto row = snapshot.row(i);
    out << json{{"image_id", manifest.images()[i].image_id},
                {"feature", std::vector<double>(row.begin(), row.end())}}
               .dump()
        << '\n';
  }
}

void WriteSnapshot(const EmbeddingSnapshot& snapshot, const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
  WriteSnapshot(snapshot, manifest, out);
}

EmbeddingSnapshot ReadSnapshot(std::istream& in, const DatasetManifest& manifest) {
  const std::size_t dim = manifest.dimension();
  std::vector<double> data(manifest.image_count() * dim);
  std::vector<bool> seen(manifest.image_count(), false);
  std::optional<std::uint64_t> stamp;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ManifestError("snapshot line " + std::to_string(line) + ": " + e.what(), line);
    }
    if (!stamp) {
      if (!obj.contains("stamp") || !obj["stamp"].is_number_unsigned()) {
        throw ManifestError("snapshot header must be {\"stamp\": n}", line);
      }
      stamp = obj["stamp"].get<std::uint64_t>();
      continue;
    }
    if (!obj.contains("image_id") || !obj.contains("feature")) {
      throw ManifestError("snapshot line " + std::to_string(line) + ": missing image_id/feature",
                          line);
    }
    const auto row = manifest.FindImage(obj["image_id"].get<ImageId>());
    if (!row) {
      throw ManifestError("snapshot line " + std::to_string(line) + ": unknown image_id", line);
    }
    const auto& feat = obj["feature"];
    if (!feat.is_array() || feat.size() != dim) {
      throw ManifestError("snapshot line " + std::to_string(line) + ": dimension mismatch", line);
    }
    for (std::size_t d = 0; d < dim; ++d) data[*row * dim + d] = feat[d].get<double>();
    seen[*row] = true;
  }
  if (!stamp) throw ManifestError("snapshot is empty", 0);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw ManifestError(
          "snapshot does not cover image " + std::to_string(manifest.images()[i].image_id), 0);
    }
  }
  return EmbeddingSnapshot(*stamp, dim, std::move(data));
}

EmbeddingSnapshot ReadSnapshot(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  return ReadSnapshot(in, manifest);
}

}  // namespace areid
