#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "areid/dataset.hpp"
#include "areid/label_state.hpp"

namespace areid {

enum class DecisionSource : std::uint8_t { kManual, kAuto };

// One decided pair. Pairs are stored by external tracklet id, smaller first.
struct LedgerRecord {
  std::uint64_t seq = 0;
  int iteration = 0;
  TrackletId a = 0;
  TrackletId b = 0;
  Verdict verdict = Verdict::kMatch;
  DecisionSource source = DecisionSource::kManual;
  std::string timestamp;

  // Equality ignores the timestamp.
  bool operator==(const LedgerRecord& o) const {
    return seq == o.seq && iteration == o.iteration && a == o.a && b == o.b &&
           verdict == o.verdict && source == o.source;
  }
};

std::string FormatLedgerRecord(const LedgerRecord& record);
LedgerRecord ParseLedgerRecord(const std::string& line);

std::string UtcTimestamp();

// Append-only annotation ledger, optionally mirrored to a line-delimited
// file as records arrive.
class AnnotationLedger {
 public:
  AnnotationLedger() = default;

  // Starts mirroring to `path`. Existing file content is truncated to the
  // records currently held, so a resumed run continues a consistent file.
  void AttachFile(const std::filesystem::path& path);

  // Appends the manual decision followed by its auto-derived pairs.
  void Record(const DatasetManifest& manifest, int iteration, const Decision& manual,
              const std::vector<Decision>& auto_derived);

  void Flush();

  const std::vector<LedgerRecord>& records() const { return records_; }
  std::size_t manual_count() const { return manual_; }
  std::size_t auto_count() const { return records_.size() - manual_; }

  // Keeps only records with iteration <= `iteration`.
  void TruncateAfter(int iteration);

  static AnnotationLedger Load(const std::filesystem::path& path);
  static AnnotationLedger Parse(std::istream& in);

 private:
  void Append(LedgerRecord record);

  std::vector<LedgerRecord> records_;
  std::size_t manual_ = 0;
  std::ofstream file_;
};

}  // namespace areid
