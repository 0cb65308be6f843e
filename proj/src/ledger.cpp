#include "areid/ledger.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <stdexcept>

#include "json.hpp"

namespace areid {

using nlohmann::json;

std::string UtcTimestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string FormatLedgerRecord(const LedgerRecord& r) {
  json obj = {{"seq", r.seq},
              {"iteration", r.iteration},
              {"pair", {r.a, r.b}},
              {"verdict", VerdictName(r.verdict)},
              {"source", r.source == DecisionSource::kManual ? "manual" : "auto"},
              {"timestamp", r.timestamp}};
  return obj.dump();
}

LedgerRecord ParseLedgerRecord(const std::string& line) {
  const json obj = json::parse(line);
  LedgerRecord r;
  r.seq = obj.at("seq").get<std::uint64_t>();
  r.iteration = obj.at("iteration").get<int>();
  const auto& pair = obj.at("pair");
  if (!pair.is_array() || pair.size() != 2) throw std::invalid_argument("pair must be [a, b]");
  r.a = pair[0].get<TrackletId>();
  r.b = pair[1].get<TrackletId>();
  r.verdict = ParseVerdict(obj.at("verdict").get<std::string>());
  const auto source = obj.at("source").get<std::string>();
  if (source == "manual") {
    r.source = DecisionSource::kManual;
  } else if (source == "auto") {
    r.source = DecisionSource::kAuto;
  } else {
    throw std::invalid_argument("unknown source '" + source + "'");
  }
  if (auto it = obj.find("timestamp"); it != obj.end() && it->is_string()) {
    r.timestamp = it->get<std::string>();
  }
  return r;
}

void AnnotationLedger::AttachFile(const std::filesystem::path& path) {
  file_ = std::ofstream(path, std::ios::trunc);
  if (!file_) throw std::runtime_error("cannot write ledger " + path.string());
  for (const auto& r : records_) file_ << FormatLedgerRecord(r) << '\n';
  file_.flush();
}

void AnnotationLedger::Append(LedgerRecord record) {
  record.seq = records_.size();
  if (record.source == DecisionSource::kManual) ++manual_;
  if (file_.is_open()) file_ << FormatLedgerRecord(record) << '\n';
  records_.push_back(std::move(record));
}

void AnnotationLedger::Record(const DatasetManifest& manifest, int iteration,
                              const Decision& manual, const std::vector<Decision>& auto_derived) {
  const std::string ts = UtcTimestamp();
  auto make = [&](const Decision& d, DecisionSource source) {
    LedgerRecord r;
    r.iteration = iteration;
    r.a = manifest.tracklets()[d.pair.a()].tracklet_id;
    r.b = manifest.tracklets()[d.pair.b()].tracklet_id;
    if (r.a > r.b) std::swap(r.a, r.b);
    r.verdict = d.verdict;
    r.source = source;
    r.timestamp = ts;
    return r;
  };
  Append(make(manual, DecisionSource::kManual));
  for (const Decision& d : auto_derived) Append(make(d, DecisionSource::kAuto));
}

void AnnotationLedger::Flush() {
  if (file_.is_open()) file_.flush();
}

void AnnotationLedger::TruncateAfter(int iteration) {
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const LedgerRecord& r) { return r.iteration > iteration; });
  records_.erase(it, records_.end());
  manual_ = static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(),
                    [](const LedgerRecord& r) { return r.source == DecisionSource::kManual; }));
}

AnnotationLedger AnnotationLedger::Parse(std::istream& in) {
  AnnotationLedger ledger;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    LedgerRecord r;
    try {
      r = ParseLedgerRecord(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("ledger line " + std::to_string(number) + ": " + e.what());
    }
    if (r.seq != ledger.records_.size()) {
      throw std::runtime_error("ledger line " + std::to_string(number) + ": sequence gap");
    }
    if (!ledger.records_.empty() && r.iteration < ledger.records_.back().iteration) {
      throw std::runtime_error("ledger line " + std::to_string(number) +
                               ": iterations out of order");
    }
    if (r.source == DecisionSource::kManual) ++ledger.manual_;
    ledger.records_.push_back(std::move(r));
  }
  return ledger;
}

AnnotationLedger AnnotationLedger::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ledger " + path.string());
  return Parse(in);
}

}  // namespace areid
