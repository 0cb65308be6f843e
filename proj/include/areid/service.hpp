#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "areid/dataset.hpp"
#include "areid/oracle.hpp"
#include "areid/orchestrator.hpp"

namespace areid {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  // When set, every request must carry it in the X-Areid-Token header.
  std::optional<std::string> token;
};

// HTTP front end for human annotation. Reads only published run snapshots
// and writes only through the annotation queue.
//
//   GET  /queue/next                 lease the next pending pair
//   POST /queue/{pair_id}/verdict    {"verdict": "match" | "nomatch" | "skip"}
//   GET  /metrics                    budget report and per-iteration history
//   GET  /clusters                   current merged clustering
//   GET  /pairs/{a}/{b}              distance and decision status
//
// Every JSON response carries "generation", the label-state generation of
// the latest snapshot.
class AnnotationService {
 public:
  // `manifest` supplies tracklet metadata and image paths for the queue
  // cards; it must outlive the service.
  AnnotationService(const DatasetManifest& manifest, AnnotationQueue& queue,
                    ServiceOptions options = {});
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  void Publish(std::shared_ptr<const RunSnapshot> snapshot);

  // Binds and serves on a background thread. Returns the bound port.
  int Start();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace areid
