#include "areid/service.hpp"

#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace areid {

using nlohmann::json;

struct AnnotationService::Impl {
  const DatasetManifest& manifest;
  AnnotationQueue& queue;
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;
  mutable std::mutex mu;
  std::shared_ptr<const RunSnapshot> snapshot;

  Impl(const DatasetManifest& m, AnnotationQueue& q, ServiceOptions o)
      : manifest(m), queue(q), options(std::move(o)) {}

  std::shared_ptr<const RunSnapshot> Current() const {
    std::lock_guard lock(mu);
    return snapshot;
  }

  std::uint64_t Generation() const {
    auto s = Current();
    return s ? s->generation : 0;
  }

  void Reply(httplib::Response& res, int status, json body) const {
    body["generation"] = Generation();
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void Error(httplib::Response& res, int status, const std::string& message) const {
    Reply(res, status, json{{"error", message}});
  }

  json TrackletCard(TrackletIndex t) const {
    const Tracklet& tr = manifest.tracklets()[t];
    json paths = json::array();
    for (std::size_t row : tr.image_rows) {
      const auto& p = manifest.images()[row].image_path;
      paths.push_back(p ? json(*p) : json(nullptr));
    }
    return {{"tracklet_id", tr.tracklet_id},
            {"camera_id", tr.camera_id},
            {"image_ids", tr.image_ids},
            {"image_paths", paths}};
  }

  void Install() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (!options.token) return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("X-Areid-Token") == *options.token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      Error(res, 401, "missing or wrong token");
      return httplib::Server::HandlerResponse::Handled;
    });

    server.Get("/queue/next", [this](const httplib::Request&, httplib::Response& res) {
      auto q = queue.Next();
      if (!q) {
        Reply(res, 200, json{{"pair", nullptr}, {"outstanding", queue.outstanding()}});
        return;
      }
      const PairKey& p = q->candidate.pair;
      Reply(res, 200,
            json{{"pair",
                  {{"pair_id", q->pair_id},
                   {"batch_generation", q->generation},
                   {"distance", q->candidate.distance},
                   {"view", p.view() == ViewClass::kSameView ? "same" : "cross"},
                   {"tracklets", {TrackletCard(p.a()), TrackletCard(p.b())}}}},
                 {"outstanding", queue.outstanding()}});
    });

    server.Post(R"(/queue/(\d+)/verdict)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  std::uint64_t id = 0;
                  HumanVerdict verdict;
                  try {
                    id = std::stoull(req.matches[1].str());
                    const json body = json::parse(req.body);
                    verdict = ParseHumanVerdict(body.at("verdict").get<std::string>());
                  } catch (const std::exception& e) {
                    Error(res, 400, std::string("bad verdict request: ") + e.what());
                    return;
                  }
                  switch (queue.Submit(id, verdict)) {
                    case AnnotationQueue::SubmitStatus::kAccepted:
                      Reply(res, 200, json{{"status", "accepted"}, {"pair_id", id}});
                      break;
                    case AnnotationQueue::SubmitStatus::kAlreadyAnswered:
                      Error(res, 409, "pair already answered");
                      break;
                    case AnnotationQueue::SubmitStatus::kUnknownPair:
                      Error(res, 404, "unknown pair id");
                      break;
                  }
                });

    server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
      auto s = Current();
      json history = json::array();
      json budget = nullptr;
      json body;
      if (s) {
        for (const auto& m : s->history) history.push_back(json::parse(FormatMetricsLine(m)));
        budget = {{"tp_manual", s->labels.manual_count()},
                  {"auto_count", s->labels.auto_count()},
                  {"T_pa", s->t_pa ? json(*s->t_pa) : json(nullptr)},
                  {"AR", s->t_pa && *s->t_pa > 0.0
                             ? json(static_cast<double>(s->labels.manual_count()) / *s->t_pa)
                             : json(nullptr)},
                  {"gained_TP_ratio", s->history.empty() || !s->history.back().gained_tp_ratio
                                          ? json(nullptr)
                                          : json(*s->history.back().gained_tp_ratio)}};
        body["iteration"] = s->iteration;
        body["stopped"] = StopReasonName(s->stopped);
      } else {
        body["iteration"] = 0;
        body["stopped"] = StopReasonName(StopReason::kNone);
      }
      body["budget"] = budget;
      body["history"] = history;
      body["queue"] = {{"outstanding", queue.outstanding()}, {"skipped", queue.skipped()}};
      Reply(res, 200, body);
    });

    server.Get("/clusters", [this](const httplib::Request&, httplib::Response& res) {
      auto s = Current();
      if (!s) {
        Error(res, 503, "no run state published yet");
        return;
      }
      json clusters = json::array();
      const auto ids = s->labels.cluster_ids();
      const auto members = s->labels.clusters();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        json tracklets = json::array();
        for (TrackletIndex t : members[i]) tracklets.push_back(manifest.tracklets()[t].tracklet_id);
        clusters.push_back(
            {{"cluster_id", ids[i]}, {"size", members[i].size()}, {"tracklets", tracklets}});
      }
      Reply(res, 200, json{{"cluster_count", ids.size()}, {"clusters", clusters}});
    });

    server.Get(R"(/pairs/(-?\d+)/(-?\d+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto s = Current();
                 if (!s) {
                   Error(res, 503, "no run state published yet");
                   return;
                 }
                 std::optional<TrackletIndex> a, b;
                 try {
                   a = manifest.FindTracklet(std::stoll(req.matches[1].str()));
                   b = manifest.FindTracklet(std::stoll(req.matches[2].str()));
                 } catch (const std::exception&) {
                 }
                 if (!a || !b) {
                   Error(res, 404, "unknown tracklet id");
                   return;
                 }
                 if (*a == *b) {
                   Error(res, 400, "a pair needs two distinct tracklets");
                   return;
                 }
                 const auto& graph = s->labels.graph();
                 const char* status = graph.IsMustLink(*a, *b)     ? "must_link"
                                      : graph.IsCannotLink(*a, *b) ? "cannot_link"
                                                                   : "undecided";
                 const PairKey key = MakePair(manifest, *a, *b);
                 json body = {
                     {"a", manifest.tracklets()[key.a()].tracklet_id},
                     {"b", manifest.tracklets()[key.b()].tracklet_id},
                     {"view", key.view() == ViewClass::kSameView ? "same" : "cross"},
                     {"status", status},
                     {"same_cluster", s->labels.cluster_of(*a) == s->labels.cluster_of(*b)},
                     {"distance", s->distances ? json(s->distances->at(*a, *b)) : json(nullptr)}};
                 Reply(res, 200, body);
               });
  }
};

AnnotationService::AnnotationService(const DatasetManifest& manifest, AnnotationQueue& queue,
                                     ServiceOptions options)
    : impl_(std::make_unique<Impl>(manifest, queue, std::move(options))) {
  impl_->Install();
}

AnnotationService::~AnnotationService() { Stop(); }

void AnnotationService::Publish(std::shared_ptr<const RunSnapshot> snapshot) {
  std::lock_guard lock(impl_->mu);
  impl_->snapshot = std::move(snapshot);
}

int AnnotationService::Start() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw std::runtime_error("cannot bind " + impl_->options.host + ":" +
                             std::to_string(impl_->options.port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void AnnotationService::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace areid
