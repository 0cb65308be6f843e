#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <thread>

#include "CLI11.hpp"
#include "areid/config.hpp"
#include "areid/dataset.hpp"
#include "areid/evaluation.hpp"
#include "areid/ledger.hpp"
#include "areid/model_hook.hpp"
#include "areid/orchestrator.hpp"
#include "areid/service.hpp"

namespace {

using namespace areid;

// --k-dist style flag for every config key except the seed, which has its
// own mandatory flag.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void Add(CLI::App* app) {
    app->add_option("--config", file, "config file (key = value lines)");
    for (const std::string& key : ConfigKeys()) {
      if (key == "seed") continue;
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app->add_option(flag, values[key], "config key " + key);
    }
  }

  RunConfig Build(std::optional<std::uint64_t> seed) const {
    RunConfig config = file.empty() ? RunConfig{} : LoadConfig(file);
    for (const auto& [key, value] : values) {
      if (!value.empty()) SetConfigValue(config, key, value);
    }
    if (seed) config.seed = *seed;
    config.Validate();
    return config;
  }
};

std::unique_ptr<ModelHook> MakeHook(const RunConfig& config, const std::string& trainer_cmd,
                                    const std::filesystem::path& out_dir) {
  if (trainer_cmd.empty()) return std::make_unique<CentroidPullHook>(config.refresh_alpha);
  return std::make_unique<ExternalTrainerHook>(trainer_cmd, out_dir / "trainer");
}

void PrintProgress(const Orchestrator& orch) {
  const auto& m = orch.state().history.back();
  std::fprintf(stderr, "iteration %d: tp_manual=%zu auto=%zu clusters=%zu", m.iteration,
               m.tp_manual, m.auto_count, m.cluster_count);
  if (m.gained_tp_ratio) std::fprintf(stderr, " gained_TP=%.4f", *m.gained_tp_ratio);
  if (m.rank1) std::fprintf(stderr, " rank1=%.4f mAP=%.4f", *m.rank1, *m.map);
  std::fprintf(stderr, "\n");
}

std::string Optional(std::optional<std::size_t> v) { return v ? std::to_string(*v) : "-"; }

AnnotationQueue* g_queue = nullptr;

void HandleSignal(int) {
  if (g_queue) g_queue->Close();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"areid: active pair annotation for tracklet re-identification"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic multi-camera manifest");
  SyntheticOptions syn;
  std::string gen_out;
  gen->add_option("--out", gen_out, "output manifest path")->required();
  gen->add_option("--identities", syn.identities);
  gen->add_option("--cameras", syn.cameras);
  gen->add_option("--tracklets-min", syn.tracklets_per_identity_per_camera.min);
  gen->add_option("--tracklets-max", syn.tracklets_per_identity_per_camera.max);
  gen->add_option("--images-min", syn.images_per_tracklet.min);
  gen->add_option("--images-max", syn.images_per_tracklet.max);
  gen->add_option("--dimension", syn.dimension);
  gen->add_option("--within-id-std", syn.within_id_std);
  gen->add_option("--cross-camera-shift-std", syn.cross_camera_shift_std);
  gen->add_option("--camera-bias-std", syn.camera_bias_std);
  gen->add_option("--seed", syn.seed);

  // run / serve / compare share manifest + config flags
  std::string manifest_path, out_dir, trainer_cmd;
  bool l2 = false, resume = false;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "active annotation loop with the simulated oracle");
  ConfigFlags run_flags;
  run->add_option("--manifest", manifest_path)->required();
  run->add_option("--seed", seed)->required();
  run->add_option("--out-dir", out_dir)->required();
  run->add_flag("--l2-normalize", l2);
  run->add_flag("--resume", resume, "continue the run recorded in --out-dir");
  run->add_option("--trainer-cmd", trainer_cmd, "external trainer command for the model hook");
  run_flags.Add(run);

  auto* serve = app.add_subcommand("serve", "active annotation loop answered over HTTP");
  ConfigFlags serve_flags;
  ServiceOptions service_options;
  std::string token;
  serve->add_option("--manifest", manifest_path)->required();
  serve->add_option("--seed", seed);
  serve->add_option("--out-dir", out_dir)->required();
  serve->add_option("--host", service_options.host);
  serve->add_option("--port", service_options.port);
  serve->add_option("--token", token, "required X-Areid-Token header value");
  serve->add_flag("--l2-normalize", l2);
  serve->add_flag("--resume", resume);
  serve->add_option("--trainer-cmd", trainer_cmd);
  serve_flags.Add(serve);

  auto* replay = app.add_subcommand("replay", "rebuild the label state from a ledger");
  std::string ledger_path, clusters_out;
  ConfigFlags replay_flags;
  replay->add_option("--manifest", manifest_path)->required();
  replay->add_option("--ledger", ledger_path)->required();
  replay->add_option("--clusters-out", clusters_out, "write tracklet_id,cluster_id CSV");
  replay_flags.Add(replay);

  auto* eval = app.add_subcommand("eval", "CMC / mAP of an embedding snapshot");
  std::string snapshot_path;
  std::size_t eval_k = 3;
  bool include_same_camera = false;
  eval->add_option("--manifest", manifest_path)->required();
  eval->add_option("--snapshot", snapshot_path, "defaults to the manifest features");
  eval->add_option("--k-dist", eval_k);
  eval->add_flag("--include-same-camera", include_same_camera);
  eval->add_flag("--l2-normalize", l2);

  auto* tpa = app.add_subcommand("estimate-tpa", "simulated cost of labelling by random pairs");
  std::size_t tpa_runs = 10;
  tpa->add_option("--manifest", manifest_path)->required();
  tpa->add_option("--runs", tpa_runs);
  tpa->add_option("--seed", seed);

  auto* compare = app.add_subcommand("compare", "run several strategies and export curves");
  ConfigFlags compare_flags;
  std::vector<std::string> strategy_names{"view_aware_resample", "view_aware_only", "mixed_view",
                                          "random"};
  compare->add_option("--manifest", manifest_path)->required();
  compare->add_option("--seed", seed)->required();
  compare->add_option("--out-dir", out_dir)->required();
  compare->add_option("--strategies", strategy_names)->delimiter(',');
  compare->add_flag("--l2-normalize", l2);
  compare_flags.Add(compare);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      WriteManifest(GenerateSynthetic(syn), gen_out);
      return 0;
    }

    const DatasetManifest manifest = LoadManifest(manifest_path, LoadOptions{l2});

    if (run->parsed()) {
      const RunConfig config = run_flags.Build(seed);
      const GroundTruth truth = ExtractGroundTruth(manifest);
      SimulatedProvider provider(truth);
      Orchestrator orch(manifest, config, MakeHook(config, trainer_cmd, out_dir), provider, truth);
      if (resume) {
        orch.Resume(out_dir);
      } else {
        orch.AttachOutput(out_dir);
      }
      while (orch.RunIteration()) PrintProgress(orch);
      orch.Run();  // writes the summary
      std::fprintf(stderr, "stopped: %s\n", StopReasonName(orch.state().stopped));
      return 0;
    }

    if (serve->parsed()) {
      const RunConfig config = serve_flags.Build(serve->count("--seed") ? std::optional(seed)
                                                                         : std::nullopt);
      if (!token.empty()) service_options.token = token;
      AnnotationQueue queue;
      g_queue = &queue;
      std::signal(SIGINT, HandleSignal);
      std::signal(SIGTERM, HandleSignal);
      AnnotationService service(manifest, queue, service_options);
      std::optional<GroundTruth> truth;
      if (manifest.has_identities()) truth = ExtractGroundTruth(manifest);
      HumanQueueProvider provider(queue);
      OrchestratorOptions options;
      options.tolerate_contradictions = true;
      options.observer = [&](std::shared_ptr<const RunSnapshot> s) { service.Publish(std::move(s)); };
      Orchestrator orch(manifest, config, MakeHook(config, trainer_cmd, out_dir), provider, truth,
                        options);
      if (resume) {
        orch.Resume(out_dir);
      } else {
        orch.AttachOutput(out_dir);
      }
      const int port = service.Start();
      std::fprintf(stderr, "serving on %s:%d\n", service_options.host.c_str(), port);
      orch.Run();
      std::fprintf(stderr, "stopped: %s\n", StopReasonName(orch.state().stopped));
      service.Stop();
      return 0;
    }

    if (replay->parsed()) {
      const RunConfig config = replay_flags.Build(std::nullopt);
      const AnnotationLedger ledger = AnnotationLedger::Load(ledger_path);
      const LabelState labels = ReplayLedger(manifest, ledger.records(), config);
      std::printf("records=%zu manual=%zu auto=%zu clusters=%zu generation=%llu\n",
                  ledger.records().size(), labels.manual_count(), labels.auto_count(),
                  labels.cluster_count(), static_cast<unsigned long long>(labels.generation()));
      if (!clusters_out.empty()) {
        std::ofstream out(clusters_out);
        out << "tracklet_id,cluster_id\n";
        for (TrackletIndex t = 0; t < manifest.tracklet_count(); ++t) {
          out << manifest.tracklets()[t].tracklet_id << ',' << labels.cluster_of(t) << '\n';
        }
      }
      return 0;
    }

    if (eval->parsed()) {
      const GroundTruth truth = ExtractGroundTruth(manifest);
      const EmbeddingSnapshot emb = snapshot_path.empty()
                                        ? EmbeddingSnapshot::FromManifest(manifest)
                                        : ReadSnapshot(snapshot_path, manifest);
      std::vector<TrackletIndex> all(manifest.tracklet_count());
      std::iota(all.begin(), all.end(), TrackletIndex{0});
      const ReidResult r =
          EvaluateReid(manifest, emb, truth, all, all, eval_k, {!include_same_camera});
      std::printf("rank1=%.6f rank5=%.6f rank10=%.6f rank20=%.6f mAP=%.6f queries=%zu skipped=%zu\n",
                  r.RankRate(1), r.RankRate(5), r.RankRate(10), r.RankRate(20), r.mean_ap,
                  r.evaluated_queries, r.skipped_queries.size());
      return 0;
    }

    if (tpa->parsed()) {
      const GroundTruth truth = ExtractGroundTruth(manifest);
      const TpaEstimate est = EstimateTpa(truth.identity, tpa_runs, seed);
      std::printf("T_pa=%.3f std=%.3f runs=%zu\n", est.mean, est.stddev, est.per_run.size());
      return 0;
    }

    if (compare->parsed()) {
      const RunConfig config = compare_flags.Build(seed);
      std::vector<Strategy> strategies;
      for (const auto& name : strategy_names) strategies.push_back(ParseStrategy(name));
      const auto outcomes = CompareStrategies(manifest, config, strategies, out_dir);
      std::printf("%-22s %10s %10s %10s %10s  %s\n", "strategy", "to_0.90", "to_0.95", "to_0.99",
                  "manual", "stopped");
      for (const auto& o : outcomes) {
        std::printf("%-22s %10s %10s %10s %10zu  %s\n", StrategyName(o.strategy),
                    Optional(o.AnnotationsToReach(0.90)).c_str(),
                    Optional(o.AnnotationsToReach(0.95)).c_str(),
                    Optional(o.AnnotationsToReach(0.99)).c_str(),
                    o.history.empty() ? std::size_t{0} : o.history.back().tp_manual,
                    StopReasonName(o.stopped));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
