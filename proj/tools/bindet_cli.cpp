// Command line front end. Exit codes: 0 success, 1 fatal config or dataset
// error, 2 backend unavailable.

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "bindet/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitBackendUnavailable = 2;

struct CommonOptions {
  std::string config;
  std::string dataset_root;
  std::string out;
  std::string backend_set;
  bool verbose = false;
};

bindet::PipelineConfig resolve_config(const CommonOptions& o) {
  auto cfg = bindet::load_config(o.config);
  if (!o.dataset_root.empty()) {
    cfg.dataset_root = o.dataset_root;
  }
  if (!o.out.empty()) {
    cfg.output_dir = o.out;
  }
  if (o.backend_set == "mock") {
    cfg.backend_set = bindet::Implementation::kMock;
  } else if (o.backend_set == "remote") {
    cfg.backend_set = bindet::Implementation::kRemote;
  }
  bindet::apply_endpoint_env(cfg);
  bindet::finalize(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection pipeline for unseen industrial parts"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions common;
  app.add_option("--config", common.config, "JSON pipeline config")->required()->check(CLI::ExistingFile);
  app.add_option("--dataset-root", common.dataset_root, "Overrides dataset.root");
  app.add_option("--out", common.out, "Overrides output_dir");
  app.add_option("--backend-set", common.backend_set, "Overrides backends.set")
      ->check(CLI::IsMember({"mock", "remote"}));
  app.add_flag("-v,--verbose", common.verbose, "Debug logging");

  auto* detect = app.add_subcommand("detect", "Run the pipeline and write detections");

  auto* evaluate = app.add_subcommand("evaluate", "AP of a detection file against ground truth");
  std::string eval_dets;
  evaluate->add_option("--detections", eval_dets, "Defaults to <out>/detections.json");

  app.add_subcommand("benchmark", "Per-stage runtime report");

  auto* visualize = app.add_subcommand("visualize", "Overlay images of GT, detections and ROI");
  std::string vis_dets;
  std::string vis_dir;
  visualize->add_option("--detections", vis_dets, "Defaults to <out>/detections.json");
  visualize->add_option("--vis-dir", vis_dir, "Defaults to <out>/overlays");

  auto* build = app.add_subcommand("build-templates", "Render and cache the template banks");
  bool rebuild = false;
  build->add_flag("--rebuild", rebuild, "Ignore cached banks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitFatal;
  }
  spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const auto cfg = resolve_config(common);
    auto detections_or_default = [&](const std::string& given) {
      return given.empty() ? cfg.output_dir / "detections.json" : fs::path(given);
    };

    if (detect->parsed()) {
      const auto summary = bindet::run_detect(cfg, bindet::make_backends(cfg));
      std::cout << summary.detections_path.string() << '\n';
    } else if (evaluate->parsed()) {
      const auto report = bindet::run_evaluate(cfg, detections_or_default(eval_dets));
      std::cout << bindet::report_to_table(report);
    } else if (app.got_subcommand("benchmark")) {
      const auto report = bindet::run_benchmark(cfg, bindet::make_backends(cfg));
      std::cout << bindet::benchmark_to_table(report);
    } else if (visualize->parsed()) {
      const fs::path dir = vis_dir.empty() ? cfg.output_dir / "overlays" : fs::path(vis_dir);
      const auto written = bindet::run_visualize(cfg, detections_or_default(vis_dets), dir);
      std::cout << written.size() << " overlays in " << dir.string() << '\n';
    } else if (build->parsed()) {
      const auto banks = bindet::load_or_build_banks(cfg, bindet::make_backends(cfg), rebuild);
      std::cout << banks.size() << " template banks in " << cfg.cache_dir.string() << '\n';
    }
  } catch (const bindet::Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == bindet::ErrorCode::kBackendUnavailable ? kExitBackendUnavailable : kExitFatal;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFatal;
  }
  return kExitOk;
}
