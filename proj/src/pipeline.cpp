#include "bindet/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace bindet {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out || !(out << text)) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

}  // namespace

std::string_view to_string(RoiSource source) {
  switch (source) {
    case RoiSource::kDetector: return "detector";
    case RoiSource::kFallback: return "fallback";
    case RoiSource::kDisabled: return "disabled";
  }
  return "unknown";
}

FrameResult process_frame(const SceneFrame& frame, const PipelineConfig& cfg, const BackendSet& backends,
                          const std::vector<TemplateBank>& banks) {
  FrameResult result;
  result.scene_id = frame.scene_id;
  result.image_id = frame.image_id;
  const int width = frame.rgb.width();
  const int height = frame.rgb.height();

  const auto t0 = Clock::now();
  EnhanceResult enhanced = enhance_if_dark(frame.rgb, cfg.preprocess, backends.enhancer.get());
  result.gate_fired = enhanced.gate_fired;
  result.mean_intensity = enhanced.mean_intensity;

  if (!cfg.roi.enabled) {
    result.roi = full_image_crop(width, height, frame.intrinsics);
    result.roi_source = RoiSource::kDisabled;
  } else {
    const RgbImage* roi_input = &enhanced.image;
    RgbImage pseudo;
    if (cfg.roi.modality == RoiModality::kDepthPseudocolor) {
      if (frame.depth) {
        pseudo = depth_to_pseudocolor(*frame.depth, cfg.preprocess);
        roi_input = &pseudo;
      } else {
        spdlog::warn("scene {} image {}: depth ROI modality configured but frame has no depth; using RGB",
                     frame.scene_id, frame.image_id);
      }
    }
    auto candidates = detect_roi(*roi_input, cfg.roi, *backends.roi_detector);
    result.roi_source = candidates.empty() ? RoiSource::kFallback : RoiSource::kDetector;
    result.roi = select_roi(std::move(candidates), cfg.roi, width, height, frame.intrinsics);
  }

  SceneFrame full = frame;
  full.rgb = std::move(enhanced.image);
  const SceneFrame cropped = apply_crop(full, result.roi);
  const double preprocessing_s = seconds_since(t0);

  const auto t1 = Clock::now();
  const auto proposals = propose(cropped.rgb, cfg.proposals, *backends.segmenter);
  result.detections = assign_labels(proposals, banks, cropped, result.roi, width, height, cfg.matching,
                                    *backends.feature_extractor);
  result.timing = make_stage_timing(preprocessing_s, seconds_since(t1));
  return result;
}

std::vector<DetectionRecord> to_records(const FrameResult& result, TimingMode timing) {
  std::vector<DetectionRecord> out;
  for (const auto& d : result.detections) {
    DetectionRecord r;
    r.scene_id = result.scene_id;
    r.image_id = result.image_id;
    r.object_id = d.object_id;
    r.score = d.score;
    r.bbox = d.bbox;
    r.mask_rle = rle_encode(d.mask);
    r.time_s = timing == TimingMode::kWall ? result.timing.total_s : 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

std::string frame_metadata_json(const FrameResult& result, TimingMode timing) {
  const bool wall = timing == TimingMode::kWall;
  const auto& b = result.roi.box;
  ordered_json j;
  j["scene_id"] = result.scene_id;
  j["image_id"] = result.image_id;
  j["roi_box"] = {b.x, b.y, b.w, b.h};
  j["roi_source"] = to_string(result.roi_source);
  j["gate_fired"] = result.gate_fired;
  j["mean_intensity"] = result.mean_intensity;
  j["stage_timings"] = {
      {"preprocessing_s", wall ? result.timing.preprocessing_s : 0.0},
      {"proposal_matching_s", wall ? result.timing.proposal_matching_s : 0.0},
      {"total_s", wall ? result.timing.total_s : 0.0},
  };
  j["num_detections"] = result.detections.size();
  return j.dump();
}

std::vector<int> discover_object_ids(const PipelineConfig& cfg) {
  if (!cfg.object_ids.empty()) {
    auto ids = cfg.object_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }
  if (!fs::is_directory(cfg.models_dir)) {
    throw Error(ErrorCode::kConfig, "models directory not found: " + cfg.models_dir.string(), "config");
  }
  static const std::regex kName(R"(obj_(\d+)\.ply)");
  std::vector<int> ids;
  for (const auto& entry : fs::directory_iterator(cfg.models_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, kName)) {
      ids.push_back(std::stoi(m[1].str()));
    }
  }
  if (ids.empty()) {
    throw Error(ErrorCode::kConfig, "no obj_*.ply models in " + cfg.models_dir.string(), "config");
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<TemplateBank> load_or_build_banks(const PipelineConfig& cfg, const BackendSet& backends,
                                              bool rebuild) {
  std::vector<TemplateBank> banks;
  for (const int id : discover_object_ids(cfg)) {
    const TemplateCacheKey key{id, cfg.matching.view_count,
                               backends.feature_extractor->descriptor().model_tag + "+" +
                                   backends.renderer->descriptor().model_tag + "+" + cfg.template_fingerprint};
    const fs::path path = template_cache_path(cfg.cache_dir, key);
    if (!rebuild) {
      if (auto bank = load_template_bank(path, key)) {
        spdlog::debug("object {}: templates loaded from {}", id, path.string());
        banks.push_back(std::move(*bank));
        continue;
      }
    }
    const fs::path model = cfg.models_dir / fmt::format("obj_{:06d}.ply", id);
    const auto vertices = read_ply_vertices(model);
    spdlog::info("object {}: rendering {} templates", id, cfg.matching.view_count);
    banks.push_back(
        build_template_bank(id, vertices, cfg.matching, *backends.renderer, *backends.feature_extractor));
    save_template_bank(banks.back(), key, path);
  }
  return banks;
}

DetectSummary run_detect(const PipelineConfig& cfg, const BackendSet& backends) {
  const auto frames = list_frames(cfg.dataset_root);
  std::map<int, std::map<int, CameraEntry>> cameras;
  for (const auto& [scene, _] : frames) {
    if (cameras.count(scene) == 0) {
      cameras[scene] = load_scene_camera(scene_dir(cfg.dataset_root, scene) / "scene_camera.json");
    }
  }
  const auto banks = load_or_build_banks(cfg, backends);

  DetectSummary summary;
  summary.frames_total = frames.size();
  summary.detections_path = cfg.output_dir / "detections.json";
  summary.metadata_path = cfg.output_dir / "run_metadata.jsonl";
  ensure_dir(cfg.output_dir);

  // Workers fill slots out of order; this thread drains them in frame order.
  std::vector<std::optional<FrameResult>> slots(frames.size());
  std::vector<char> done(frames.size(), 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::optional<Error> fatal;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= frames.size() || abort.load()) {
        return;
      }
      const auto [scene, image] = frames[i];
      std::optional<FrameResult> result;
      try {
        const SceneFrame frame = load_frame(cfg.dataset_root, scene, image, cameras.at(scene).at(image));
        result = process_frame(frame, cfg, backends, banks);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kBackendUnavailable) {
          std::lock_guard lock(mu);
          if (!fatal) {
            fatal = e;
          }
          abort = true;
        } else {
          spdlog::warn("scene {} image {} skipped: {}", scene, image, e.what());
        }
      } catch (const std::exception& e) {
        spdlog::warn("scene {} image {} skipped: {}", scene, image, e.what());
      }
      {
        std::lock_guard lock(mu);
        slots[i] = std::move(result);
        done[i] = 1;
      }
      cv.notify_all();
    }
  };

  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                                      std::max<std::size_t>(frames.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back(worker);
  }

  std::ofstream meta(summary.metadata_path, std::ios::trunc | std::ios::binary);
  if (!meta) {
    abort = true;
    for (auto& t : pool) {
      t.join();
    }
    throw Error(ErrorCode::kIo, "cannot write " + summary.metadata_path.string());
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::optional<FrameResult> result;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return done[i] != 0 || abort.load(); });
      if (done[i] == 0) {
        break;
      }
      result = std::move(slots[i]);
    }
    if (!result) {
      ++summary.frames_failed;
      continue;
    }
    meta << frame_metadata_json(*result, cfg.timing) << '\n';
    auto records = to_records(*result, cfg.timing);
    summary.records.insert(summary.records.end(), std::make_move_iterator(records.begin()),
                           std::make_move_iterator(records.end()));
  }
  for (auto& t : pool) {
    t.join();
  }
  if (fatal) {
    throw *fatal;
  }
  write_detections(summary.records, summary.detections_path);
  spdlog::info("detect: {} frames, {} skipped, {} detections", summary.frames_total, summary.frames_failed,
               summary.records.size());
  return summary;
}

GroundTruthSet load_ground_truth(const fs::path& dataset_root) {
  GroundTruthSet gts;
  std::map<int, std::map<int, std::vector<GroundTruthInstance>>> by_scene;
  for (const auto& [scene, image] : list_frames(dataset_root)) {
    if (by_scene.count(scene) == 0) {
      by_scene[scene] = load_scene_gt(dataset_root, scene);
    }
    auto& scene_gt = by_scene[scene];
    const auto it = scene_gt.find(image);
    gts[{scene, image}] = it == scene_gt.end() ? std::vector<GroundTruthInstance>{} : std::move(it->second);
  }
  return gts;
}

ApReport run_evaluate(const PipelineConfig& cfg, const fs::path& detections_path) {
  const auto dets = read_detections(detections_path);
  const auto report = average_precision(dets, load_ground_truth(cfg.dataset_root), cfg.eval);
  write_text(cfg.output_dir / "eval_report.json", report_to_json(report));
  write_text(cfg.output_dir / "eval_report.txt", report_to_table(report));
  return report;
}

BenchmarkReport benchmark_stages(const PipelineConfig& cfg, const BackendSet& backends,
                                 const std::vector<TemplateBank>& banks,
                                 const std::vector<SceneFrame>& frames) {
  std::vector<FrameTiming> rows;
  for (const auto& f : frames) {
    const FrameResult r = process_frame(f, cfg, backends, banks);
    rows.push_back({f.scene_id, f.image_id, r.timing});
  }
  return summarize_timings(std::move(rows));
}

BenchmarkReport run_benchmark(const PipelineConfig& cfg, const BackendSet& backends) {
  const auto banks = load_or_build_banks(cfg, backends);
  std::vector<SceneFrame> frames;
  for (const auto& [scene, image] : list_frames(cfg.dataset_root)) {
    frames.push_back(load_frame(cfg.dataset_root, scene, image));
  }
  const auto report = benchmark_stages(cfg, backends, banks, frames);
  write_text(cfg.output_dir / "benchmark.json", benchmark_to_json(report));
  write_text(cfg.output_dir / "benchmark.txt", benchmark_to_table(report));
  return report;
}

}  // namespace bindet
