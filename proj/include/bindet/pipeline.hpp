#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bindet/config.hpp"
#include "bindet/evaluation.hpp"

namespace bindet {

/// How the ROI of a frame was chosen.
enum class RoiSource { kDetector, kFallback, kDisabled };
std::string_view to_string(RoiSource source);

struct FrameResult {
  int scene_id = 0;
  int image_id = 0;
  RoiCrop roi;
  RoiSource roi_source = RoiSource::kDisabled;
  bool gate_fired = false;
  double mean_intensity = 0.0;
  StageTiming timing;
  std::vector<Detection> detections;
};

/// One frame through enhancement, ROI, crop, proposals and matching, in that
/// order. Stage timings are always measured.
FrameResult process_frame(const SceneFrame& frame, const PipelineConfig& cfg, const BackendSet& backends,
                          const std::vector<TemplateBank>& banks);

/// Detection records for a frame; `time` is the frame total, or 0 when timing is off.
std::vector<DetectionRecord> to_records(const FrameResult& result, TimingMode timing);

/// {scene_id, image_id, roi_box, gate_fired, stage_timings} plus a few extras.
std::string frame_metadata_json(const FrameResult& result, TimingMode timing);

/// cfg.object_ids, or every obj_XXXXXX.ply under models_dir.
std::vector<int> discover_object_ids(const PipelineConfig& cfg);

/// Loads each bank from the cache or builds and stores it.
std::vector<TemplateBank> load_or_build_banks(const PipelineConfig& cfg, const BackendSet& backends,
                                              bool rebuild = false);

struct DetectSummary {
  std::size_t frames_total = 0;
  std::size_t frames_failed = 0;
  std::vector<DetectionRecord> records;
  std::filesystem::path detections_path;
  std::filesystem::path metadata_path;
};

/// Writes <out>/detections.json and <out>/run_metadata.jsonl. A frame that
/// fails is logged and skipped; an unavailable backend aborts the run.
DetectSummary run_detect(const PipelineConfig& cfg, const BackendSet& backends);

/// Ground truth for every frame in the dataset.
GroundTruthSet load_ground_truth(const std::filesystem::path& dataset_root);

/// Writes <out>/eval_report.json and .txt.
ApReport run_evaluate(const PipelineConfig& cfg, const std::filesystem::path& detections_path);

/// Times process_frame per frame, sequentially.
BenchmarkReport benchmark_stages(const PipelineConfig& cfg, const BackendSet& backends,
                                 const std::vector<TemplateBank>& banks,
                                 const std::vector<SceneFrame>& frames);

/// Writes <out>/benchmark.json and .txt.
BenchmarkReport run_benchmark(const PipelineConfig& cfg, const BackendSet& backends);

/// Draws GT (fixed color), detections (color keyed by object id) and the ROI
/// box. Shapes are clipped to the image.
RgbImage render_overlay(const RgbImage& image, const std::vector<GroundTruthInstance>& gts,
                        const std::vector<DetectionRecord>& dets, const std::optional<BoundingBox>& roi);

/// Color used for an object's detections.
Rgb object_color(int object_id);

/// One PNG per frame in out_dir. ROI boxes come from run_metadata.jsonl next
/// to the detections file when present. Frames that cannot be read are skipped.
std::vector<std::filesystem::path> run_visualize(const PipelineConfig& cfg,
                                                 const std::filesystem::path& detections_path,
                                                 const std::filesystem::path& out_dir);

}  // namespace bindet
