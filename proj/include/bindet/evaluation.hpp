#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bindet/dataset_io.hpp"

namespace bindet {

enum class IouKind { kMask, kBbox };

struct EvalConfig {
  std::vector<double> iou_thresholds{0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  IouKind iou_kind = IouKind::kMask;
  /// Applied per (image, object) after sorting by score, as in COCO.
  int max_dets_per_image = 100;
};

/// Thresholds must be strictly increasing and in (0, 1].
void validate(const EvalConfig& cfg);

/// Number of recall sample points used for interpolated precision.
inline constexpr int kRecallPoints = 101;

/// Greedy matching over a [det][gt] IoU matrix whose rows are already in
/// score-descending order. Returns, per det, the matched gt index or -1.
std::vector<int> match_greedy(const std::vector<std::vector<double>>& iou, double iou_threshold);

/// Frame key (scene_id, image_id).
using FrameKey = std::pair<int, int>;
using GroundTruthSet = std::map<FrameKey, std::vector<GroundTruthInstance>>;

struct ApReport {
  std::vector<double> thresholds;
  /// object_id -> AP per threshold; only objects present in the GT.
  std::map<int, std::vector<double>> per_threshold;
  std::map<int, double> per_object;
  double mean_ap = 0.0;
  std::size_t num_detections = 0;
  std::size_t num_ground_truth = 0;
};

/// BOP/COCO detection AP. Frames absent from `gts` are not evaluated, so
/// their detections are ignored. Throws kUndefinedAp when `gts` holds no
/// instance at all.
ApReport average_precision(const std::vector<DetectionRecord>& dets, const GroundTruthSet& gts,
                           const EvalConfig& cfg);

std::string report_to_json(const ApReport& report);
std::string report_to_table(const ApReport& report);

/// Seconds per image for the two timed stages.
struct StageTiming {
  double preprocessing_s = 0.0;
  double proposal_matching_s = 0.0;
  double total_s = 0.0;
};

StageTiming make_stage_timing(double preprocessing_s, double proposal_matching_s);

struct FrameTiming {
  int scene_id = 0;
  int image_id = 0;
  StageTiming timing;
};

struct BenchmarkReport {
  std::vector<FrameTiming> rows;
  /// Arithmetic means over rows; nullopt for an empty report.
  std::optional<StageTiming> mean;
};

BenchmarkReport summarize_timings(std::vector<FrameTiming> rows);

inline constexpr const char* kBenchmarkColumns[] = {"Preprocessing", "Proposal + Matching", "Total"};

std::string benchmark_to_json(const BenchmarkReport& report);
/// Fixed-width table, runtime in seconds.
std::string benchmark_to_table(const BenchmarkReport& report);

}  // namespace bindet
