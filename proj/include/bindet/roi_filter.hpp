#pragma once

#include <string>
#include <vector>

#include "bindet/backends.hpp"
#include "bindet/dataset_io.hpp"

namespace bindet {

enum class RoiModality { kRgb, kDepthPseudocolor };
enum class RoiFallback { kFullImage, kError };

struct RoiConfig {
  bool enabled = true;
  std::string prompt = "Parts frame where multiple parts inside it";
  RoiModality modality = RoiModality::kRgb;
  double min_confidence = 0.25;
  RoiFallback fallback = RoiFallback::kFullImage;
};

void validate(const RoiConfig& cfg);

/// Runs the detector, clips boxes to the image and drops those below
/// min_confidence or left empty by clipping.
std::vector<ScoredBox> detect_roi(const RgbImage& image, const RoiConfig& cfg,
                                  const RoiDetector& detector);

/// Highest confidence wins; ties go to the larger area, then the smaller
/// (x, y). The chosen box is snapped outward to whole pixels and clipped so
/// it can index pixel arrays. An empty list falls back per cfg.fallback.
RoiCrop select_roi(std::vector<ScoredBox> candidates, const RoiConfig& cfg, int image_width,
                   int image_height, const CameraIntrinsics& intrinsics);

/// The crop covering the whole image, intrinsics unchanged.
RoiCrop full_image_crop(int image_width, int image_height, const CameraIntrinsics& intrinsics);

/// Crops rgb and depth to roi.box and swaps in the adjusted intrinsics.
SceneFrame apply_crop(const SceneFrame& frame, const RoiCrop& roi);

}  // namespace bindet
