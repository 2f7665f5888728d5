#include "bindet/roi_filter.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace bindet {

void validate(const RoiConfig& cfg) {
  if (cfg.prompt.empty()) {
    throw Error(ErrorCode::kConfig, "roi.prompt must not be empty");
  }
  if (!(cfg.min_confidence >= 0.0 && cfg.min_confidence <= 1.0)) {
    throw Error(ErrorCode::kConfig, "roi.min_confidence must be in [0,1]");
  }
}

std::vector<ScoredBox> detect_roi(const RgbImage& image, const RoiConfig& cfg,
                                  const RoiDetector& detector) {
  std::vector<ScoredBox> raw;
  try {
    raw = detector.run(image, cfg.prompt);
  } catch (const Error& e) {
    throw Error(e.code(), "ROI detection failed: " + e.detail(), e.stage()).with_attempts(e.attempts());
  }
  std::vector<ScoredBox> out;
  for (auto sb : raw) {
    if (sb.confidence < cfg.min_confidence) {
      continue;
    }
    if (!clip_bbox(sb.box, image.width(), image.height())) {
      continue;
    }
    out.push_back(sb);
  }
  return out;
}

RoiCrop full_image_crop(int image_width, int image_height, const CameraIntrinsics& intrinsics) {
  return make_roi_crop({0.0, 0.0, static_cast<double>(image_width), static_cast<double>(image_height)},
                       intrinsics);
}

RoiCrop select_roi(std::vector<ScoredBox> candidates, const RoiConfig& cfg, int image_width,
                   int image_height, const CameraIntrinsics& intrinsics) {
  // Snap first so ranking sees the boxes that would actually be used.
  std::vector<ScoredBox> usable;
  for (auto sb : candidates) {
    const double x0 = std::clamp(std::floor(sb.box.x), 0.0, static_cast<double>(image_width));
    const double y0 = std::clamp(std::floor(sb.box.y), 0.0, static_cast<double>(image_height));
    const double x1 = std::clamp(std::ceil(sb.box.right()), 0.0, static_cast<double>(image_width));
    const double y1 = std::clamp(std::ceil(sb.box.bottom()), 0.0, static_cast<double>(image_height));
    sb.box = {x0, y0, x1 - x0, y1 - y0};
    if (is_valid(sb.box)) {
      usable.push_back(sb);
    }
  }
  if (usable.empty()) {
    if (cfg.fallback == RoiFallback::kError) {
      throw Error(ErrorCode::kNoRoi, "no ROI candidate survived filtering", "roi_filter");
    }
    return full_image_crop(image_width, image_height, intrinsics);
  }
  const auto better = [](const ScoredBox& a, const ScoredBox& b) {
    return std::make_tuple(a.confidence, a.box.area(), -a.box.x, -a.box.y, -a.box.w) >
           std::make_tuple(b.confidence, b.box.area(), -b.box.x, -b.box.y, -b.box.w);
  };
  const auto best = std::min_element(usable.begin(), usable.end(), better);
  return make_roi_crop(best->box, intrinsics);
}

SceneFrame apply_crop(const SceneFrame& frame, const RoiCrop& roi) {
  const auto x = static_cast<int>(roi.box.x);
  const auto y = static_cast<int>(roi.box.y);
  const auto w = static_cast<int>(roi.box.w);
  const auto h = static_cast<int>(roi.box.h);
  if (x != roi.box.x || y != roi.box.y || w != roi.box.w || h != roi.box.h) {
    throw Error(ErrorCode::kInvalidArgument, "ROI box must be pixel aligned", "roi_filter");
  }
  if (!satisfies_shift_invariant(roi)) {
    throw Error(ErrorCode::kInvalidArgument, "ROI intrinsics do not match its crop origin",
                "roi_filter");
  }
  SceneFrame out;
  out.scene_id = frame.scene_id;
  out.image_id = frame.image_id;
  out.rgb = frame.rgb.crop(x, y, w, h);
  if (frame.depth) {
    out.depth = frame.depth->crop(x, y, w, h);
  }
  out.intrinsics = roi.adjusted;
  return out;
}

}  // namespace bindet
