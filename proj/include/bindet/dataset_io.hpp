#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bindet/geometry.hpp"
#include "bindet/image.hpp"

namespace bindet {

/// One observation. Depth, when present, is in millimeters and has the same
/// size as rgb.
struct SceneFrame {
  int scene_id = 0;
  int image_id = 0;
  RgbImage rgb;
  std::optional<DepthMap> depth;
  CameraIntrinsics intrinsics;
};

struct GroundTruthInstance {
  int object_id = 0;
  BinaryMask mask;  // visible mask
  BoundingBox bbox;
  double visibility_fraction = 1.0;
};

struct DetectionRecord {
  int scene_id = 0;
  int image_id = 0;
  int object_id = 0;
  double score = 0.0;
  BoundingBox bbox;
  Rle mask_rle;
  double time_s = 0.0;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct CameraEntry {
  CameraIntrinsics intrinsics;
  double depth_scale = 1.0;
};

/// Parses a BOP scene_camera.json. cam_K is 9 row-major floats.
std::map<int, CameraEntry> load_scene_camera(const std::filesystem::path& path);

/// Root is the split directory holding the zero-padded scene folders.
std::filesystem::path scene_dir(const std::filesystem::path& dataset_root, int scene_id);

SceneFrame load_frame(const std::filesystem::path& dataset_root, int scene_id, int image_id);
/// Same, with the camera table already parsed.
SceneFrame load_frame(const std::filesystem::path& dataset_root, int scene_id, int image_id,
                      const CameraEntry& camera);

/// Every (scene_id, image_id) found under the root, sorted.
std::vector<std::pair<int, int>> list_frames(const std::filesystem::path& dataset_root);

/// Visible-mask ground truth for a scene, keyed by image id. Instances with
/// an empty visible mask are fully occluded and are skipped.
std::map<int, std::vector<GroundTruthInstance>> load_scene_gt(
    const std::filesystem::path& dataset_root, int scene_id);

std::string detections_to_json(const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> detections_from_json(const std::string& text);

void write_detections(const std::vector<DetectionRecord>& records,
                      const std::filesystem::path& path);
std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

}  // namespace bindet
