#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bindet/config.hpp"

namespace bindet::testing {

// Synthetic BOP-layout dataset with two flat-colored object classes inside a
// gray bin, plus a distractor with object 1's color outside the bin. Odd
// frames are dark: every color is halved, so a x2 gain restores the palette
// exactly.

inline constexpr Rgb kBackground{0, 0, 0};
inline constexpr Rgb kObjectColor1{200, 40, 40};
inline constexpr Rgb kObjectColor2{40, 40, 200};
inline constexpr Rgb kFloorColor{120, 120, 120};

inline constexpr int kPlantedWidth = 160;
inline constexpr int kPlantedHeight = 120;
inline const BoundingBox kBinBox{20, 10, 120, 100};
inline const BoundingBox kDistractorBox{144, 50, 12, 12};

struct PlantedInstance {
  int object_id = 0;
  BoundingBox box;
};

struct PlantedFrame {
  int scene_id = 0;
  int image_id = 0;
  bool dark = false;
  std::vector<PlantedInstance> objects;  // ground truth, excludes the distractor
};

struct PlantedDataset {
  std::filesystem::path base;
  std::filesystem::path root;        // base/test
  std::filesystem::path models_dir;  // base/models
  std::vector<PlantedFrame> frames;
};

/// Writes 6 frames over two scenes (scene 1: images 0-3, scene 2: images 0-1).
PlantedDataset make_planted_dataset(const std::filesystem::path& base);

/// Mock-backed config for the dataset. ROI and enhancement switches select
/// the pipeline variant; timing is off so outputs are byte-stable.
std::string planted_config_json(const PlantedDataset& ds, const std::filesystem::path& out_dir,
                                bool roi_enabled = true, bool enhancement_enabled = true);

PipelineConfig planted_config(const PlantedDataset& ds, const std::filesystem::path& out_dir,
                              bool roi_enabled = true, bool enhancement_enabled = true);

/// Fresh directory under the system temp dir, removed by the caller.
std::filesystem::path make_temp_dir(const std::string& prefix);

}  // namespace bindet::testing
