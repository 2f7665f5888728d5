#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "bindet/image.hpp"

namespace bindet {

class Enhancer;

struct PreprocessConfig {
  double intensity_threshold = 50.0;  // 8-bit scale
  double depth_near_mm = 1500.0;
  double depth_far_mm = 2000.0;
  bool enhancement_enabled = true;
};

/// Throws kConfig on out-of-range threshold or near >= far.
void validate(const PreprocessConfig& cfg);

/// 256-entry RGB colormap.
using ColorLut = std::array<Rgb, 256>;

/// The standard plasma colormap, baked in from assets/plasma.lut.
const ColorLut& plasma_lut();
/// Parses 256 lines of "R G B" integers in [0,255].
ColorLut load_lut(const std::filesystem::path& path);

/// Mean of the unweighted per-pixel luma (R+G+B)/3. Throws on an empty image.
double mean_intensity(const RgbImage& image);

/// Strictly below: a mean equal to the threshold leaves the image alone.
bool brightness_gate(double mean, const PreprocessConfig& cfg);
bool brightness_gate(const RgbImage& image, const PreprocessConfig& cfg);

struct EnhanceResult {
  RgbImage image;
  bool gate_fired = false;
  double mean_intensity = 0.0;
};

/// Runs the enhancer only when the gate fires (and enhancement is enabled).
/// The enhancer must preserve dimensions; a size change is a contract
/// violation attributed to the enhancer stage.
EnhanceResult enhance_if_dark(const RgbImage& image, const PreprocessConfig& cfg,
                              const Enhancer* enhancer);

/// Black outside [near, far] and where depth is 0; otherwise
/// lut[round(255 * (d - near) / (far - near))].
RgbImage depth_to_pseudocolor(const DepthMap& depth, const PreprocessConfig& cfg,
                              const ColorLut& lut = plasma_lut());

}  // namespace bindet
