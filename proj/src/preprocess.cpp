#include "bindet/preprocess.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <bindet/plasma_lut_data.hpp>

#include "bindet/backends.hpp"

namespace bindet {

void validate(const PreprocessConfig& cfg) {
  if (!(cfg.intensity_threshold >= 0.0 && cfg.intensity_threshold <= 255.0)) {
    throw Error(ErrorCode::kConfig, "preprocess.intensity_threshold must be in [0,255]");
  }
  if (!(cfg.depth_near_mm < cfg.depth_far_mm)) {
    throw Error(ErrorCode::kConfig, "preprocess.depth_near_mm must be below depth_far_mm");
  }
}

const ColorLut& plasma_lut() {
  static const ColorLut lut = [] {
    ColorLut out{};
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& row = detail::kPlasmaTable[i];
      out[i] = {row[0], row[1], row[2]};
    }
    return out;
  }();
  return lut;
}

ColorLut load_lut(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open LUT " + path.string());
  }
  ColorLut lut{};
  std::string line;
  std::size_t n = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream row(line);
    int r = -1;
    int g = -1;
    int b = -1;
    std::string extra;
    if (!(row >> r >> g >> b) || (row >> extra) || r < 0 || g < 0 || b < 0 || r > 255 ||
        g > 255 || b > 255) {
      throw Error(ErrorCode::kMalformedInput,
                  path.string() + ":" + std::to_string(line_no) + ": expected 'R G B' in 0..255");
    }
    if (n == lut.size()) {
      throw Error(ErrorCode::kMalformedInput, path.string() + ": more than 256 entries");
    }
    lut[n++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                static_cast<std::uint8_t>(b)};
  }
  if (n != lut.size()) {
    throw Error(ErrorCode::kMalformedInput,
                path.string() + ": expected 256 entries, found " + std::to_string(n));
  }
  return lut;
}

double mean_intensity(const RgbImage& image) {
  if (image.pixel_count() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "mean_intensity of an empty image");
  }
  std::uint64_t sum = 0;
  for (const auto v : image.data()) {
    sum += v;
  }
  // mean over pixels of (r+g+b)/3 == channel sum / (3 * pixels)
  return static_cast<double>(sum) / (3.0 * static_cast<double>(image.pixel_count()));
}

bool brightness_gate(double mean, const PreprocessConfig& cfg) {
  return mean < cfg.intensity_threshold;
}

bool brightness_gate(const RgbImage& image, const PreprocessConfig& cfg) {
  return brightness_gate(mean_intensity(image), cfg);
}

EnhanceResult enhance_if_dark(const RgbImage& image, const PreprocessConfig& cfg,
                              const Enhancer* enhancer) {
  EnhanceResult result;
  result.mean_intensity = mean_intensity(image);
  result.gate_fired = cfg.enhancement_enabled && brightness_gate(result.mean_intensity, cfg);
  if (!result.gate_fired) {
    result.image = image;
    return result;
  }
  if (enhancer == nullptr) {
    throw Error(ErrorCode::kConfig, "low-light gate fired but no enhancer backend is configured",
                "enhancer");
  }
  result.image = enhancer->run(image);
  if (result.image.width() != image.width() || result.image.height() != image.height()) {
    throw Error(ErrorCode::kContractViolation,
                "enhancer changed image size from " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + " to " +
                    std::to_string(result.image.width()) + "x" +
                    std::to_string(result.image.height()),
                "enhancer");
  }
  return result;
}

RgbImage depth_to_pseudocolor(const DepthMap& depth, const PreprocessConfig& cfg,
                              const ColorLut& lut) {
  if (!(cfg.depth_near_mm < cfg.depth_far_mm)) {
    throw Error(ErrorCode::kConfig, "depth window needs near < far");
  }
  RgbImage out(depth.width(), depth.height());
  const double span = cfg.depth_far_mm - cfg.depth_near_mm;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth.at(x, y);
      if (!(d > 0.0) || d < cfg.depth_near_mm || d > cfg.depth_far_mm) {
        continue;
      }
      const double t = (d - cfg.depth_near_mm) / span;
      const auto idx = static_cast<std::size_t>(std::lround(t * 255.0));
      set_rgb(out, x, y, lut[std::min<std::size_t>(idx, 255)]);
    }
  }
  return out;
}

}  // namespace bindet
