#include <fstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "bindet/image_io.hpp"
#include "bindet/pipeline.hpp"

namespace bindet {
namespace fs = std::filesystem;

namespace {

constexpr Rgb kGroundTruthColor{0, 255, 0};
constexpr Rgb kRoiColor{255, 255, 255};

// Outline of [x0, x1) x [y0, y1) with the given thickness, clipped to the image.
void draw_rect(RgbImage& img, const BoundingBox& box, Rgb color, int thickness) {
  const int x0 = static_cast<int>(std::floor(box.x));
  const int y0 = static_cast<int>(std::floor(box.y));
  const int x1 = static_cast<int>(std::ceil(box.right())) - 1;
  const int y1 = static_cast<int>(std::ceil(box.bottom())) - 1;
  auto put = [&](int x, int y) {
    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) {
      set_rgb(img, x, y, color);
    }
  };
  for (int t = 0; t < thickness; ++t) {
    for (int x = std::max(x0, 0); x <= std::min(x1, img.width() - 1); ++x) {
      put(x, y0 + t);
      put(x, y1 - t);
    }
    for (int y = std::max(y0, 0); y <= std::min(y1, img.height() - 1); ++y) {
      put(x0 + t, y);
      put(x1 - t, y);
    }
  }
}

void tint_mask(RgbImage& img, const BinaryMask& mask, Rgb color) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.get(x, y)) {
        continue;
      }
      const Rgb p = rgb_at(img, x, y);
      auto mix = [](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>((static_cast<int>(a) + static_cast<int>(b) + 1) / 2);
      };
      set_rgb(img, x, y, {mix(p.r, color.r), mix(p.g, color.g), mix(p.b, color.b)});
    }
  }
}

std::map<FrameKey, BoundingBox> read_roi_boxes(const fs::path& metadata) {
  std::map<FrameKey, BoundingBox> out;
  std::ifstream in(metadata);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      const auto b = j.at("roi_box").get<std::vector<double>>();
      out[{j.at("scene_id").get<int>(), j.at("image_id").get<int>()}] = {b.at(0), b.at(1), b.at(2), b.at(3)};
    } catch (const std::exception& e) {
      spdlog::warn("{}: ignoring malformed metadata line: {}", metadata.string(), e.what());
    }
  }
  return out;
}

}  // namespace

Rgb object_color(int object_id) {
  // Spread consecutive ids across the colormap; skip its darkest end.
  const auto idx = static_cast<std::size_t>(64 + (static_cast<unsigned>(object_id) * 37U) % 192U);
  return plasma_lut()[idx];
}

RgbImage render_overlay(const RgbImage& image, const std::vector<GroundTruthInstance>& gts,
                        const std::vector<DetectionRecord>& dets, const std::optional<BoundingBox>& roi) {
  RgbImage out = image;
  for (const auto& d : dets) {
    const Rgb color = object_color(d.object_id);
    if (d.mask_rle.width == out.width() && d.mask_rle.height == out.height()) {
      tint_mask(out, rle_decode(d.mask_rle), color);
    }
    draw_rect(out, d.bbox, color, 1);
  }
  for (const auto& g : gts) {
    draw_rect(out, g.bbox, kGroundTruthColor, 1);
  }
  if (roi) {
    draw_rect(out, *roi, kRoiColor, 2);
  }
  return out;
}

std::vector<fs::path> run_visualize(const PipelineConfig& cfg, const fs::path& detections_path,
                                    const fs::path& out_dir) {
  std::map<FrameKey, std::vector<DetectionRecord>> dets;
  for (auto& d : read_detections(detections_path)) {
    dets[{d.scene_id, d.image_id}].push_back(std::move(d));
  }
  const auto rois = read_roi_boxes(detections_path.parent_path() / "run_metadata.jsonl");
  const auto gts = load_ground_truth(cfg.dataset_root);

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& [key, frame_gts] : gts) {
    SceneFrame frame;
    try {
      frame = load_frame(cfg.dataset_root, key.first, key.second);
    } catch (const Error& e) {
      spdlog::warn("scene {} image {}: not visualized: {}", key.first, key.second, e.what());
      continue;
    }
    const auto dit = dets.find(key);
    const auto rit = rois.find(key);
    const RgbImage overlay =
        render_overlay(frame.rgb, frame_gts, dit == dets.end() ? std::vector<DetectionRecord>{} : dit->second,
                       rit == rois.end() ? std::nullopt : std::optional<BoundingBox>(rit->second));
    const fs::path path = out_dir / fmt::format("{:06d}_{:06d}.png", key.first, key.second);
    write_png(path, overlay);
    written.push_back(path);
  }
  for (const auto& [key, _] : dets) {
    if (gts.count(key) == 0) {
      spdlog::warn("detections for unknown frame scene {} image {} not drawn", key.first, key.second);
    }
  }
  return written;
}

}  // namespace bindet
