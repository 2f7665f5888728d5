#include "bindet/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "bindet/image_io.hpp"

namespace bindet {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedInput, path.string() + ": " + e.what());
  }
}

std::string frame_stem(int image_id) { return fmt::format("{:06d}", image_id); }

std::optional<fs::path> find_with_stem(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".tif", ".tiff"}) {
    auto p = dir / (stem + ext);
    if (fs::exists(p)) {
      return p;
    }
  }
  return std::nullopt;
}

// (line, column) of a byte offset, 1-based.
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::map<int, CameraEntry> load_scene_camera(const fs::path& path) {
  const json doc = parse_json_file(path);
  if (!doc.is_object()) {
    throw Error(ErrorCode::kMalformedInput, path.string() + ": top level must be an object");
  }
  std::map<int, CameraEntry> out;
  for (const auto& [key, entry] : doc.items()) {
    int image_id = 0;
    try {
      image_id = std::stoi(key);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedInput, path.string() + ": non-integer image id '" + key + "'");
    }
    if (!entry.contains("cam_K") || !entry["cam_K"].is_array() || entry["cam_K"].size() != 9) {
      throw Error(ErrorCode::kMalformedInput,
                  fmt::format("{}: image {} has no 9-element cam_K", path.string(), image_id));
    }
    const auto& k = entry["cam_K"];
    CameraEntry cam;
    try {
      cam.intrinsics = {k[0].get<double>(), k[4].get<double>(), k[2].get<double>(),
                        k[5].get<double>()};
      cam.depth_scale = entry.value("depth_scale", 1.0);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedInput,
                  fmt::format("{}: image {}: {}", path.string(), image_id, e.what()));
    }
    try {
      validate(cam.intrinsics);
    } catch (const Error& e) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("{}: image {}: {}", path.string(), image_id, e.detail()));
    }
    out.emplace(image_id, cam);
  }
  return out;
}

fs::path scene_dir(const fs::path& dataset_root, int scene_id) {
  return dataset_root / fmt::format("{:06d}", scene_id);
}

SceneFrame load_frame(const fs::path& dataset_root, int scene_id, int image_id) {
  const auto cams = load_scene_camera(scene_dir(dataset_root, scene_id) / "scene_camera.json");
  const auto it = cams.find(image_id);
  if (it == cams.end()) {
    throw Error(ErrorCode::kNotFound,
                fmt::format("scene {} has no camera entry for image {}", scene_id, image_id));
  }
  return load_frame(dataset_root, scene_id, image_id, it->second);
}

SceneFrame load_frame(const fs::path& dataset_root, int scene_id, int image_id,
                      const CameraEntry& camera) {
  const fs::path dir = scene_dir(dataset_root, scene_id);
  const std::string stem = frame_stem(image_id);

  std::optional<fs::path> color = find_with_stem(dir / "rgb", stem);
  if (!color) {
    color = find_with_stem(dir / "gray", stem);
  }
  if (!color) {
    throw Error(ErrorCode::kNotFound,
                fmt::format("no rgb/ or gray/ image for scene {} image {}", scene_id, image_id));
  }

  SceneFrame frame;
  frame.scene_id = scene_id;
  frame.image_id = image_id;
  frame.intrinsics = camera.intrinsics;
  frame.rgb = read_rgb(*color);

  if (const auto depth_path = find_with_stem(dir / "depth", stem)) {
    const Depth16 raw = read_depth16(*depth_path);
    if (raw.width() != frame.rgb.width() || raw.height() != frame.rgb.height()) {
      throw Error(ErrorCode::kValidation,
                  fmt::format("depth {}x{} does not match image {}x{} (scene {} image {})",
                              raw.width(), raw.height(), frame.rgb.width(), frame.rgb.height(),
                              scene_id, image_id));
    }
    DepthMap depth(raw.width(), raw.height());
    const auto src = raw.data();
    auto dst = depth.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(static_cast<double>(src[i]) * camera.depth_scale);
    }
    frame.depth = std::move(depth);
  }
  return frame;
}

std::vector<std::pair<int, int>> list_frames(const fs::path& dataset_root) {
  if (!fs::is_directory(dataset_root)) {
    throw Error(ErrorCode::kNotFound, "dataset root is not a directory: " + dataset_root.string());
  }
  std::vector<std::pair<int, int>> out;
  for (const auto& entry : fs::directory_iterator(dataset_root)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "scene_camera.json")) {
      continue;
    }
    int scene_id = 0;
    try {
      scene_id = std::stoi(entry.path().filename().string());
    } catch (const std::exception&) {
      continue;
    }
    for (const auto& [image_id, cam] : load_scene_camera(entry.path() / "scene_camera.json")) {
      out.emplace_back(scene_id, image_id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<int, std::vector<GroundTruthInstance>> load_scene_gt(const fs::path& dataset_root,
                                                             int scene_id) {
  const fs::path dir = scene_dir(dataset_root, scene_id);
  const json gt = parse_json_file(dir / "scene_gt.json");
  json info = json::object();
  if (fs::exists(dir / "scene_gt_info.json")) {
    info = parse_json_file(dir / "scene_gt_info.json");
  }

  std::map<int, std::vector<GroundTruthInstance>> out;
  for (const auto& [key, instances] : gt.items()) {
    const int image_id = std::stoi(key);
    auto& list = out[image_id];
    for (std::size_t i = 0; i < instances.size(); ++i) {
      GroundTruthInstance inst;
      try {
        inst.object_id = instances[i].at("obj_id").get<int>();
        if (info.contains(key) && i < info[key].size()) {
          inst.visibility_fraction = info[key][i].value("visib_fract", 1.0);
        }
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kMalformedInput,
                    fmt::format("scene {} image {} instance {}: {}", scene_id, image_id, i, e.what()));
      }
      const fs::path mask_path =
          dir / "mask_visib" / fmt::format("{:06d}_{:06d}.png", image_id, i);
      const auto decoded = read_image(mask_path);
      const auto* gray = std::get_if<GrayImage>(&decoded);
      if (gray == nullptr) {
        throw Error(ErrorCode::kMalformedInput, "mask must be single channel: " + mask_path.string());
      }
      std::vector<std::uint8_t> bits(gray->data().begin(), gray->data().end());
      inst.mask = BinaryMask(gray->width(), gray->height(), std::move(bits));
      if (inst.mask.empty()) {
        continue;
      }
      inst.bbox = mask_to_bbox(inst.mask);
      inst.visibility_fraction = std::clamp(inst.visibility_fraction, 0.0, 1.0);
      list.push_back(std::move(inst));
    }
  }
  return out;
}

std::string detections_to_json(const std::vector<DetectionRecord>& records) {
  if (records.empty()) {
    return "[]";
  }
  std::string out = "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const json obj = {
        {"scene_id", r.scene_id},
        {"image_id", r.image_id},
        {"category_id", r.object_id},
        {"score", r.score},
        {"bbox", {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h}},
        {"segmentation", {{"counts", r.mask_rle.counts}, {"size", {r.mask_rle.height, r.mask_rle.width}}}},
        {"time", r.time_s},
    };
    out += obj.dump();
    out += i + 1 < records.size() ? ",\n" : "\n";
  }
  out += "]";
  return out;
}

std::vector<DetectionRecord> detections_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::kMalformedInput,
                fmt::format("detections JSON: line {} column {}: {}", line, col, e.what()));
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::kMalformedInput, "detections JSON: top level must be an array");
  }
  std::vector<DetectionRecord> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    try {
      DetectionRecord r;
      r.scene_id = obj.at("scene_id").get<int>();
      r.image_id = obj.at("image_id").get<int>();
      r.object_id = obj.at("category_id").get<int>();
      r.score = obj.at("score").get<double>();
      const auto& b = obj.at("bbox");
      if (b.size() != 4) {
        throw Error(ErrorCode::kMalformedInput, "bbox must have 4 entries");
      }
      r.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      const auto& seg = obj.at("segmentation");
      if (seg.at("counts").is_string()) {
        throw Error(ErrorCode::kMalformedInput, "compressed RLE counts are not supported");
      }
      r.mask_rle.counts = seg.at("counts").get<std::vector<std::uint32_t>>();
      const auto& size = seg.at("size");
      r.mask_rle.height = size.at(0).get<int>();
      r.mask_rle.width = size.at(1).get<int>();
      r.time_s = obj.value("time", 0.0);
      if (!(r.score >= 0.0 && r.score <= 1.0) || !(r.time_s >= 0.0)) {
        throw Error(ErrorCode::kValidation, "score must be in [0,1] and time >= 0");
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedInput,
                  fmt::format("detections JSON: record {} (line {}): {}", i, i + 2, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("detections JSON: record {} (line {}): {}", i, i + 2,
                                        e.detail()));
    }
  }
  return out;
}

void write_detections(const std::vector<DetectionRecord>& records, const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  }
  out << detections_to_json(records);
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed: " + path.string());
  }
}

std::vector<DetectionRecord> read_detections(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return detections_from_json(ss.str());
}

}  // namespace bindet
