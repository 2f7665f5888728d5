#include "bindet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "bindet/mock_backends.hpp"

namespace bindet {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr BackendKind kAllKinds[] = {BackendKind::kEnhancer, BackendKind::kRoiDetector,
                                     BackendKind::kSegmenter, BackendKind::kFeatureExtractor,
                                     BackendKind::kRenderer};

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfig, key + ": " + what, "config");
}

// Reads `obj[key]` into `out` when present, naming the key on type errors.
template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    return;
  }
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    config_error(prefix + key, e.what());
  }
}

const json& section(const json& root, const char* key) {
  static const json kEmpty = json::object();
  const auto it = root.find(key);
  if (it == root.end()) {
    return kEmpty;
  }
  if (!it->is_object()) {
    config_error(key, "expected an object");
  }
  return *it;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& prefix) {
  for (const auto& [k, _] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end()) {
      config_error(prefix + k, "unknown key");
    }
  }
}

Rgb parse_rgb(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) {
    config_error(key, "expected [r, g, b]");
  }
  std::array<int, 3> c{};
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<int>() < 0 || j[i].get<int>() > 255) {
      config_error(key, "channel values must be integers in [0, 255]");
    }
    c[i] = j[i].get<int>();
  }
  return {static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
          static_cast<std::uint8_t>(c[2])};
}

std::vector<ScoredBox> parse_boxes(const json& j, const std::string& key) {
  if (!j.is_array()) {
    config_error(key, "expected a list of {bbox, confidence}");
  }
  std::vector<ScoredBox> out;
  for (const auto& e : j) {
    try {
      const auto b = e.at("bbox").get<std::vector<double>>();
      if (b.size() != 4) {
        config_error(key, "bbox needs 4 numbers");
      }
      out.push_back({{b[0], b[1], b[2], b[3]}, e.at("confidence").get<double>()});
    } catch (const json::exception& ex) {
      config_error(key, ex.what());
    }
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_preprocess(const json& j, PreprocessConfig& c) {
  const std::string p = "preprocess.";
  reject_unknown(j, {"intensity_threshold", "depth_near_mm", "depth_far_mm", "enhancement_enabled"}, p);
  read(j, "intensity_threshold", c.intensity_threshold, p);
  read(j, "depth_near_mm", c.depth_near_mm, p);
  read(j, "depth_far_mm", c.depth_far_mm, p);
  read(j, "enhancement_enabled", c.enhancement_enabled, p);
}

void parse_roi(const json& j, RoiConfig& c) {
  const std::string p = "roi.";
  reject_unknown(j, {"enabled", "prompt", "modality", "min_confidence", "fallback"}, p);
  read(j, "enabled", c.enabled, p);
  read(j, "prompt", c.prompt, p);
  read(j, "min_confidence", c.min_confidence, p);
  std::string modality = c.modality == RoiModality::kRgb ? "rgb" : "depth";
  read(j, "modality", modality, p);
  if (modality == "rgb") {
    c.modality = RoiModality::kRgb;
  } else if (modality == "depth") {
    c.modality = RoiModality::kDepthPseudocolor;
  } else {
    config_error(p + "modality", "expected rgb or depth, got '" + modality + "'");
  }
  std::string fallback = c.fallback == RoiFallback::kFullImage ? "full_image" : "error";
  read(j, "fallback", fallback, p);
  if (fallback == "full_image") {
    c.fallback = RoiFallback::kFullImage;
  } else if (fallback == "error") {
    c.fallback = RoiFallback::kError;
  } else {
    config_error(p + "fallback", "expected full_image or error, got '" + fallback + "'");
  }
}

void parse_proposals(const json& j, ProposalConfig& c) {
  const std::string p = "proposals.";
  reject_unknown(j, {"points_per_side", "min_confidence", "nms_iou", "min_mask_area"}, p);
  read(j, "points_per_side", c.points_per_side, p);
  read(j, "min_confidence", c.min_confidence, p);
  read(j, "nms_iou", c.nms_iou, p);
  read(j, "min_mask_area", c.min_mask_area, p);
}

void parse_matching(const json& j, MatchConfig& c) {
  const std::string p = "matching.";
  reject_unknown(j,
                 {"w_sem", "w_appe", "w_geo", "accept_threshold", "view_count", "appearance_top_k",
                  "patch_coverage", "render"},
                 p);
  read(j, "w_sem", c.w_sem, p);
  read(j, "w_appe", c.w_appe, p);
  read(j, "w_geo", c.w_geo, p);
  read(j, "accept_threshold", c.accept_threshold, p);
  read(j, "view_count", c.view_count, p);
  read(j, "appearance_top_k", c.appearance_top_k, p);
  read(j, "patch_coverage", c.patch_coverage, p);
  const json& r = section(j, "render");
  const std::string rp = p + "render.";
  reject_unknown(r, {"width", "height", "intrinsics", "distance_mm"}, rp);
  read(r, "width", c.render.width, rp);
  read(r, "height", c.render.height, rp);
  if (r.contains("intrinsics")) {
    std::vector<double> k;
    read(r, "intrinsics", k, rp);
    if (k.size() != 4) {
      config_error(rp + "intrinsics", "expected [fx, fy, cx, cy]");
    }
    c.render.intrinsics = {k[0], k[1], k[2], k[3]};
  }
  if (r.contains("distance_mm")) {
    double d = 0.0;
    read(r, "distance_mm", d, rp);
    c.render.distance_mm = d;
  }
}

void parse_eval(const json& j, EvalConfig& c) {
  const std::string p = "eval.";
  reject_unknown(j, {"iou_thresholds", "iou_kind", "max_dets_per_image"}, p);
  read(j, "iou_thresholds", c.iou_thresholds, p);
  read(j, "max_dets_per_image", c.max_dets_per_image, p);
  std::string kind = c.iou_kind == IouKind::kMask ? "mask" : "bbox";
  read(j, "iou_kind", kind, p);
  if (kind == "mask") {
    c.iou_kind = IouKind::kMask;
  } else if (kind == "bbox") {
    c.iou_kind = IouKind::kBbox;
  } else {
    config_error(p + "iou_kind", "expected mask or bbox, got '" + kind + "'");
  }
}

void parse_mock(const json& j, MockSettings& m) {
  const std::string p = "backends.mock.";
  reject_unknown(j,
                 {"enhancer", "gain", "roi_boxes", "roi_boxes_by_hash", "background",
                  "segmenter_confidence", "features", "palette", "feature_dim", "feature_grid",
                  "object_colors", "latency_ms"},
                 p);
  read(j, "enhancer", m.enhancer, p);
  read(j, "gain", m.gain, p);
  read(j, "segmenter_confidence", m.segmenter_confidence, p);
  read(j, "features", m.features, p);
  read(j, "feature_dim", m.feature_dim, p);
  read(j, "feature_grid", m.feature_grid, p);
  if (j.contains("roi_boxes")) {
    m.roi_boxes = parse_boxes(j["roi_boxes"], p + "roi_boxes");
  }
  if (j.contains("roi_boxes_by_hash")) {
    for (const auto& [hash, boxes] : section(j, "roi_boxes_by_hash").items()) {
      try {
        m.roi_boxes_by_hash[std::stoull(hash, nullptr, 0)] = parse_boxes(boxes, p + "roi_boxes_by_hash");
      } catch (const std::logic_error&) {
        config_error(p + "roi_boxes_by_hash", "bad image hash '" + hash + "'");
      }
    }
  }
  if (j.contains("background")) {
    m.background = parse_rgb(j["background"], p + "background");
  }
  if (j.contains("palette")) {
    m.palette.clear();
    for (const auto& c : j["palette"]) {
      m.palette.push_back(parse_rgb(c, p + "palette"));
    }
  }
  if (j.contains("object_colors")) {
    for (const auto& [id, c] : section(j, "object_colors").items()) {
      try {
        m.object_colors[std::stoi(id)] = parse_rgb(c, p + "object_colors." + id);
      } catch (const std::logic_error&) {
        config_error(p + "object_colors", "bad object id '" + id + "'");
      }
    }
  }
  if (j.contains("latency_ms")) {
    for (const auto& [kind, ms] : section(j, "latency_ms").items()) {
      try {
        m.latency_ms[backend_kind_from_string(kind)] = ms.get<double>();
      } catch (const std::exception& e) {
        config_error(p + "latency_ms." + kind, e.what());
      }
    }
  }
}

void parse_backends(const json& j, PipelineConfig& cfg) {
  const std::string p = "backends.";
  reject_unknown(j, {"set", "remote", "client", "mock"}, p);
  std::string set = cfg.backend_set == Implementation::kMock ? "mock" : "remote";
  read(j, "set", set, p);
  if (set == "mock") {
    cfg.backend_set = Implementation::kMock;
  } else if (set == "remote") {
    cfg.backend_set = Implementation::kRemote;
  } else {
    config_error(p + "set", "expected mock or remote, got '" + set + "'");
  }
  for (const auto& [name, d] : section(j, "remote").items()) {
    BackendKind kind{};
    try {
      kind = backend_kind_from_string(name);
    } catch (const Error&) {
      config_error(p + "remote." + name, "unknown backend kind");
    }
    auto& desc = cfg.remote[kind];
    const std::string dp = p + "remote." + name + ".";
    reject_unknown(d, {"endpoint", "model_tag", "max_in_flight"}, dp);
    std::string endpoint;
    read(d, "endpoint", endpoint, dp);
    if (!endpoint.empty()) {
      desc.endpoint = endpoint;
    }
    read(d, "model_tag", desc.model_tag, dp);
    read(d, "max_in_flight", desc.max_in_flight, dp);
  }
  const json& client = section(j, "client");
  reject_unknown(client, {"timeout_ms", "max_retries", "retry_backoff_ms"}, p + "client.");
  if (client.contains("timeout_ms")) {
    cfg.client.timeout = std::chrono::milliseconds(client["timeout_ms"].get<long>());
  }
  read(client, "max_retries", cfg.client.max_retries, p + "client.");
  if (client.contains("retry_backoff_ms")) {
    cfg.client.retry_backoff = std::chrono::milliseconds(client["retry_backoff_ms"].get<long>());
  }
  parse_mock(section(j, "mock"), cfg.mock);
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h = (h ^ c) * 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

json rgb_json(Rgb c) { return {c.r, c.g, c.b}; }

}  // namespace

PipelineConfig config_from_json(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what(), "config");
  }
  if (!root.is_object()) {
    config_error("<root>", "expected an object");
  }
  reject_unknown(root,
                 {"dataset", "output_dir", "cache_dir", "preprocess", "roi", "proposals", "matching",
                  "eval", "backends", "run"},
                 "");
  PipelineConfig cfg;
  for (const BackendKind kind : kAllKinds) {
    BackendDescriptor d;
    d.kind = kind;
    d.implementation = Implementation::kRemote;
    d.model_tag = std::string(to_string(kind));
    cfg.remote[kind] = d;
  }

  const json& dataset = section(root, "dataset");
  reject_unknown(dataset, {"root", "models_dir", "object_ids"}, "dataset.");
  auto read_path = [&](const json& obj, const char* key, fs::path& out, const std::string& prefix) {
    std::string s;
    read(obj, key, s, prefix);
    if (!s.empty()) {
      out = resolve(base_dir, s);
    }
  };
  read_path(dataset, "root", cfg.dataset_root, "dataset.");
  read_path(dataset, "models_dir", cfg.models_dir, "dataset.");
  read(dataset, "object_ids", cfg.object_ids, "dataset.");
  read_path(root, "output_dir", cfg.output_dir, "");
  read_path(root, "cache_dir", cfg.cache_dir, "");

  parse_preprocess(section(root, "preprocess"), cfg.preprocess);
  parse_roi(section(root, "roi"), cfg.roi);
  parse_proposals(section(root, "proposals"), cfg.proposals);
  parse_matching(section(root, "matching"), cfg.matching);
  parse_eval(section(root, "eval"), cfg.eval);
  parse_backends(section(root, "backends"), cfg);

  const json& run = section(root, "run");
  reject_unknown(run, {"workers", "timing"}, "run.");
  read(run, "workers", cfg.workers, "run.");
  std::string timing = "wall";
  read(run, "timing", timing, "run.");
  if (timing == "wall") {
    cfg.timing = TimingMode::kWall;
  } else if (timing == "none") {
    cfg.timing = TimingMode::kNone;
  } else {
    config_error("run.timing", "expected wall or none, got '" + timing + "'");
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kConfig, "cannot read config file " + path.string(), "config");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), fs::absolute(path).parent_path());
}

void apply_endpoint_env(PipelineConfig& cfg) {
  for (const BackendKind kind : kAllKinds) {
    std::string var = "BINDET_";
    for (const char c : to_string(kind)) {
      var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    var += "_ENDPOINT";
    if (const char* v = std::getenv(var.c_str()); v != nullptr && *v != '\0') {
      cfg.remote[kind].endpoint = std::string(v);
    }
  }
}

void finalize(PipelineConfig& cfg) {
  if (cfg.dataset_root.empty()) {
    config_error("dataset.root", "required");
  }
  if (!fs::is_directory(cfg.dataset_root)) {
    config_error("dataset.root", "not a directory: " + cfg.dataset_root.string());
  }
  if (cfg.models_dir.empty()) {
    cfg.models_dir = cfg.dataset_root.parent_path() / "models";
  }
  if (cfg.cache_dir.empty()) {
    cfg.cache_dir = cfg.output_dir / "templates";
  }
  if (cfg.workers < 1) {
    config_error("run.workers", "must be >= 1");
  }
  validate(cfg.preprocess);
  validate(cfg.roi);
  validate(cfg.proposals);
  validate(cfg.matching);
  validate(cfg.eval);
  if (cfg.backend_set == Implementation::kRemote) {
    for (const auto& [kind, d] : cfg.remote) {
      validate(d);
    }
  } else {
    const auto& m = cfg.mock;
    if (m.enhancer != "gain" && m.enhancer != "identity") {
      config_error("backends.mock.enhancer", "expected gain or identity");
    }
    if (m.features != "one_hot" && m.features != "hash") {
      config_error("backends.mock.features", "expected one_hot or hash");
    }
    if (m.features == "one_hot" && m.feature_dim <= static_cast<int>(m.palette.size())) {
      config_error("backends.mock.feature_dim", "must exceed the palette size");
    }
  }

  // Everything that changes a rendered template or its embedding.
  json fp;
  fp["view_count"] = cfg.matching.view_count;
  const auto& r = cfg.matching.render;
  fp["render"] = {r.width, r.height, r.intrinsics.fx, r.intrinsics.fy, r.intrinsics.cx, r.intrinsics.cy,
                  r.distance_mm.value_or(-1.0)};
  fp["set"] = cfg.backend_set == Implementation::kMock ? "mock" : "remote";
  if (cfg.backend_set == Implementation::kMock) {
    const auto& m = cfg.mock;
    fp["features"] = {m.features, m.feature_dim, m.feature_grid};
    for (const auto& c : m.palette) {
      fp["palette"].push_back(rgb_json(c));
    }
    for (const auto& [id, c] : m.object_colors) {
      fp["object_colors"][std::to_string(id)] = rgb_json(c);
    }
    fp["background"] = rgb_json(m.background);
  } else {
    fp["features"] = cfg.remote.at(BackendKind::kFeatureExtractor).model_tag;
    fp["renderer"] = cfg.remote.at(BackendKind::kRenderer).model_tag;
  }
  cfg.template_fingerprint = fnv1a_hex(fp.dump());
}

BackendSet make_backends(const PipelineConfig& cfg) {
  auto latency = [&](Backend& b) {
    if (const auto it = cfg.mock.latency_ms.find(b.descriptor().kind); it != cfg.mock.latency_ms.end()) {
      b.inject_latency(std::chrono::microseconds(static_cast<long>(it->second * 1000.0)));
    }
  };
  auto finish = [&](auto ptr) {
    latency(*ptr);
    return ptr;
  };

  BackendSet set;
  if (cfg.backend_set == Implementation::kRemote) {
    const auto& r = cfg.remote;
    set.enhancer = finish(std::make_shared<remote::RemoteEnhancer>(r.at(BackendKind::kEnhancer), cfg.client));
    set.roi_detector =
        finish(std::make_shared<remote::RemoteRoiDetector>(r.at(BackendKind::kRoiDetector), cfg.client));
    set.segmenter = finish(std::make_shared<remote::RemoteSegmenter>(r.at(BackendKind::kSegmenter), cfg.client));
    set.feature_extractor = finish(
        std::make_shared<remote::RemoteFeatureExtractor>(r.at(BackendKind::kFeatureExtractor), cfg.client));
    set.renderer = finish(std::make_shared<remote::RemoteRenderer>(r.at(BackendKind::kRenderer), cfg.client));
    return set;
  }

  const auto& m = cfg.mock;
  if (m.enhancer == "identity") {
    set.enhancer = finish(std::make_shared<mock::IdentityEnhancer>());
  } else {
    set.enhancer = finish(std::make_shared<mock::GainEnhancer>(m.gain));
  }
  set.roi_detector = finish(std::make_shared<mock::ScriptedRoiDetector>(m.roi_boxes, m.roi_boxes_by_hash));
  set.segmenter = finish(std::make_shared<mock::FloodFillSegmenter>(m.background, m.segmenter_confidence));
  if (m.features == "hash") {
    set.feature_extractor = finish(std::make_shared<mock::HashFeatureExtractor>(m.feature_dim, m.feature_grid));
  } else {
    set.feature_extractor =
        finish(std::make_shared<mock::OneHotFeatureExtractor>(m.palette, m.feature_dim, m.feature_grid));
  }
  set.renderer = finish(std::make_shared<mock::ProjectionRenderer>(m.object_colors, m.background));
  return set;
}

}  // namespace bindet
