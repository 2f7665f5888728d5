#include "bindet/wire.hpp"

#include <openssl/evp.h>

#include "bindet/image_io.hpp"

namespace bindet::wire {
namespace {

[[noreturn]] void protocol_error(const std::string& what) {
  throw Error(ErrorCode::kProtocol, what);
}

template <typename F>
auto parse_guard(const char* what, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const json::exception& e) {
    protocol_error(std::string(what) + ": " + e.what());
  }
}

json encode_box(const BoundingBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BoundingBox decode_box(const json& v) {
  if (!v.is_array() || v.size() != 4) {
    protocol_error("box must be an array of 4 numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
}

json base_request(BackendKind kind, const std::string& model_tag) {
  return {{"kind", std::string(to_string(kind))}, {"model_tag", model_tag}};
}

std::vector<double> confidences_of(const json& response, std::size_t expected) {
  auto conf = response.at("confidences").get<std::vector<double>>();
  if (conf.size() != expected) {
    protocol_error("confidences length does not match payload");
  }
  return conf;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    protocol_error("base64 length is not a multiple of 4");
  }
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) {
    protocol_error("invalid base64 payload");
  }
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') {
    ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') {
      ++pad;
    }
  }
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

json encode_image(const RgbImage& image) { return base64_encode(encode_png(image)); }

RgbImage decode_image(const json& value) {
  if (!value.is_string()) {
    protocol_error("image_png_b64 must be a string");
  }
  const auto bytes = base64_decode(value.get<std::string>());
  try {
    return decode_png_rgb(bytes);
  } catch (const Error& e) {
    protocol_error(e.detail());
  }
}

json encode_rle(const Rle& rle) {
  return {{"counts", rle.counts}, {"size", json::array({rle.height, rle.width})}};
}

Rle decode_rle(const json& value) {
  return parse_guard("mask_rle", [&] {
    Rle rle;
    rle.counts = value.at("counts").get<std::vector<std::uint32_t>>();
    const auto& size = value.at("size");
    rle.height = size.at(0).get<int>();
    rle.width = size.at(1).get<int>();
    return rle;
  });
}

json enhancer_request(const std::string& model_tag, const RgbImage& image) {
  json req = base_request(BackendKind::kEnhancer, model_tag);
  req["image_png_b64"] = encode_image(image);
  return req;
}

json roi_request(const std::string& model_tag, const RgbImage& image, const std::string& prompt) {
  json req = base_request(BackendKind::kRoiDetector, model_tag);
  req["image_png_b64"] = encode_image(image);
  req["prompt"] = prompt;
  return req;
}

json segmenter_request(const std::string& model_tag, const RgbImage& image,
                       std::span<const Eigen::Vector2d> points) {
  json req = base_request(BackendKind::kSegmenter, model_tag);
  req["image_png_b64"] = encode_image(image);
  json pts = json::array();
  for (const auto& p : points) {
    pts.push_back(json::array({p.x(), p.y()}));
  }
  req["points"] = std::move(pts);
  return req;
}

json feature_request(const std::string& model_tag, const RgbImage& image, const BinaryMask* mask) {
  json req = base_request(BackendKind::kFeatureExtractor, model_tag);
  req["image_png_b64"] = encode_image(image);
  if (mask != nullptr) {
    req["mask_rle"] = encode_rle(rle_encode(*mask));
  }
  return req;
}

json renderer_request(const std::string& model_tag, const RenderRequest& request) {
  json req = base_request(BackendKind::kRenderer, model_tag);
  json verts = json::array();
  for (const auto& v : request.vertices) {
    verts.push_back(json::array({v.x(), v.y(), v.z()}));
  }
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rot.push_back(request.rotation(r, c));
    }
  }
  const auto& k = request.intrinsics;
  req["render"] = {
      {"object_id", request.object_id},
      {"vertices", std::move(verts)},
      {"rotation", std::move(rot)},
      {"distance_mm", request.distance_mm},
      {"intrinsics", json::array({k.fx, k.fy, k.cx, k.cy})},
      {"width", request.width},
      {"height", request.height},
  };
  return req;
}

json enhancer_response(const RgbImage& image) { return {{"image_png_b64", encode_image(image)}}; }

json roi_response(const std::vector<ScoredBox>& boxes) {
  json b = json::array();
  json c = json::array();
  for (const auto& sb : boxes) {
    b.push_back(encode_box(sb.box));
    c.push_back(sb.confidence);
  }
  return {{"boxes", std::move(b)}, {"confidences", std::move(c)}};
}

json segmenter_response(const std::vector<SegmentResult>& results) {
  json m = json::array();
  json c = json::array();
  for (const auto& r : results) {
    m.push_back(encode_rle(rle_encode(r.mask)));
    c.push_back(r.confidence);
  }
  return {{"masks_rle", std::move(m)}, {"confidences", std::move(c)}};
}

json feature_response(const FeatureOutput& features) {
  return {{"embedding", features.global},
          {"patches", features.patches},
          {"grid", json::array({features.grid_h, features.grid_w})}};
}

json renderer_response(const RenderOutput& output) {
  return {{"image_png_b64", encode_image(output.image)}, {"bbox", encode_box(output.silhouette_bbox)}};
}

json error_response(const Error& error) {
  return {{"error",
           {{"code", std::string(to_string(error.code()))},
            {"message", error.detail()},
            {"stage", error.stage()}}}};
}

RgbImage parse_enhancer_response(const json& response) {
  return parse_guard("enhancer response", [&] { return decode_image(response.at("image_png_b64")); });
}

std::vector<ScoredBox> parse_roi_response(const json& response) {
  return parse_guard("roi response", [&] {
    const auto& boxes = response.at("boxes");
    if (!boxes.is_array()) {
      protocol_error("boxes must be an array");
    }
    const auto conf = confidences_of(response, boxes.size());
    std::vector<ScoredBox> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      out.push_back({decode_box(boxes[i]), conf[i]});
    }
    return out;
  });
}

std::vector<SegmentResult> parse_segmenter_response(const json& response) {
  return parse_guard("segmenter response", [&] {
    const auto& masks = response.at("masks_rle");
    if (!masks.is_array()) {
      protocol_error("masks_rle must be an array");
    }
    const auto conf = confidences_of(response, masks.size());
    std::vector<SegmentResult> out;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      try {
        out.push_back({rle_decode(decode_rle(masks[i])), conf[i]});
      } catch (const Error& e) {
        protocol_error("mask " + std::to_string(i) + ": " + e.detail());
      }
    }
    return out;
  });
}

FeatureOutput parse_feature_response(const json& response) {
  return parse_guard("feature response", [&] {
    FeatureOutput out;
    out.global = response.at("embedding").get<Embedding>();
    out.patches = response.at("patches").get<std::vector<Embedding>>();
    const auto& grid = response.at("grid");
    out.grid_h = grid.at(0).get<int>();
    out.grid_w = grid.at(1).get<int>();
    return out;
  });
}

RenderOutput parse_renderer_response(const json& response) {
  return parse_guard("renderer response", [&] {
    RenderOutput out;
    out.image = decode_image(response.at("image_png_b64"));
    out.silhouette_bbox = decode_box(response.at("bbox"));
    return out;
  });
}

json dispatch(const BackendSet& local, const json& request) {
  if (!request.is_object() || !request.contains("kind") || !request["kind"].is_string()) {
    protocol_error("request must be an object with a string 'kind'");
  }
  const BackendKind kind = backend_kind_from_string(request["kind"].get<std::string>());
  auto require = [&](const auto& ptr) -> const auto& {
    if (!ptr) {
      throw Error(ErrorCode::kBackendUnavailable, "no local backend for this kind",
                  std::string(to_string(kind)));
    }
    return *ptr;
  };
  return parse_guard("request", [&]() -> json {
    switch (kind) {
      case BackendKind::kEnhancer:
        return enhancer_response(require(local.enhancer).run(decode_image(request.at("image_png_b64"))));
      case BackendKind::kRoiDetector:
        return roi_response(require(local.roi_detector)
                                .run(decode_image(request.at("image_png_b64")),
                                     request.at("prompt").get<std::string>()));
      case BackendKind::kSegmenter: {
        std::vector<Eigen::Vector2d> points;
        for (const auto& p : request.at("points")) {
          points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        }
        return segmenter_response(
            require(local.segmenter).run(decode_image(request.at("image_png_b64")), points));
      }
      case BackendKind::kFeatureExtractor: {
        const RgbImage image = decode_image(request.at("image_png_b64"));
        if (request.contains("mask_rle")) {
          const BinaryMask mask = rle_decode(decode_rle(request["mask_rle"]));
          return feature_response(require(local.feature_extractor).run(image, &mask));
        }
        return feature_response(require(local.feature_extractor).run(image));
      }
      case BackendKind::kRenderer: {
        const auto& r = request.at("render");
        RenderRequest rr;
        rr.object_id = r.at("object_id").get<int>();
        for (const auto& v : r.at("vertices")) {
          rr.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
        }
        const auto rot = r.at("rotation").get<std::vector<double>>();
        if (rot.size() != 9) {
          protocol_error("rotation must have 9 entries");
        }
        for (int i = 0; i < 9; ++i) {
          rr.rotation(i / 3, i % 3) = rot[static_cast<std::size_t>(i)];
        }
        rr.distance_mm = r.at("distance_mm").get<double>();
        const auto k = r.at("intrinsics").get<std::vector<double>>();
        if (k.size() != 4) {
          protocol_error("intrinsics must have 4 entries");
        }
        rr.intrinsics = {k[0], k[1], k[2], k[3]};
        rr.width = r.at("width").get<int>();
        rr.height = r.at("height").get<int>();
        return renderer_response(require(local.renderer).run(rr));
      }
    }
    protocol_error("unhandled kind");
  });
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kProtocol:
    case ErrorCode::kMalformedInput:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
      return 400;
    case ErrorCode::kContractViolation:
      return 422;
    case ErrorCode::kBackendUnavailable:
      return 503;
    default:
      return 500;
  }
}

ErrorCode error_code_for_status(int status) {
  switch (status) {
    case 400: return ErrorCode::kProtocol;
    case 422: return ErrorCode::kContractViolation;
    case 500: return ErrorCode::kBackendFailure;
    case 502:
    case 503:
    case 504: return ErrorCode::kBackendUnavailable;
    default: return ErrorCode::kProtocol;
  }
}

}  // namespace bindet::wire
