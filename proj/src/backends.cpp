#include "bindet/backends.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace bindet {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kEnhancer: return "enhancer";
    case BackendKind::kRoiDetector: return "roi_detector";
    case BackendKind::kSegmenter: return "segmenter";
    case BackendKind::kFeatureExtractor: return "feature_extractor";
    case BackendKind::kRenderer: return "renderer";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view name) {
  for (auto kind : {BackendKind::kEnhancer, BackendKind::kRoiDetector, BackendKind::kSegmenter,
                    BackendKind::kFeatureExtractor, BackendKind::kRenderer}) {
    if (to_string(kind) == name) {
      return kind;
    }
  }
  throw Error(ErrorCode::kProtocol, "unknown backend kind '" + std::string(name) + "'");
}

void validate(const BackendDescriptor& d) {
  if (d.model_tag.empty()) {
    throw Error(ErrorCode::kConfig, "backend model_tag must not be empty",
                std::string(to_string(d.kind)));
  }
  if (d.implementation == Implementation::kRemote && (!d.endpoint || d.endpoint->empty())) {
    throw Error(ErrorCode::kConfig, "remote backend requires an endpoint",
                std::string(to_string(d.kind)));
  }
  if (d.max_in_flight < 1) {
    throw Error(ErrorCode::kConfig, "max_in_flight must be >= 1", std::string(to_string(d.kind)));
  }
}

Backend::Backend(BackendDescriptor descriptor)
    : descriptor_(std::move(descriptor)),
      permits_(std::clamp(descriptor_.max_in_flight, 1, 1 << 16)) {}

void Backend::before_call() const {
  if (latency_.count() > 0) {
    std::this_thread::sleep_for(latency_);
  }
}

void Backend::rethrow_tagged() const {
  const std::string name(stage());
  try {
    throw;
  } catch (const Error& e) {
    if (!e.stage().empty()) {
      throw;
    }
    throw Error(e.code(), e.detail(), name).with_attempts(e.attempts());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kBackendFailure, e.what(), name);
  } catch (...) {
    throw Error(ErrorCode::kBackendFailure, "unknown exception", name);
  }
}

std::vector<ScoredBox> RoiDetector::run(const RgbImage& image, const std::string& prompt) const {
  if (prompt.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ROI prompt must not be empty", std::string(stage()));
  }
  auto boxes = guarded([&] { return do_run(image, prompt); });
  for (const auto& b : boxes) {
    if (!std::isfinite(b.box.x) || !std::isfinite(b.box.y) || !std::isfinite(b.box.w) ||
        !std::isfinite(b.box.h) || !(b.confidence >= 0.0 && b.confidence <= 1.0)) {
      throw Error(ErrorCode::kContractViolation, "non-finite box or confidence outside [0,1]",
                  std::string(stage()));
    }
  }
  return boxes;
}

FeatureOutput FeatureExtractor::run(const RgbImage& image, const BinaryMask* mask) const {
  if (mask != nullptr && (mask->width() != image.width() || mask->height() != image.height())) {
    throw Error(ErrorCode::kDimensionMismatch, "feature mask does not match image size",
                std::string(stage()));
  }
  auto out = guarded([&] { return do_run(image, mask); });
  const std::size_t dim = out.global.size();
  bool ok = dim > 0 && out.grid_h >= 0 && out.grid_w >= 0 &&
            out.patches.size() == static_cast<std::size_t>(out.grid_h) * out.grid_w;
  for (const auto& p : out.patches) {
    ok = ok && p.size() == dim;
  }
  if (!ok) {
    throw Error(ErrorCode::kContractViolation,
                "feature output dims inconsistent (global dim " + std::to_string(dim) + ")",
                std::string(stage()));
  }
  return out;
}

RenderOutput Renderer::run(const RenderRequest& request) const {
  if (request.vertices.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "render request has no vertices", std::string(stage()));
  }
  if (request.width <= 0 || request.height <= 0 || !(request.distance_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "render canvas and distance must be positive",
                std::string(stage()));
  }
  auto out = guarded([&] { return do_run(request); });
  if (out.image.width() != request.width || out.image.height() != request.height ||
      !is_valid(out.silhouette_bbox)) {
    throw Error(ErrorCode::kContractViolation, "render output has wrong size or invalid silhouette",
                std::string(stage()));
  }
  return out;
}

}  // namespace bindet
