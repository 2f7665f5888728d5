#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bindet/geometry.hpp"
#include "bindet/image.hpp"

namespace bindet {

enum class BackendKind { kEnhancer, kRoiDetector, kSegmenter, kFeatureExtractor, kRenderer };
enum class Implementation { kMock, kRemote };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct BackendDescriptor {
  BackendKind kind = BackendKind::kEnhancer;
  Implementation implementation = Implementation::kMock;
  std::optional<std::string> endpoint;
  std::string model_tag;
  int max_in_flight = 1;
};

/// Throws kConfig when a remote descriptor has no endpoint or the tag is empty.
void validate(const BackendDescriptor& d);

struct ScoredBox {
  BoundingBox box;
  double confidence = 0.0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

struct SegmentResult {
  BinaryMask mask;
  double confidence = 0.0;

  friend bool operator==(const SegmentResult&, const SegmentResult&) = default;
};

using Embedding = std::vector<float>;

/// Global token plus a row-major grid of patch tokens.
struct FeatureOutput {
  Embedding global;
  std::vector<Embedding> patches;
  int grid_h = 0;
  int grid_w = 0;

  friend bool operator==(const FeatureOutput&, const FeatureOutput&) = default;
};

struct RenderRequest {
  int object_id = 0;
  std::vector<Eigen::Vector3d> vertices;  // object frame, millimeters
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // object -> camera
  double distance_mm = 1000.0;
  CameraIntrinsics intrinsics;
  int width = 0;
  int height = 0;
};

struct RenderOutput {
  RgbImage image;
  BoundingBox silhouette_bbox;

  friend bool operator==(const RenderOutput&, const RenderOutput&) = default;
};

/// Common base for all backends. Public entry points are non-virtual: they
/// hold one of `max_in_flight` permits for the duration of the call and turn
/// any escaping exception into an Error tagged with this backend's kind.
class Backend {
 public:
  explicit Backend(BackendDescriptor descriptor);
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;
  virtual ~Backend() = default;

  [[nodiscard]] const BackendDescriptor& descriptor() const noexcept { return descriptor_; }
  [[nodiscard]] std::string_view stage() const noexcept { return to_string(descriptor_.kind); }

  /// Adds a fixed sleep to every call; used to benchmark stage accounting.
  void inject_latency(std::chrono::microseconds delay) noexcept { latency_ = delay; }

 protected:
  template <typename F>
  auto guarded(F&& body) const -> decltype(body());

 private:
  [[noreturn]] void rethrow_tagged() const;
  void before_call() const;

  BackendDescriptor descriptor_;
  mutable std::counting_semaphore<1 << 16> permits_;
  std::chrono::microseconds latency_{0};
};

class Enhancer : public Backend {
 public:
  using Backend::Backend;
  [[nodiscard]] RgbImage run(const RgbImage& image) const {
    return guarded([&] { return do_run(image); });
  }

 protected:
  virtual RgbImage do_run(const RgbImage& image) const = 0;
};

class RoiDetector : public Backend {
 public:
  using Backend::Backend;
  [[nodiscard]] std::vector<ScoredBox> run(const RgbImage& image, const std::string& prompt) const;

 protected:
  virtual std::vector<ScoredBox> do_run(const RgbImage& image, const std::string& prompt) const = 0;
};

class Segmenter : public Backend {
 public:
  using Backend::Backend;
  /// One result per point prompt, in prompt order.
  [[nodiscard]] std::vector<SegmentResult> run(const RgbImage& image,
                                               std::span<const Eigen::Vector2d> points) const {
    return guarded([&] { return do_run(image, points); });
  }

 protected:
  virtual std::vector<SegmentResult> do_run(const RgbImage& image,
                                            std::span<const Eigen::Vector2d> points) const = 0;
};

class FeatureExtractor : public Backend {
 public:
  using Backend::Backend;
  /// Without a mask the whole image is described.
  [[nodiscard]] FeatureOutput run(const RgbImage& image, const BinaryMask* mask = nullptr) const;

 protected:
  virtual FeatureOutput do_run(const RgbImage& image, const BinaryMask* mask) const = 0;
};

class Renderer : public Backend {
 public:
  using Backend::Backend;
  [[nodiscard]] RenderOutput run(const RenderRequest& request) const;

 protected:
  virtual RenderOutput do_run(const RenderRequest& request) const = 0;
};

struct BackendSet {
  std::shared_ptr<const Enhancer> enhancer;
  std::shared_ptr<const RoiDetector> roi_detector;
  std::shared_ptr<const Segmenter> segmenter;
  std::shared_ptr<const FeatureExtractor> feature_extractor;
  std::shared_ptr<const Renderer> renderer;
};

// ---------------------------------------------------------------------------

template <typename F>
auto Backend::guarded(F&& body) const -> decltype(body()) {
  permits_.acquire();
  struct Release {
    std::counting_semaphore<1 << 16>& sem;
    ~Release() { sem.release(); }
  } release{permits_};
  try {
    before_call();
    return body();
  } catch (...) {
    rethrow_tagged();
  }
}

}  // namespace bindet
