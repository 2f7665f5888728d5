#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bindet/backends.hpp"

namespace bindet::mock {

// Deterministic stand-ins for the neural backends. Every mock is a pure
// function of its construction parameters and call arguments.

class IdentityEnhancer final : public Enhancer {
 public:
  IdentityEnhancer();

 protected:
  RgbImage do_run(const RgbImage& image) const override { return image; }
};

/// Multiplies every channel by `gain`, saturating at 255.
class GainEnhancer final : public Enhancer {
 public:
  explicit GainEnhancer(double gain = 2.0);

 protected:
  RgbImage do_run(const RgbImage& image) const override;

 private:
  double gain_;
};

/// Returns fixture boxes: the entry for the image's hash if scripted,
/// otherwise the default list.
class ScriptedRoiDetector final : public RoiDetector {
 public:
  explicit ScriptedRoiDetector(std::vector<ScoredBox> default_boxes = {},
                               std::map<std::uint64_t, std::vector<ScoredBox>> by_hash = {});

 protected:
  std::vector<ScoredBox> do_run(const RgbImage& image, const std::string& prompt) const override;

 private:
  std::vector<ScoredBox> default_boxes_;
  std::map<std::uint64_t, std::vector<ScoredBox>> by_hash_;
};

/// Segments the 4-connected same-color component under each point prompt.
/// Points on the background color yield an empty mask.
class FloodFillSegmenter final : public Segmenter {
 public:
  explicit FloodFillSegmenter(Rgb background = {}, double confidence = 0.95);

 protected:
  std::vector<SegmentResult> do_run(const RgbImage& image,
                                    std::span<const Eigen::Vector2d> points) const override;

 private:
  Rgb background_;
  double confidence_;
};

/// One-hot features keyed by the dominant color under the mask. Colors in the
/// palette map to their index; any other color maps to the last dimension.
/// Patch cells without masked pixels get the zero vector.
class OneHotFeatureExtractor final : public FeatureExtractor {
 public:
  OneHotFeatureExtractor(std::vector<Rgb> palette, int dim, int grid = 4);

 protected:
  FeatureOutput do_run(const RgbImage& image, const BinaryMask* mask) const override;

 private:
  [[nodiscard]] std::size_t index_of(Rgb c) const;

  std::vector<Rgb> palette_;
  int dim_;
  int grid_;
};

/// Pseudo-random features seeded by a hash of the masked pixels; identical
/// inputs give identical embeddings.
class HashFeatureExtractor final : public FeatureExtractor {
 public:
  explicit HashFeatureExtractor(int dim = 32, int grid = 4);

 protected:
  FeatureOutput do_run(const RgbImage& image, const BinaryMask* mask) const override;

 private:
  int dim_;
  int grid_;
};

/// Projects the CAD vertices and paints their bounding rectangle in the
/// object's color. Default colors are derived from the object id.
class ProjectionRenderer final : public Renderer {
 public:
  explicit ProjectionRenderer(std::map<int, Rgb> object_colors = {}, Rgb background = {});

  [[nodiscard]] Rgb color_for(int object_id) const;

 protected:
  RenderOutput do_run(const RenderRequest& request) const override;

 private:
  std::map<int, Rgb> object_colors_;
  Rgb background_;
};

/// A full mock set with the given segmenter background and palette.
BackendSet make_default_set(const std::vector<Rgb>& palette, int feature_dim, Rgb background,
                            std::vector<ScoredBox> roi_boxes, std::map<int, Rgb> object_colors);

}  // namespace bindet::mock
