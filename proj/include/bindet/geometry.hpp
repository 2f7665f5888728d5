#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bindet/error.hpp"

namespace bindet {

/// Axis-aligned box. (x, y) is the top-left corner in continuous pixel
/// coordinates; the right/bottom edges x+w, y+h are exclusive. This is the
/// BOP result convention.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  [[nodiscard]] double area() const noexcept { return w * h; }
  [[nodiscard]] double right() const noexcept { return x + w; }
  [[nodiscard]] double bottom() const noexcept { return y + h; }
  [[nodiscard]] Eigen::Vector2d center() const noexcept { return {x + 0.5 * w, y + 0.5 * h}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

[[nodiscard]] bool is_valid(const BoundingBox& b) noexcept;
/// Throws kInvalidArgument unless w > 0, h > 0 and all fields are finite.
void validate(const BoundingBox& b);

/// Binary mask stored one byte per pixel, row-major.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool get(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  [[nodiscard]] bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  [[nodiscard]] std::size_t count() const noexcept;
  [[nodiscard]] bool empty() const noexcept { return count() == 0; }
  [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  /// Fills the rectangle [x0, x0+w) x [y0, y0+h), clipped to the mask.
  void fill_rect(int x0, int y0, int w, int h, bool v = true);

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Throws kValidation unless fx, fy > 0 and all fields finite.
void validate(const CameraIntrinsics& k);

/// The ROI rectangle together with the intrinsics that describe the cropped
/// image. Construct through make_roi_crop so the principal-point shift holds.
struct RoiCrop {
  BoundingBox box;
  CameraIntrinsics adjusted;
  CameraIntrinsics original;

  friend bool operator==(const RoiCrop&, const RoiCrop&) = default;
};

[[nodiscard]] RoiCrop make_roi_crop(const BoundingBox& box, const CameraIntrinsics& original);
/// True when adjusted = original shifted by the crop origin.
[[nodiscard]] bool satisfies_shift_invariant(const RoiCrop& roi, double tol = 0.0) noexcept;

/// COCO uncompressed RLE: column-major run lengths, starting with a run of
/// zeros (which may be empty).
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

[[nodiscard]] double bbox_iou(const BoundingBox& a, const BoundingBox& b);
/// |a ∩ b| / |a ∪ b|; 0 when both are empty. Throws on size mismatch.
[[nodiscard]] double mask_iou(const BinaryMask& a, const BinaryMask& b);
/// Tight integer box around the set pixels. Throws kEmptyMask on an empty mask.
[[nodiscard]] BoundingBox mask_to_bbox(const BinaryMask& m);

[[nodiscard]] Rle rle_encode(const BinaryMask& m);
[[nodiscard]] BinaryMask rle_decode(const Rle& rle);

[[nodiscard]] CameraIntrinsics adjust_intrinsics(const CameraIntrinsics& k, const BoundingBox& crop);
/// Pinhole projection u = fx*x/z + cx, v = fy*y/z + cy. Throws kBehindCamera for z <= 0.
[[nodiscard]] Eigen::Vector2d project_point(const CameraIntrinsics& k, const Eigen::Vector3d& p);

[[nodiscard]] BoundingBox remap_bbox(const BoundingBox& b, const RoiCrop& crop);
/// Pastes a crop-local mask into an orig_w x orig_h canvas; out-of-bounds pixels are dropped.
[[nodiscard]] BinaryMask remap_mask(const BinaryMask& m, const RoiCrop& crop, int orig_w, int orig_h);
/// Inverse of remap_mask for integer crop boxes: the sub-mask under the box.
[[nodiscard]] BinaryMask crop_mask(const BinaryMask& m, const BoundingBox& box);

/// Clips b to [0,width) x [0,height). Returns false when nothing remains.
[[nodiscard]] bool clip_bbox(BoundingBox& b, double width, double height) noexcept;

}  // namespace bindet
