#include "bindet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bindet {

bool is_valid(const BoundingBox& b) noexcept {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
         b.w > 0.0 && b.h > 0.0;
}

void validate(const BoundingBox& b) {
  if (!is_valid(b)) {
    throw Error(ErrorCode::kInvalidArgument, "bounding box must be finite with w > 0 and h > 0");
  }
}

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative mask dimensions");
  }
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 0 || height < 0 ||
      bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kDimensionMismatch, "mask bit count does not match width*height");
  }
  for (auto& b : bits_) {
    b = b != 0 ? 1 : 0;
  }
}

std::size_t BinaryMask::count() const noexcept {
  // Bits are 0/1, so a plain sum vectorizes where std::count does not. The
  // 32-bit partial sums cannot overflow within a chunk.
  constexpr std::size_t kChunk = std::size_t{1} << 30;
  std::size_t total = 0;
  for (std::size_t start = 0; start < bits_.size(); start += kChunk) {
    const std::size_t end = std::min(bits_.size(), start + kChunk);
    std::uint32_t partial = 0;
    for (std::size_t i = start; i < end; ++i) {
      partial += bits_[i];
    }
    total += partial;
  }
  return total;
}

void BinaryMask::fill_rect(int x0, int y0, int w, int h, bool v) {
  const int xa = std::max(0, x0);
  const int ya = std::max(0, y0);
  const int xb = std::min(width_, x0 + w);
  const int yb = std::min(height_, y0 + h);
  for (int y = ya; y < yb; ++y) {
    for (int x = xa; x < xb; ++x) {
      set(x, y, v);
    }
  }
}

void validate(const CameraIntrinsics& k) {
  if (!std::isfinite(k.fx) || !std::isfinite(k.fy) || !std::isfinite(k.cx) ||
      !std::isfinite(k.cy)) {
    throw Error(ErrorCode::kValidation, "camera intrinsics must be finite");
  }
  if (k.fx <= 0.0 || k.fy <= 0.0) {
    throw Error(ErrorCode::kValidation, "focal lengths must be positive");
  }
}

RoiCrop make_roi_crop(const BoundingBox& box, const CameraIntrinsics& original) {
  validate(box);
  return RoiCrop{box, adjust_intrinsics(original, box), original};
}

bool satisfies_shift_invariant(const RoiCrop& roi, double tol) noexcept {
  return roi.adjusted.fx == roi.original.fx && roi.adjusted.fy == roi.original.fy &&
         std::abs(roi.adjusted.cx - (roi.original.cx - roi.box.x)) <= tol &&
         std::abs(roi.adjusted.cy - (roi.original.cy - roi.box.y)) <= tol;
}

double bbox_iou(const BoundingBox& a, const BoundingBox& b) {
  // (x+w)-x need not round back to w
  if (a == b) {
    return 1.0;
  }
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "mask_iou on masks of different size");
  }
  const auto ba = a.bits();
  const auto bb = b.bits();
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    inter += static_cast<std::size_t>(ba[i] & bb[i]);
    uni += static_cast<std::size_t>(ba[i] | bb[i]);
  }
  if (uni == 0) {
    return 0.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox mask_to_bbox(const BinaryMask& m) {
  int x0 = m.width();
  int y0 = m.height();
  int x1 = -1;
  int y1 = -1;
  const auto bits = m.bits();
  for (int y = 0; y < m.height(); ++y) {
    const auto row = bits.subspan(static_cast<std::size_t>(y) * m.width(), m.width());
    const auto first = std::find(row.begin(), row.end(), std::uint8_t{1});
    if (first == row.end()) {
      continue;
    }
    const auto last = std::find(row.rbegin(), row.rend(), std::uint8_t{1});
    x0 = std::min(x0, static_cast<int>(first - row.begin()));
    x1 = std::max(x1, static_cast<int>(row.rend() - last) - 1);
    y0 = std::min(y0, y);
    y1 = y;
  }
  if (x1 < 0) {
    throw Error(ErrorCode::kEmptyMask, "mask_to_bbox on an empty mask");
  }
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
          static_cast<double>(y1 - y0 + 1)};
}

Rle rle_encode(const BinaryMask& m) {
  Rle rle{m.height(), m.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < m.width(); ++x) {
    for (int y = 0; y < m.height(); ++y) {
      const std::uint8_t v = m.get(x, y) ? 1 : 0;
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const Rle& rle) {
  if (rle.width < 0 || rle.height < 0) {
    throw Error(ErrorCode::kMalformedInput, "RLE with negative size");
  }
  const std::uint64_t expected = static_cast<std::uint64_t>(rle.width) * rle.height;
  const std::uint64_t total =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  if (total != expected) {
    throw Error(ErrorCode::kMalformedInput,
                "RLE run lengths sum to " + std::to_string(total) + ", expected " +
                    std::to_string(expected));
  }
  BinaryMask m(rle.width, rle.height);
  std::uint64_t pos = 0;
  bool value = false;
  for (const auto run : rle.counts) {
    if (value) {
      for (std::uint64_t i = pos; i < pos + run; ++i) {
        const int x = static_cast<int>(i / static_cast<std::uint64_t>(rle.height));
        const int y = static_cast<int>(i % static_cast<std::uint64_t>(rle.height));
        m.set(x, y);
      }
    }
    pos += run;
    value = !value;
  }
  return m;
}

CameraIntrinsics adjust_intrinsics(const CameraIntrinsics& k, const BoundingBox& crop) {
  return {k.fx, k.fy, k.cx - crop.x, k.cy - crop.y};
}

Eigen::Vector2d project_point(const CameraIntrinsics& k, const Eigen::Vector3d& p) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera, "point has z <= 0");
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

BoundingBox remap_bbox(const BoundingBox& b, const RoiCrop& crop) {
  return {b.x + crop.box.x, b.y + crop.box.y, b.w, b.h};
}

BinaryMask remap_mask(const BinaryMask& m, const RoiCrop& crop, int orig_w, int orig_h) {
  BinaryMask out(orig_w, orig_h);
  const auto ox = static_cast<int>(std::lround(crop.box.x));
  const auto oy = static_cast<int>(std::lround(crop.box.y));
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.get(x, y) && out.contains(x + ox, y + oy)) {
        out.set(x + ox, y + oy);
      }
    }
  }
  return out;
}

BinaryMask crop_mask(const BinaryMask& m, const BoundingBox& box) {
  const auto ox = static_cast<int>(std::lround(box.x));
  const auto oy = static_cast<int>(std::lround(box.y));
  const auto w = static_cast<int>(std::lround(box.w));
  const auto h = static_cast<int>(std::lround(box.h));
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.contains(x + ox, y + oy) && m.get(x + ox, y + oy)) {
        out.set(x, y);
      }
    }
  }
  return out;
}

bool clip_bbox(BoundingBox& b, double width, double height) noexcept {
  const double x0 = std::clamp(b.x, 0.0, width);
  const double y0 = std::clamp(b.y, 0.0, height);
  const double x1 = std::clamp(b.right(), 0.0, width);
  const double y1 = std::clamp(b.bottom(), 0.0, height);
  b = {x0, y0, x1 - x0, y1 - y0};
  return b.w > 0.0 && b.h > 0.0;
}

}  // namespace bindet
