#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bindet/error.hpp"

namespace bindet {

/// Row-major interleaved raster. Channel count is part of the type so an RGB
/// image can never be passed where a depth map is expected.
template <typename T, int Channels>
class Image {
 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)) * Channels, fill) {}
  Image(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(checked_area(width, height)) * Channels) {
      throw Error(ErrorCode::kDimensionMismatch, "image buffer size does not match dimensions");
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  [[nodiscard]] bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  [[nodiscard]] const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<T> pixel(int x, int y) { return {data_.data() + index(x, y, 0), Channels}; }
  [[nodiscard]] std::span<const T> pixel(int x, int y) const {
    return {data_.data() + index(x, y, 0), Channels};
  }

  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  [[nodiscard]] const std::vector<T>& buffer() const noexcept { return data_; }

  /// Copy of the rectangle [x, x+w) x [y, y+h); the rectangle must lie inside.
  [[nodiscard]] Image crop(int x, int y, int w, int h) const {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > width_ || y + h > height_) {
      throw Error(ErrorCode::kInvalidArgument, "crop rectangle outside image");
    }
    Image out(w, h);
    for (int row = 0; row < h; ++row) {
      const auto* src = data_.data() + index(x, y + row, 0);
      std::copy(src, src + static_cast<std::ptrdiff_t>(w) * Channels,
                out.data_.data() + out.index(0, row, 0));
    }
    return out;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static int checked_area(int width, int height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative image dimensions");
    }
    return width * height;
  }
  [[nodiscard]] std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * Channels + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Image<std::uint8_t, 3>;
using GrayImage = Image<std::uint8_t, 1>;
/// Depth in millimeters; 0 marks a missing measurement.
using DepthMap = Image<float, 1>;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline Rgb rgb_at(const RgbImage& img, int x, int y) {
  const auto p = img.pixel(x, y);
  return {p[0], p[1], p[2]};
}

inline void set_rgb(RgbImage& img, int x, int y, Rgb c) {
  auto p = img.pixel(x, y);
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

/// FNV-1a over dimensions and pixels; used to key scripted mock responses.
std::uint64_t image_hash(const RgbImage& img);

}  // namespace bindet
