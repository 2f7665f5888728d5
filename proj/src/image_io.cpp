#include "bindet/image_io.hpp"

#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace bindet {
namespace {

RgbImage from_bgr(const cv::Mat& bgr) {
  RgbImage out(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      set_rgb(out, x, y, {row[x][2], row[x][1], row[x][0]});
    }
  }
  return out;
}

cv::Mat to_bgr(const RgbImage& img) {
  cv::Mat mat(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const auto p = img.pixel(x, y);
      row[x] = {p[2], p[1], p[0]};
    }
  }
  return mat;
}

GrayImage from_gray(const cv::Mat& mat) {
  GrayImage out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    std::memcpy(&out.at(0, y), mat.ptr<std::uint8_t>(y), static_cast<std::size_t>(mat.cols));
  }
  return out;
}

cv::Mat load(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kNotFound, "image not found: " + path.string());
  }
  cv::Mat mat = cv::imread(path.string(), flags);
  if (mat.empty()) {
    throw Error(ErrorCode::kMalformedInput, "cannot decode image: " + path.string());
  }
  return mat;
}

void store(const std::filesystem::path& path, const cv::Mat& mat) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

}  // namespace

DecodedImage read_image(const std::filesystem::path& path) {
  cv::Mat mat = load(path, cv::IMREAD_UNCHANGED);
  if (mat.depth() != CV_8U) {
    throw Error(ErrorCode::kMalformedInput, "expected 8-bit image: " + path.string());
  }
  switch (mat.channels()) {
    case 1:
      return from_gray(mat);
    case 3:
      return from_bgr(mat);
    case 4: {
      cv::Mat bgr;
      cv::Mat channels[4];
      cv::split(mat, channels);
      cv::merge(channels, 3, bgr);
      return from_bgr(bgr);
    }
    default:
      throw Error(ErrorCode::kMalformedInput, "unsupported channel count: " + path.string());
  }
}

RgbImage gray_to_rgb(const GrayImage& gray) {
  RgbImage out(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      const auto v = gray.at(x, y);
      set_rgb(out, x, y, {v, v, v});
    }
  }
  return out;
}

RgbImage read_rgb(const std::filesystem::path& path) {
  auto decoded = read_image(path);
  if (auto* gray = std::get_if<GrayImage>(&decoded)) {
    return gray_to_rgb(*gray);
  }
  return std::get<RgbImage>(std::move(decoded));
}

Depth16 read_depth16(const std::filesystem::path& path) {
  cv::Mat mat = load(path, cv::IMREAD_ANYDEPTH);
  if (mat.channels() != 1) {
    throw Error(ErrorCode::kMalformedInput, "depth image must be single channel: " + path.string());
  }
  if (mat.depth() == CV_8U) {
    mat.convertTo(mat, CV_16U);
  }
  if (mat.depth() != CV_16U) {
    throw Error(ErrorCode::kMalformedInput, "depth image must be 16-bit: " + path.string());
  }
  Depth16 out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    std::memcpy(&out.at(0, y), mat.ptr<std::uint16_t>(y),
                static_cast<std::size_t>(mat.cols) * sizeof(std::uint16_t));
  }
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) { store(path, to_bgr(img)); }

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat mat(img.height(), img.width(), CV_8UC1,
              const_cast<std::uint8_t*>(img.data().data()));
  store(path, mat);
}

void write_png(const std::filesystem::path& path, const Depth16& img) {
  cv::Mat mat(img.height(), img.width(), CV_16UC1,
              const_cast<std::uint16_t*>(img.data().data()));
  store(path, mat);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_bgr(img), out)) {
    throw Error(ErrorCode::kIo, "PNG encoding failed");
  }
  return out;
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) {
    throw Error(ErrorCode::kMalformedInput, "empty PNG payload");
  }
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (mat.empty()) {
    throw Error(ErrorCode::kMalformedInput, "cannot decode PNG payload");
  }
  return from_bgr(mat);
}

std::uint64_t image_hash(const RgbImage& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (int shift = 0; shift < 32; shift += 8) {
    mix(static_cast<std::uint8_t>(static_cast<unsigned>(img.width()) >> shift));
    mix(static_cast<std::uint8_t>(static_cast<unsigned>(img.height()) >> shift));
  }
  for (const auto v : img.data()) {
    mix(v);
  }
  return h;
}

}  // namespace bindet
