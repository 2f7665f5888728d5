#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "bindet/image.hpp"

namespace bindet {

using Depth16 = Image<std::uint16_t, 1>;

/// Decoded 8-bit image; gray and color sources are kept apart so callers can
/// decide how to promote gray.
using DecodedImage = std::variant<GrayImage, RgbImage>;

/// Reads an 8-bit PNG/JPEG. Throws kNotFound / kMalformedInput.
DecodedImage read_image(const std::filesystem::path& path);
/// Reads 8-bit data and replicates single-channel sources to three channels.
RgbImage read_rgb(const std::filesystem::path& path);
/// Reads a 16-bit single-channel PNG (BOP depth).
Depth16 read_depth16(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const Depth16& img);

/// Lossless in-memory PNG codec used on the backend wire.
std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);

RgbImage gray_to_rgb(const GrayImage& gray);

}  // namespace bindet
