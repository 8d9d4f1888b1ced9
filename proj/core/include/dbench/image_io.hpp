#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "dbench/image.hpp"

namespace dbench {

enum class ImageFormat { Pgm, Ppm, Png };

std::optional<ImageFormat> parse_image_format(std::string_view name);
std::string_view image_format_extension(ImageFormat format);

// Decodes binary PGM (P5), PPM (P6) or 8-bit PNG, dispatching on the file's
// magic bytes rather than its extension.
Image load_image(const std::filesystem::path& path);

void save_image(const Image& img, const std::filesystem::path& path, ImageFormat format);

// In-memory netpbm codec; `load_image` and `save_image` wrap these.
Image decode_netpbm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_netpbm(const Image& img);

}  // namespace dbench
