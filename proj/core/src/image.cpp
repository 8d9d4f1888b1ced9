#include "dbench/image.hpp"

#include <string>

#include "dbench/error.hpp"

namespace dbench {

Image::Image(int width, int height, int channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1 || width > kMaxImageDimension || height > kMaxImageDimension) {
    throw UsageError("image dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                     " outside [1, " + std::to_string(kMaxImageDimension) + "]");
  }
  if (channels != 1 && channels != 3) {
    throw UsageError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  const auto expected = static_cast<std::size_t>(width) * height * channels;
  if (pixels_.size() != expected) {
    throw UsageError("pixel buffer holds " + std::to_string(pixels_.size()) + " bytes, expected " +
                     std::to_string(expected));
  }
}

Image Image::filled(int width, int height, int channels, std::uint8_t value) {
  const auto n = static_cast<std::size_t>(width > 0 ? width : 0) * (height > 0 ? height : 0) *
                 (channels > 0 ? channels : 0);
  return Image(width, height, channels, std::vector<std::uint8_t>(n, value));
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  const auto src = img.pixels();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.width()) * img.height());
  // Integer form of round(0.299 R + 0.587 G + 0.114 B) with ties rounding up;
  // weights scaled by 1000 are exact, so no floating-point tie ambiguity.
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    const int scaled = 299 * r + 587 * g + 114 * b;
    const int v = (scaled + 500) / 1000;
    out[i] = static_cast<std::uint8_t>(v > 255 ? 255 : v);
  }
  return Image(img.width(), img.height(), 1, std::move(out));
}

}  // namespace dbench
