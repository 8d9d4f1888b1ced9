#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dbench {

inline constexpr int kMaxImageDimension = 16384;

/**
 * 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
 *
 * The constructor validates dimensions and payload length, so every Image
 * that exists satisfies width*height*channels == pixels().size(). Images are
 * treated as immutable values: operators return new images.
 */
class Image {
 public:
  Image(int width, int height, int channels, std::vector<std::uint8_t> pixels);

  /// Image filled with a single value on every channel.
  static Image filled(int width, int height, int channels, std::uint8_t value);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool operator==(const Image&) const = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<std::uint8_t> pixels_;
};

/// BT.601 luma, round-half-up. Identity for single-channel input.
Image to_grayscale(const Image& img);

}  // namespace dbench
