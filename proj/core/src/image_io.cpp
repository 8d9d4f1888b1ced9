#include "dbench/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dbench/error.hpp"

namespace dbench {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  // Skips whitespace and '#' comments, then parses a decimal integer.
  long next_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) fail(std::string(what) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + what, start);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail("expected single whitespace before raster", pos_);
    }
    ++pos_;
  }

  [[noreturn]] static void fail(const std::string& msg, std::size_t at) {
    throw FormatError("netpbm: " + msg + " at byte offset " + std::to_string(at));
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png: ") + image.message + " (file size " + std::to_string(bytes.size()) +
                      " bytes)");
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw FormatError("png: alpha channels are not supported");
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("png: only 8-bit depth is supported");
  }
  const int channels = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (image.width > static_cast<png_uint_32>(kMaxImageDimension) ||
      image.height > static_cast<png_uint_32>(kMaxImageDimension)) {
    png_image_free(&image);
    throw FormatError("png: image exceeds maximum dimension");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("png: " + msg + " (file size " + std::to_string(bytes.size()) + " bytes)");
  }
  return Image(static_cast<int>(image.width), static_cast<int>(image.height), channels, std::move(pixels));
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels().data(), 0, nullptr)) {
    throw FormatError(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels().data(), 0, nullptr)) {
    throw FormatError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::optional<ImageFormat> parse_image_format(std::string_view name) {
  if (name == "pgm") return ImageFormat::Pgm;
  if (name == "ppm") return ImageFormat::Ppm;
  if (name == "png") return ImageFormat::Png;
  return std::nullopt;
}

std::string_view image_format_extension(ImageFormat format) {
  switch (format) {
    case ImageFormat::Pgm:
      return ".pgm";
    case ImageFormat::Ppm:
      return ".ppm";
    case ImageFormat::Png:
      return ".png";
  }
  return "";
}

Image decode_netpbm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    HeaderReader::fail("expected magic P5 or P6", 0);
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader header(bytes.subspan(2));
  const long width = header.next_int("width");
  const long height = header.next_int("height");
  const std::size_t maxval_at = header.offset() + 2;
  const long maxval = header.next_int("maxval");
  if (maxval != 255) HeaderReader::fail("maxval must be 255", maxval_at);
  header.single_space();
  if (width < 1 || height < 1 || width > kMaxImageDimension || height > kMaxImageDimension) {
    HeaderReader::fail("dimensions out of range", 2);
  }
  const std::size_t raster_at = header.offset() + 2;
  const auto expected = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - raster_at < expected) {
    throw FormatError("netpbm: truncated raster, expected " + std::to_string(expected) + " bytes at byte offset " +
                      std::to_string(raster_at) + " but file ends at byte offset " +
                      std::to_string(bytes.size()));
  }
  std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(raster_at),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(raster_at + expected));
  return Image(static_cast<int>(width), static_cast<int>(height), channels, std::move(pixels));
}

std::vector<std::uint8_t> encode_netpbm(const Image& img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width()) +
                             " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    if (is_png(bytes)) return decode_png(bytes);
    return decode_netpbm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_image(const Image& img, const std::filesystem::path& path, ImageFormat format) {
  switch (format) {
    case ImageFormat::Pgm:
      if (img.channels() != 1) throw UsageError("pgm requires a 1-channel image");
      write_file(path, encode_netpbm(img));
      return;
    case ImageFormat::Ppm:
      if (img.channels() != 3) throw UsageError("ppm requires a 3-channel image");
      write_file(path, encode_netpbm(img));
      return;
    case ImageFormat::Png:
      write_file(path, encode_png(img));
      return;
  }
}

}  // namespace dbench
