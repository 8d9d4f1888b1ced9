#include "dbench/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "dbench/error.hpp"

namespace dbench {
namespace {

std::uint8_t round_clamp(double v) {
  const double r = std::floor(v + 0.5);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

// Exact round-half-up of num/den for num >= 0, den > 0.
std::int64_t round_ratio(std::int64_t num, std::int64_t den) { return (2 * num + den) / (2 * den); }

// Coverage of output cell k over source cells, in units where one source
// pixel has length `out_n` and one output cell has length `in_n`.
struct Span1D {
  int first;
  std::vector<std::int64_t> weights;
};

std::vector<Span1D> coverage(int in_n, int out_n) {
  std::vector<Span1D> spans(static_cast<std::size_t>(out_n));
  for (int k = 0; k < out_n; ++k) {
    const std::int64_t lo = static_cast<std::int64_t>(k) * in_n;
    const std::int64_t hi = lo + in_n;
    const int first = static_cast<int>(lo / out_n);
    const int last = static_cast<int>((hi - 1) / out_n);
    auto& span = spans[static_cast<std::size_t>(k)];
    span.first = first;
    for (int i = first; i <= last; ++i) {
      const std::int64_t s_lo = static_cast<std::int64_t>(i) * out_n;
      const std::int64_t s_hi = s_lo + out_n;
      span.weights.push_back(std::min(hi, s_hi) - std::max(lo, s_lo));
    }
  }
  return spans;
}

// Integer numerators N such that the area mean of output cell (x, y) is
// N / (in_w * in_h).
std::vector<std::int64_t> area_numerators(const Image& img, int channel, int out_w, int out_h) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  const auto px = img.pixels();
  const auto cols = coverage(w, out_w);
  const auto rows = coverage(h, out_h);

  // Horizontal pass: per source row, per output column.
  std::vector<std::int64_t> horiz(static_cast<std::size_t>(h) * out_w);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < out_w; ++x) {
      const auto& span = cols[static_cast<std::size_t>(x)];
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < span.weights.size(); ++k) {
        acc += span.weights[k] * px[(row + span.first + k) * ch + channel];
      }
      horiz[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }

  std::vector<std::int64_t> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto& span = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < span.weights.size(); ++k) {
        acc += span.weights[k] * horiz[(span.first + k) * out_w + x];
      }
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

}  // namespace

std::string_view factor_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::Contrast:
      return "contrast";
    case FactorKind::Brightness:
      return "brightness";
    case FactorKind::MotionBlur:
      return "motion_blur";
    case FactorKind::Resolution:
      return "resolution";
    case FactorKind::Pose:
      return "pose";
  }
  return "";
}

std::optional<FactorKind> parse_factor_kind(std::string_view name) {
  for (auto kind : kAllFactorKinds) {
    if (factor_name(kind) == name) return kind;
  }
  return std::nullopt;
}

double baseline_level(FactorKind kind) {
  switch (kind) {
    case FactorKind::Contrast:
      return 1.0;
    case FactorKind::Resolution:
      return 100.0;
    default:
      return 0.0;
  }
}

SweepRange sweep_range(FactorKind kind) {
  switch (kind) {
    case FactorKind::Contrast:
      return {0.25, 4.0};
    case FactorKind::Brightness:
      return {-100.0, 100.0};
    case FactorKind::MotionBlur:
      return {0.0, 100.0};
    case FactorKind::Resolution:
      return {1.0, 100.0};
    case FactorKind::Pose:
      return {-5.0, 5.0};
  }
  return {0.0, 0.0};
}

double normalize(FactorKind kind, double raw) {
  const auto range = sweep_range(kind);
  if (!(raw >= range.lo && raw <= range.hi)) {
    throw UsageError(std::string(factor_name(kind)) + " level " + std::to_string(raw) + " outside [" +
                     std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
  }
  switch (kind) {
    case FactorKind::Contrast:
      return raw < 1.0 ? (raw - 1.0) / 0.75 : (raw - 1.0) / 3.0;
    case FactorKind::Brightness:
      return raw / 100.0;
    case FactorKind::MotionBlur:
      return raw / 100.0;
    case FactorKind::Resolution:
      return (raw - 100.0) / 99.0;
    case FactorKind::Pose:
      return raw / 5.0;
  }
  return 0.0;
}

DegradationFactor::DegradationFactor(FactorKind kind, double raw_level)
    : kind_(kind), raw_(raw_level), normalized_(normalize(kind, raw_level)) {}

Image adjust_contrast_brightness(const Image& img, double alpha, double beta) {
  if (!(alpha > 0.0)) throw UsageError("contrast alpha must be > 0, got " + std::to_string(alpha));
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw UsageError("contrast/brightness must be finite");
  std::array<std::uint8_t, 256> lut{};
  for (int p = 0; p < 256; ++p) lut[static_cast<std::size_t>(p)] = round_clamp(std::fabs(alpha * p + beta));
  const auto src = img.pixels();
  std::vector<std::uint8_t> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = lut[src[i]];
  return Image(img.width(), img.height(), img.channels(), std::move(out));
}

Kernel motion_blur_kernel(int s) {
  if (s < 1) throw UsageError("motion blur kernel size must be >= 1, got " + std::to_string(s));
  Kernel k{s, std::vector<double>(static_cast<std::size_t>(s) * s, 0.0)};
  const int row = (s - 1) / 2;
  for (int j = 0; j < s; ++j) k.weights[static_cast<std::size_t>(row) * s + j] = 1.0;
  double sum = 0.0;
  for (double w : k.weights) sum += w;
  for (double& w : k.weights) w /= sum;
  return k;
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

Image motion_blur(const Image& img, int s) {
  if (s < 0) throw UsageError("motion blur strength must be >= 0, got " + std::to_string(s));
  if (s <= 1) return img;
  if (s > kMaxImageDimension) throw UsageError("motion blur strength exceeds maximum image dimension");

  // The kernel is a single row of 1/s at the anchor row, so the 2-D
  // correlation reduces to a horizontal box sum over offsets [-a, s-1-a].
  // Sums of 8-bit values are exact in integers; rounding the exact ratio
  // gives the real-arithmetic result without accumulation error.
  const int w = img.width(), h = img.height(), ch = img.channels();
  const int anchor = (s - 1) / 2;
  const auto src = img.pixels();
  std::vector<std::uint8_t> out(src.size());
  std::vector<int> taps(static_cast<std::size_t>(w + s - 1));
  for (int e = 0; e < w + s - 1; ++e) taps[static_cast<std::size_t>(e)] = reflect_index(e - anchor, w);
  std::vector<std::int64_t> prefix(taps.size() + 1);

  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int c = 0; c < ch; ++c) {
      prefix[0] = 0;
      for (std::size_t e = 0; e < taps.size(); ++e) {
        prefix[e + 1] = prefix[e] + src[(row + taps[e]) * ch + c];
      }
      for (int x = 0; x < w; ++x) {
        const std::int64_t sum = prefix[static_cast<std::size_t>(x + s)] - prefix[static_cast<std::size_t>(x)];
        out[(row + x) * ch + c] = static_cast<std::uint8_t>(round_ratio(sum, s));
      }
    }
  }
  return Image(w, h, ch, std::move(out));
}

std::vector<double> area_average(const Image& img, int channel, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw UsageError("area_average target must be at least 1x1");
  if (channel < 0 || channel >= img.channels()) throw UsageError("area_average channel out of range");
  const auto num = area_numerators(img, channel, out_w, out_h);
  const double den = static_cast<double>(img.width()) * img.height();
  std::vector<double> out(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) out[i] = static_cast<double>(num[i]) / den;
  return out;
}

Image resample(const Image& img, double scale_pct) {
  if (!(scale_pct > 0.0 && scale_pct <= 100.0)) {
    throw UsageError("resolution scale must be in (0, 100], got " + std::to_string(scale_pct));
  }
  if (scale_pct == 100.0) return img;
  const int w = img.width(), h = img.height(), ch = img.channels();
  const int small_w = static_cast<int>(std::floor(w * scale_pct / 100.0));
  const int small_h = static_cast<int>(std::floor(h * scale_pct / 100.0));
  if (small_w < 1 || small_h < 1) {
    throw UsageError("resolution scale " + std::to_string(scale_pct) + "% of " + std::to_string(w) + "x" +
                     std::to_string(h) + " is smaller than one pixel");
  }

  const std::int64_t den = static_cast<std::int64_t>(w) * h;
  std::vector<std::uint8_t> small(static_cast<std::size_t>(small_w) * small_h * ch);
  for (int c = 0; c < ch; ++c) {
    const auto num = area_numerators(img, c, small_w, small_h);
    for (std::size_t i = 0; i < num.size(); ++i) small[i * ch + c] = static_cast<std::uint8_t>(round_ratio(num[i], den));
  }

  std::vector<std::uint8_t> out(img.size());
  for (int y = 0; y < h; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * small_h / h);
    for (int x = 0; x < w; ++x) {
      const int sx = static_cast<int>(static_cast<std::int64_t>(x) * small_w / w);
      for (int c = 0; c < ch; ++c) {
        out[(static_cast<std::size_t>(y) * w + x) * ch + c] =
            small[(static_cast<std::size_t>(sy) * small_w + sx) * ch + c];
      }
    }
  }
  return Image(w, h, ch, std::move(out));
}

Image apply(const Image& img, const DegradationFactor& factor) {
  switch (factor.kind()) {
    case FactorKind::Contrast:
      return adjust_contrast_brightness(img, factor.raw_level(), 0.0);
    case FactorKind::Brightness:
      return adjust_contrast_brightness(img, 1.0, factor.raw_level());
    case FactorKind::MotionBlur: {
      const double s = factor.raw_level();
      if (s != std::floor(s)) throw UsageError("motion blur strength must be an integer, got " + std::to_string(s));
      return motion_blur(img, static_cast<int>(s));
    }
    case FactorKind::Resolution:
      return resample(img, factor.raw_level());
    case FactorKind::Pose:
      throw UsageError(
          "pose edits cannot be synthesized; supply pose-edited images through the manifest's pose_psi/pose_path "
          "columns");
  }
  throw UsageError("unknown degradation factor");
}

}  // namespace dbench
