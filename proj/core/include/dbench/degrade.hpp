#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "dbench/image.hpp"

namespace dbench {

enum class FactorKind { Contrast, Brightness, MotionBlur, Resolution, Pose };

inline constexpr std::array<FactorKind, 5> kAllFactorKinds = {
    FactorKind::Contrast, FactorKind::Brightness, FactorKind::MotionBlur, FactorKind::Resolution, FactorKind::Pose};

/// Config/CSV spelling: contrast, brightness, motion_blur, resolution, pose.
std::string_view factor_name(FactorKind kind);
std::optional<FactorKind> parse_factor_kind(std::string_view name);

/// Raw level at which a factor leaves the image untouched.
double baseline_level(FactorKind kind);

struct SweepRange {
  double lo;
  double hi;
};

/// Admissible raw levels. Contrast [0.25, 4], brightness [-100, 100],
/// motion blur [0, 100], resolution [1, 100] percent, pose [-5, 5].
SweepRange sweep_range(FactorKind kind);

/// Maps a raw level onto [-1, 1] with the baseline at exactly 0.
/// Throws UsageError when raw lies outside sweep_range(kind).
double normalize(FactorKind kind, double raw);

/// A degradation factor at one level. The normalized level is always derived
/// from the raw one, so the two cannot disagree.
class DegradationFactor {
 public:
  DegradationFactor(FactorKind kind, double raw_level);

  FactorKind kind() const noexcept { return kind_; }
  double raw_level() const noexcept { return raw_; }
  double normalized_level() const noexcept { return normalized_; }
  bool is_baseline() const noexcept { return raw_ == baseline_level(kind_); }

  bool operator==(const DegradationFactor&) const = default;

 private:
  FactorKind kind_;
  double raw_;
  double normalized_;
};

/// g = min(255, |alpha * f + beta|), rounded half-up, per channel.
Image adjust_contrast_brightness(const Image& img, double alpha, double beta);

/// s x s kernel with a single row of ones at floor((s-1)/2), normalized to sum 1.
/// Stored row-major.
struct Kernel {
  int size;
  std::vector<double> weights;

  double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * size + col]; }
};

Kernel motion_blur_kernel(int s);

/// Maps an out-of-range index into [0, n) by reflection without repeating
/// the edge sample (... 2 1 | 0 1 2 ... n-1 | n-2 ...).
int reflect_index(int i, int n) noexcept;

/// Horizontal motion blur of strength s. The kernel's anchor is its ones row
/// and column floor((s-1)/2); borders reflect without repeating the edge.
/// s in {0, 1} returns the input unchanged.
Image motion_blur(const Image& img, int s);

/// Area-average down-sample to floor(W*scale/100) x floor(H*scale/100), then
/// nearest-neighbour up-sample back to W x H. scale_pct == 100 is the identity.
Image resample(const Image& img, double scale_pct);

/// Exact area average of one channel onto an out_w x out_h grid, as reals.
/// Works in both directions; each output cell averages the source area it covers.
std::vector<double> area_average(const Image& img, int channel, int out_w, int out_h);

/// Dispatches to the operator for the factor's kind. Pose edits come from
/// externally generated images and are rejected here.
Image apply(const Image& img, const DegradationFactor& factor);

}  // namespace dbench
