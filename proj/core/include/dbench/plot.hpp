#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "dbench/metrics.hpp"

namespace dbench {

/// Standalone SVG of one rate against normalized level: one series per
/// subgroup (first-appearance order), CI error bars, and a dashed rule at
/// the baseline x = 0. Points with an undefined rate are left out and the
/// legend says how many. Throws UsageError for an empty curve.
std::string render_plot_svg(std::span<const CurvePoint> curve, RateKind rate, const std::string& title);

void emit_plot(std::span<const CurvePoint> curve, RateKind rate, const std::filesystem::path& path,
               const std::string& title);

/// Writes <factor>_<fpr|fnr>.svg for every factor in `curves` into `dir`.
std::vector<std::filesystem::path> emit_all_plots(std::span<const CurvePoint> curves, const std::filesystem::path& dir);

}  // namespace dbench
