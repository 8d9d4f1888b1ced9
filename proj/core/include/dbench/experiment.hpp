#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dbench/cohort.hpp"
#include "dbench/degrade.hpp"
#include "dbench/image_io.hpp"
#include "dbench/metrics.hpp"
#include "dbench/search.hpp"

namespace dbench {

struct FactorSweep {
  FactorKind kind;
  std::vector<double> levels;

  bool operator==(const FactorSweep&) const = default;
};

/// contrast 0.25..4, brightness 0..100, blur 0..100 step 20, resolution
/// 1..100% doubling, pose -5..5.
std::vector<FactorSweep> default_sweeps();

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "out";
  SplitPlan plan;
  TargetDistribution target = TargetDistribution::us_census_2020();
  double threshold = kDefaultThreshold;
  TallyMode tally = TallyMode::PerComparison;
  std::vector<FactorSweep> sweeps = default_sweeps();
  std::string provider = "builtin";
  std::vector<Subgroup> subgroups = default_subgroups();
  bool plots = false;
  std::size_t threads = 0;  // 0 = hardware concurrency
  double confidence = 0.95;
  ImageFormat image_format = ImageFormat::Png;  // format of images written by `degrade`

  /// Throws UsageError naming the first violated constraint.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// JSON round trip. Relative paths in a parsed document resolve against
/// `base_dir`; unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// Shortest decimal that round-trips, e.g. 0.25, 100, -2.
std::string format_level(double v);

/// Embedding/file key of a probe image. Non-pose baselines share the clean
/// image's key (the record id); everything else is "<id>__<factor>_<level>".
std::string treatment_key(const std::string& id, const DegradationFactor& factor);

/// Loads the record's image for a treatment: the clean image degraded by the
/// factor, or the externally supplied pose variant.
Image load_treated_image(const FaceRecord& record, const DegradationFactor& factor);

struct RunResult {
  std::filesystem::path output_dir;
  std::vector<CurvePoint> curves;  // in curves.csv row order
  std::vector<std::string> warnings;
};

using LogFn = std::function<void(std::string_view)>;

/// Runs every replication x factor x level, then writes curves.csv,
/// counts.csv, config-echo.json (and pose_alignment.csv / SVG plots when
/// applicable) into cfg.output_dir. Output is a deterministic function of
/// the config, independent of thread count. Nothing is left behind on failure.
RunResult run_experiment(const ExperimentConfig& cfg, const LogFn& log = {});

inline constexpr std::string_view kCurvesHeader =
    "factor,raw_level,normalized_level,subgroup,fpr,fpr_lo,fpr_hi,fnr,fnr_lo,fnr_hi,tp,fp,tn,fn";

std::string curves_to_csv(std::span<const CurvePoint> curves);
/// Inverse of curves_to_csv (per-replication samples are not stored).
std::vector<CurvePoint> parse_curves_csv(std::string_view text);

}  // namespace dbench
