#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dbench/cohort.hpp"
#include "dbench/degrade.hpp"
#include "dbench/search.hpp"

namespace dbench {

/// Error rates for one set of counts. A rate is nullopt when its denominator
/// is zero; it is never reported as 0 in that case.
struct RatePoint {
  std::optional<double> fpr;
  std::optional<double> fnr;
  ConfusionCounts counts;
};

RatePoint rates(const ConfusionCounts& c);

/// Counts restricted to probes whose labels fall in `subgroup`; the gallery
/// is never restricted.
ConfusionCounts subgroup_counts(const Split& split, std::span<const MatchResult> results, const Subgroup& subgroup,
                                TallyMode mode = TallyMode::PerComparison);

RatePoint subgroup_rates(const Split& split, std::span<const MatchResult> results, const Subgroup& subgroup,
                         TallyMode mode = TallyMode::PerComparison);

struct Interval {
  double lo;
  double hi;
};

/// Linear-interpolation quantile of sorted data (position (n-1)p, 0-based).
double quantile_sorted(std::span<const double> sorted, double p);

/// Empirical percentile interval: the (1-level)/2 and 1-(1-level)/2
/// quantiles of the samples. Throws UsageError for fewer than 2 samples.
Interval confidence_interval(std::span<const double> samples, double level = 0.95);

enum class RateKind { Fpr, Fnr };

struct CurvePoint {
  FactorKind kind;
  double raw_level;
  double normalized_level;
  Subgroup subgroup;

  std::optional<double> fpr, fpr_lo, fpr_hi;
  std::optional<double> fnr, fnr_lo, fnr_hi;

  ConfusionCounts counts;            // summed over replications
  std::vector<double> fpr_samples;   // defined per-replication rates, replication order
  std::vector<double> fnr_samples;
  bool clamped = false;              // set when pose alignment clipped a value to [0, 1]

  std::optional<double> rate(RateKind k) const { return k == RateKind::Fpr ? fpr : fnr; }
};

/// Per-replication counts for one level; nullopt marks a missing run.
struct LevelSamples {
  double raw_level;
  std::vector<std::optional<ConfusionCounts>> replications;
};

/// Mean of the per-replication rates with a percentile interval, one point
/// per level, sorted by normalized level. Replications whose denominator is
/// zero are excluded from that rate's samples. Throws DataError listing
/// every (level, replication) gap, and UsageError when a level has fewer
/// than 2 replications.
std::vector<CurvePoint> assemble_curve(FactorKind kind, const Subgroup& subgroup, std::span<const LevelSamples> levels,
                                       double level = 0.95);

/// Shifts one rate of a pose curve so its psi = 0 point equals `baseline`.
/// The same offset moves point estimates and interval bounds; results are
/// clamped to [0, 1] and flagged. Throws UsageError without a psi = 0 point
/// or when the psi = 0 rate is undefined.
std::vector<CurvePoint> align_pose_curve(std::span<const CurvePoint> pose_curve, RateKind kind, double baseline);

}  // namespace dbench
