#include "dbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dbench/error.hpp"

namespace dbench {
namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

// Mean computed over sorted values so the result does not depend on the
// order replications arrive in.
double sorted_mean(std::span<const double> sorted) {
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return sum / static_cast<double>(sorted.size());
}

struct Summary {
  std::optional<double> point, lo, hi;
};

Summary summarize(std::vector<double> samples, double level) {
  Summary s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.point = sorted_mean(samples);
  if (samples.size() >= 2) {
    const auto ci = confidence_interval(samples, level);
    s.lo = ci.lo;
    s.hi = ci.hi;
  }
  return s;
}

}  // namespace

RatePoint rates(const ConfusionCounts& c) { return {ratio(c.fp, c.fp + c.tn), ratio(c.fn, c.fn + c.tp), c}; }

ConfusionCounts subgroup_counts(const Split& split, std::span<const MatchResult> results, const Subgroup& subgroup,
                                TallyMode mode) {
  if (results.size() != split.probes.size()) {
    throw UsageError("subgroup tally got " + std::to_string(results.size()) + " results for " +
                     std::to_string(split.probes.size()) + " probes");
  }
  const auto mates = mate_indices(split);
  ConfusionCounts total;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!subgroup.contains(split.probes[i].record.cell())) continue;
    total += tally_probe(results[i], split.gallery.size(), mates[i], mode);
  }
  return total;
}

RatePoint subgroup_rates(const Split& split, std::span<const MatchResult> results, const Subgroup& subgroup,
                         TallyMode mode) {
  return rates(subgroup_counts(split, results, subgroup, mode));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw UsageError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Interval confidence_interval(std::span<const double> samples, double level) {
  if (samples.size() < 2) {
    throw UsageError("confidence interval needs at least 2 samples, got " + std::to_string(samples.size()));
  }
  if (!(level > 0.0 && level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(sorted, tail), quantile_sorted(sorted, 1.0 - tail)};
}

std::vector<CurvePoint> assemble_curve(FactorKind kind, const Subgroup& subgroup, std::span<const LevelSamples> levels,
                                       double level) {
  std::ostringstream gaps;
  std::size_t gap_count = 0;
  for (const auto& l : levels) {
    if (l.replications.size() < 2) {
      throw UsageError("level " + std::to_string(l.raw_level) + " of " + std::string(factor_name(kind)) + " has " +
                       std::to_string(l.replications.size()) + " replication(s); intervals need at least 2");
    }
    for (std::size_t r = 0; r < l.replications.size(); ++r) {
      if (!l.replications[r]) {
        gaps << (gap_count++ ? ", " : "") << "(level " << l.raw_level << ", replication " << r << ")";
      }
    }
  }
  if (gap_count > 0) {
    throw DataError("incomplete " + std::string(factor_name(kind)) + " curve for " + subgroup.name() + ": missing " +
                    gaps.str());
  }

  std::vector<CurvePoint> curve;
  curve.reserve(levels.size());
  for (const auto& l : levels) {
    CurvePoint p{};
    p.kind = kind;
    p.raw_level = l.raw_level;
    p.normalized_level = normalize(kind, l.raw_level);
    p.subgroup = subgroup;
    for (const auto& c : l.replications) {
      p.counts += *c;
      const auto r = rates(*c);
      if (r.fpr) p.fpr_samples.push_back(*r.fpr);
      if (r.fnr) p.fnr_samples.push_back(*r.fnr);
    }
    const auto fpr = summarize(p.fpr_samples, level);
    const auto fnr = summarize(p.fnr_samples, level);
    p.fpr = fpr.point;
    p.fpr_lo = fpr.lo;
    p.fpr_hi = fpr.hi;
    p.fnr = fnr.point;
    p.fnr_lo = fnr.lo;
    p.fnr_hi = fnr.hi;
    curve.push_back(std::move(p));
  }
  std::stable_sort(curve.begin(), curve.end(),
                   [](const auto& a, const auto& b) { return a.normalized_level < b.normalized_level; });
  return curve;
}

std::vector<CurvePoint> align_pose_curve(std::span<const CurvePoint> pose_curve, RateKind kind, double baseline) {
  const auto zero = std::find_if(pose_curve.begin(), pose_curve.end(), [](const auto& p) { return p.raw_level == 0.0; });
  if (zero == pose_curve.end()) throw UsageError("pose curve has no psi = 0 point to align");
  const auto at_zero = zero->rate(kind);
  if (!at_zero) throw UsageError("pose curve rate at psi = 0 is undefined; cannot align");
  const double shift = baseline - *at_zero;

  std::vector<CurvePoint> out(pose_curve.begin(), pose_curve.end());
  for (auto& p : out) {
    auto move = [&](std::optional<double>& v) {
      if (!v) return;
      const double shifted = *v + shift;
      const double clamped = std::clamp(shifted, 0.0, 1.0);
      if (clamped != shifted) p.clamped = true;
      v = clamped;
    };
    if (kind == RateKind::Fpr) {
      move(p.fpr);
      move(p.fpr_lo);
      move(p.fpr_hi);
    } else {
      move(p.fnr);
      move(p.fnr_lo);
      move(p.fnr_hi);
    }
  }
  // The psi = 0 point lands on the baseline exactly, not baseline + rounding.
  for (auto& p : out) {
    if (p.raw_level != 0.0) continue;
    (kind == RateKind::Fpr ? p.fpr : p.fnr) = std::clamp(baseline, 0.0, 1.0);
  }
  return out;
}

}  // namespace dbench
