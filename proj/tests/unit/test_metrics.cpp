#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dbench/error.hpp"
#include "dbench/metrics.hpp"

namespace {

using namespace dbench;

FaceRecord rec(const std::string& id, Race race, Gender gender) { return {id, id + ".png", race, gender, "30-39", {}}; }

TEST(Rates, Formulas) {
  const auto a = rates({0, 1, 3, 0});
  ASSERT_TRUE(a.fpr);
  EXPECT_DOUBLE_EQ(*a.fpr, 0.25);
  EXPECT_FALSE(a.fnr);
  const auto b = rates({83, 0, 0, 0});
  ASSERT_TRUE(b.fnr);
  EXPECT_EQ(*b.fnr, 0.0);
  EXPECT_FALSE(b.fpr);
  EXPECT_DOUBLE_EQ(*rates({1, 0, 0, 3}).fnr, 0.75);
}

// Gallery: a (White-F), b (Black-F), c (Black-M). Probes: a, b present; x (Black-F), y (Asian-M) absent.
struct Fixture {
  Split split;
  std::vector<MatchResult> results;

  Fixture() {
    split.gallery = {rec("a", Race::White, Gender::Female), rec("b", Race::Black, Gender::Female),
                     rec("c", Race::Black, Gender::Male)};
    split.probes = {{split.gallery[0], true},
                    {split.gallery[1], true},
                    {rec("x", Race::Black, Gender::Female), false},
                    {rec("y", Race::Asian, Gender::Male), false}};
    const double t = 0.5;
    results = {match_from_distances("a", {0.1, 0.9, 0.4}, t), match_from_distances("b", {0.9, 0.7, 0.2}, t),
               match_from_distances("x", {0.3, 0.1, 0.9}, t), match_from_distances("y", {0.9, 0.9, 0.9}, t)};
  }
};

TEST(SubgroupRates, HandTalliedBlackFemale) {
  const Fixture f;
  // Probe b: mate missed (fn 1), nonmates a miss (tn), c hit (fp). Probe x: a hit, b hit, c miss.
  const auto c = subgroup_counts(f.split, f.results, *parse_subgroup("Black-Female"));
  EXPECT_EQ(c, (ConfusionCounts{0, 3, 2, 1}));
  const auto r = subgroup_rates(f.split, f.results, *parse_subgroup("Black-Female"));
  EXPECT_DOUBLE_EQ(*r.fpr, 0.6);
  EXPECT_DOUBLE_EQ(*r.fnr, 1.0);
}

TEST(SubgroupRates, AllEqualsUnrestrictedAndPartitionAdds) {
  const Fixture f;
  const auto all = subgroup_counts(f.split, f.results, Subgroup::all());
  EXPECT_EQ(all, tally(f.split, f.results));
  ConfusionCounts sum;
  for (std::size_t c = 0; c < kCellCount; ++c) {
    const Cell cell = Cell::from_index(c);
    sum += subgroup_counts(f.split, f.results, Subgroup{cell.race, cell.gender});
  }
  EXPECT_EQ(sum, all);
  const auto empty = subgroup_rates(f.split, f.results, *parse_subgroup("Asian-Female"));
  EXPECT_FALSE(empty.fpr);
  EXPECT_FALSE(empty.fnr);
}

TEST(Quantile, InterpolatesOrderStatistics) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
}

TEST(ConfidenceInterval, HundredEvenSamples) {
  std::vector<double> s;
  for (int i = 100; i >= 1; --i) s.push_back(i / 100.0);
  // Position (n - 1) p: 99 * 0.025 = 2.475 -> 0.03 + 0.475 * 0.01; 99 * 0.975 = 96.525 -> 0.97 + 0.525 * 0.01.
  const auto ci = confidence_interval(s);
  EXPECT_NEAR(ci.lo, 0.03475, 1e-12);
  EXPECT_NEAR(ci.hi, 0.97525, 1e-12);
}

TEST(ConfidenceInterval, DegenerateAndBounds) {
  const std::vector<double> same(50, 0.3);
  const auto ci = confidence_interval(same);
  EXPECT_DOUBLE_EQ(ci.lo, 0.3);
  EXPECT_DOUBLE_EQ(ci.hi, 0.3);
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(2 + gen() % 40);
    for (auto& v : s) v = u(gen);
    const auto c = confidence_interval(s);
    EXPECT_GE(c.lo, *std::min_element(s.begin(), s.end()));
    EXPECT_LE(c.hi, *std::max_element(s.begin(), s.end()));
    EXPECT_LE(c.lo, c.hi);
  }
  EXPECT_THROW(confidence_interval(std::vector<double>{0.1}), UsageError);
  EXPECT_THROW(confidence_interval(std::vector<double>{0.1, 0.2}, 1.0), UsageError);
}

std::vector<LevelSamples> blur_levels(std::size_t reps, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<LevelSamples> out;
  for (double level : {100.0, 0.0, 40.0}) {
    LevelSamples ls{level, {}};
    for (std::size_t r = 0; r < reps; ++r) {
      const std::uint64_t fn = gen() % 84;
      const std::uint64_t fp = gen() % 50;
      ls.replications.push_back(ConfusionCounts{83 - fn, fp, 27806 - fp, fn});
    }
    out.push_back(std::move(ls));
  }
  return out;
}

TEST(AssembleCurve, MeanIntervalAndOrder) {
  const auto levels = blur_levels(16, 3);
  const auto curve = assemble_curve(FactorKind::MotionBlur, Subgroup::all(), levels);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0].raw_level, 0.0);
  EXPECT_EQ(curve[1].raw_level, 40.0);
  EXPECT_EQ(curve[2].raw_level, 100.0);
  for (const auto& p : curve) {
    const auto& src = *std::find_if(levels.begin(), levels.end(), [&](auto& l) { return l.raw_level == p.raw_level; });
    std::vector<double> fnr;
    ConfusionCounts total;
    for (const auto& c : src.replications) {
      fnr.push_back(static_cast<double>(c->fn) / 83.0);
      total += *c;
    }
    EXPECT_NEAR(*p.fnr, std::accumulate(fnr.begin(), fnr.end(), 0.0) / fnr.size(), 1e-12);
    const auto ci = confidence_interval(fnr);
    EXPECT_EQ(*p.fnr_lo, ci.lo);
    EXPECT_EQ(*p.fnr_hi, ci.hi);
    EXPECT_LE(*p.fnr_lo, *p.fnr);
    EXPECT_LE(*p.fnr, *p.fnr_hi);
    EXPECT_LE(*p.fpr_lo, *p.fpr);
    EXPECT_LE(*p.fpr, *p.fpr_hi);
    EXPECT_EQ(p.counts, total);
    EXPECT_EQ(p.fnr_samples.size(), 16u);
    EXPECT_EQ(p.normalized_level, normalize(FactorKind::MotionBlur, p.raw_level));
  }
}

TEST(AssembleCurve, PermutationInvariant) {
  auto levels = blur_levels(32, 4);
  const auto a = assemble_curve(FactorKind::MotionBlur, Subgroup::all(), levels);
  std::mt19937 gen(1);
  for (auto& l : levels) std::shuffle(l.replications.begin(), l.replications.end(), gen);
  const auto b = assemble_curve(FactorKind::MotionBlur, Subgroup::all(), levels);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].fpr, b[i].fpr);
    EXPECT_EQ(a[i].fnr, b[i].fnr);
    EXPECT_EQ(a[i].fpr_lo, b[i].fpr_lo);
    EXPECT_EQ(a[i].fnr_hi, b[i].fnr_hi);
    EXPECT_EQ(a[i].counts, b[i].counts);
  }
}

TEST(AssembleCurve, IdenticalReplicationsGiveZeroWidth) {
  std::vector<LevelSamples> levels = {{0.0, std::vector<std::optional<ConfusionCounts>>(8, ConfusionCounts{80, 5, 95, 3})}};
  const auto p = assemble_curve(FactorKind::MotionBlur, Subgroup::all(), levels).at(0);
  EXPECT_EQ(*p.fpr_lo, *p.fpr_hi);
  EXPECT_EQ(*p.fnr_lo, *p.fnr_hi);
  EXPECT_DOUBLE_EQ(*p.fpr, 0.05);
}

TEST(AssembleCurve, UndefinedRatesStayUndefined) {
  std::vector<LevelSamples> levels = {{0.0, {ConfusionCounts{0, 1, 1, 0}, ConfusionCounts{0, 0, 2, 0}}}};
  const auto p = assemble_curve(FactorKind::MotionBlur, Subgroup::all(), levels).at(0);
  EXPECT_FALSE(p.fnr);
  EXPECT_FALSE(p.fnr_lo);
  EXPECT_DOUBLE_EQ(*p.fpr, 0.25);
}

TEST(AssembleCurve, Errors) {
  std::vector<LevelSamples> one = {{0.0, {ConfusionCounts{1, 1, 1, 1}}}};
  EXPECT_THROW(assemble_curve(FactorKind::MotionBlur, Subgroup::all(), one), UsageError);
  std::vector<LevelSamples> gaps = {{0.0, {ConfusionCounts{1, 1, 1, 1}, std::nullopt}},
                                    {20.0, {std::nullopt, ConfusionCounts{1, 1, 1, 1}}}};
  try {
    assemble_curve(FactorKind::MotionBlur, Subgroup::all(), gaps);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("replication 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("level 20"), std::string::npos) << msg;
  }
}

CurvePoint pose_point(double psi, double fnr, double lo, double hi) {
  CurvePoint p{};
  p.kind = FactorKind::Pose;
  p.raw_level = psi;
  p.normalized_level = psi / 5.0;
  p.subgroup = Subgroup::all();
  p.fnr = fnr;
  p.fnr_lo = lo;
  p.fnr_hi = hi;
  p.fpr = 0.5;
  return p;
}

TEST(AlignPose, ShiftsToBaseline) {
  const std::vector<CurvePoint> curve = {pose_point(0, 0.10, 0.08, 0.12), pose_point(5, 0.20, 0.15, 0.25)};
  const auto out = align_pose_curve(curve, RateKind::Fnr, 0.04);
  EXPECT_EQ(*out[0].fnr, 0.04);
  EXPECT_NEAR(*out[1].fnr, 0.14, 1e-15);
  EXPECT_NEAR(*out[1].fnr_lo, 0.09, 1e-15);
  EXPECT_NEAR(*out[0].fnr_hi, 0.06, 1e-15);
  EXPECT_EQ(*out[1].fpr, 0.5) << "the other rate is untouched";
  EXPECT_FALSE(out[1].clamped);
}

TEST(AlignPose, ZeroShiftIsIdentity) {
  const std::vector<CurvePoint> curve = {pose_point(-1, 0.3, 0.2, 0.4), pose_point(0, 0.1, 0.05, 0.15)};
  const auto out = align_pose_curve(curve, RateKind::Fnr, 0.1);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    EXPECT_EQ(out[i].fnr, curve[i].fnr);
    EXPECT_EQ(out[i].fnr_lo, curve[i].fnr_lo);
  }
}

TEST(AlignPose, ClampsWithFlag) {
  const std::vector<CurvePoint> curve = {pose_point(0, 0.30, 0.25, 0.35), pose_point(3, 0.05, 0.0, 0.1)};
  const auto out = align_pose_curve(curve, RateKind::Fnr, 0.1);
  EXPECT_EQ(*out[1].fnr, 0.0);
  EXPECT_EQ(*out[1].fnr_lo, 0.0);
  EXPECT_TRUE(out[1].clamped);
  EXPECT_FALSE(out[0].clamped);
}

TEST(AlignPose, Errors) {
  EXPECT_THROW(align_pose_curve(std::vector<CurvePoint>{pose_point(1, 0.1, 0.1, 0.1)}, RateKind::Fnr, 0.1),
               UsageError);
  auto undefined = pose_point(0, 0.1, 0.1, 0.1);
  undefined.fnr.reset();
  EXPECT_THROW(align_pose_curve(std::vector<CurvePoint>{undefined}, RateKind::Fnr, 0.1), UsageError);
}

}  // namespace
