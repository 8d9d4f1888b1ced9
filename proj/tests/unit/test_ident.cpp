#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "dbench/cohort.hpp"
#include "dbench/degrade.hpp"
#include "dbench/emb1.hpp"
#include "dbench/embedding.hpp"
#include "dbench/error.hpp"
#include "dbench/search.hpp"

namespace {

using namespace dbench;

Image random_image(std::mt19937& gen, int w, int h, int ch, int lo = 0, int hi = 255) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * ch);
  for (auto& p : px) p = static_cast<std::uint8_t>(lo + static_cast<int>(gen() % (hi - lo + 1)));
  return Image(w, h, ch, std::move(px));
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

FaceRecord rec(const std::string& id, Race race = Race::White, Gender gender = Gender::Female) {
  return {id, id + ".png", race, gender, "20-29", {}};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back(v >> 24);
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::vector<std::uint8_t> header(std::uint32_t dim, std::uint32_t count) {
  std::vector<std::uint8_t> out = {'E', 'M', 'B', '1'};
  put_u32(out, dim);
  put_u32(out, count);
  return out;
}

TEST(Embedding, Invariants) {
  EXPECT_THROW(Embedding("a", {}), UsageError);
  EXPECT_THROW(Embedding("a", {0.0, 0.0}), UsageError);
  EXPECT_THROW(Embedding("a", {1.0, std::nan("")}), UsageError);
  EXPECT_THROW(Embedding("a", {INFINITY}), UsageError);
  EXPECT_EQ(Embedding("a", {0.0, 2.0}).dim(), 2u);
}

TEST(CosineDistance, Basics) {
  const Embedding v("v", {0.3, -1.2, 2.0});
  const Embedding neg("n", {-0.3, 1.2, -2.0});
  EXPECT_NEAR(cosine_distance(v, v), 0.0, 1e-15);
  EXPECT_NEAR(cosine_distance(v, neg), 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine_distance(Embedding("x", {1, 0}), Embedding("y", {0, 1})), 1.0);
  EXPECT_THROW(cosine_distance(v, Embedding("w", {1.0})), UsageError);
  // Scale does not matter.
  EXPECT_NEAR(cosine_distance(v, Embedding("s", {3.0, -12.0, 20.0})), 0.0, 1e-15);
}

TEST(BuiltinEmbed, UnitNormDeterministic) {
  std::mt19937 gen(1);
  for (int t = 0; t < 10; ++t) {
    const Image img = random_image(gen, 20 + t * 7, 17 + t * 3, t % 2 ? 3 : 1);
    const Embedding a = builtin_embed(img, "a"), b = builtin_embed(img, "a");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.dim(), static_cast<std::size_t>(kBuiltinGrid * kBuiltinGrid));
    EXPECT_NEAR(norm(a.values()), 1.0, 1e-9);
    EXPECT_EQ(cosine_distance(a, b), 0.0);
  }
}

TEST(BuiltinEmbed, ConstantImageIsE1) {
  const Embedding e = builtin_embed(Image::filled(40, 40, 3, 90));
  EXPECT_EQ(e.values()[0], 1.0);
  for (std::size_t i = 1; i < e.dim(); ++i) ASSERT_EQ(e.values()[i], 0.0);
}

TEST(BuiltinEmbed, CheckerboardVersusInverse) {
  std::vector<std::uint8_t> a(64 * 64), b(64 * 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      // 2x2 squares line up with the 32x32 grid, so the pattern survives averaging.
      const bool on = ((x / 2) + (y / 2)) % 2 == 0;
      a[y * 64 + x] = on ? 255 : 0;
      b[y * 64 + x] = on ? 0 : 255;
    }
  }
  EXPECT_NEAR(cosine_distance(builtin_embed(Image(64, 64, 1, a)), builtin_embed(Image(64, 64, 1, b))), 2.0, 1e-9);
}

TEST(BuiltinEmbed, BlurMovesTheEmbedding) {
  std::mt19937 gen(2);
  const Image img = random_image(gen, 100, 100, 1);
  EXPECT_GT(cosine_distance(builtin_embed(img), builtin_embed(motion_blur(img, 100))), 0.0);
}

TEST(BuiltinEmbed, BrightnessShiftInvariance) {
  std::mt19937 gen(3);
  const Image img = random_image(gen, 50, 45, 1, 40, 200);
  const Embedding a = builtin_embed(img), b = builtin_embed(adjust_contrast_brightness(img, 1.0, 37.0));
  for (std::size_t i = 0; i < a.dim(); ++i) ASSERT_NEAR(a.values()[i], b.values()[i], 1e-9);
}

TEST(BuiltinEmbed, MatchesDirectComputationOnGridMultiple) {
  // 64x64 grayscale: each grid cell is the plain mean of a 2x2 block.
  std::mt19937 gen(4);
  const Image img = random_image(gen, 64, 64, 1);
  std::vector<double> v(1024);
  for (int gy = 0; gy < 32; ++gy) {
    for (int gx = 0; gx < 32; ++gx) {
      double s = 0.0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) s += img.at(2 * gx + dx, 2 * gy + dy);
      v[gy * 32 + gx] = s / 4.0;
    }
  }
  double mean = 0.0;
  for (double x : v) mean += x / 1024.0;
  double n2 = 0.0;
  for (double& x : v) {
    x -= mean;
    n2 += x * x;
  }
  const Embedding e = builtin_embed(img);
  for (std::size_t i = 0; i < 1024; ++i) ASSERT_NEAR(e.values()[i], v[i] / std::sqrt(n2), 1e-12);
}

TEST(Emb1, EncodesByteExact) {
  const std::vector<Embedding> recs = {Embedding("ab", {1.0, -2.5}), Embedding("c", {0.0, 0.125})};
  std::vector<std::uint8_t> expect = header(2, 2);
  put_u32(expect, 2);
  expect.push_back('a');
  expect.push_back('b');
  put_f32(expect, 1.0f);
  put_f32(expect, -2.5f);
  put_u32(expect, 1);
  expect.push_back('c');
  put_f32(expect, 0.0f);
  put_f32(expect, 0.125f);
  EXPECT_EQ(emb1::encode(recs), expect);
  // 1.0f is 0x3f800000, little-endian.
  EXPECT_EQ(expect[18], 0x00);
  EXPECT_EQ(expect[21], 0x3f);
  EXPECT_EQ(emb1::decode(expect), recs);
}

TEST(Emb1, RoundTripThroughFile) {
  std::mt19937 gen(5);
  std::vector<Embedding> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(builtin_embed(random_image(gen, 40, 40, 1), "id" + std::to_string(i)));
  const auto path = std::filesystem::temp_directory_path() / "dbench_emb1_roundtrip.emb";
  emb1::write_file(path, recs);
  const auto back = emb1::read_file(path, 1024);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].id(), recs[i].id());
    for (std::size_t k = 0; k < 1024; ++k) {
      ASSERT_EQ(back[i].values()[k], static_cast<double>(static_cast<float>(recs[i].values()[k])));
    }
  }
  std::filesystem::remove(path);
}

TEST(Emb1, StrictReader) {
  auto good = header(1, 1);
  put_u32(good, 1);
  good.push_back('x');
  put_f32(good, 1.0f);
  EXPECT_NO_THROW(emb1::decode(good));

  auto bad_magic = good;
  bad_magic[3] = '2';
  EXPECT_THROW(emb1::decode(bad_magic), FormatError);

  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(emb1::decode(truncated), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(emb1::decode(trailing), FormatError);

  EXPECT_THROW(emb1::decode(good, 2u), FormatError);

  auto dup = header(1, 2);
  for (int i = 0; i < 2; ++i) {
    put_u32(dup, 1);
    dup.push_back('x');
    put_f32(dup, 1.0f);
  }
  EXPECT_THROW(emb1::decode(dup), FormatError);

  auto zero = header(1, 1);
  put_u32(zero, 1);
  zero.push_back('z');
  put_f32(zero, 0.0f);
  EXPECT_THROW(emb1::decode(zero), FormatError);

  auto nan = header(1, 1);
  put_u32(nan, 1);
  nan.push_back('n');
  put_f32(nan, std::nanf(""));
  EXPECT_THROW(emb1::decode(nan), FormatError);

  try {
    emb1::decode(truncated);
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 17"), std::string::npos) << e.what();
  }
}

TEST(Emb1, EncodeRejectsMixedDims) {
  const std::vector<Embedding> recs = {Embedding("a", {1.0}), Embedding("b", {1.0, 2.0})};
  EXPECT_THROW(emb1::encode(recs), UsageError);
}

TEST(Providers, SpecParsing) {
  EXPECT_TRUE(is_valid_provider_spec("builtin"));
  EXPECT_TRUE(is_valid_provider_spec("embeddings-file:/x.emb"));
  EXPECT_FALSE(is_valid_provider_spec("embeddings-file:"));
  EXPECT_FALSE(is_valid_provider_spec("arcface"));
  EXPECT_THROW(make_provider("arcface"), UsageError);
  EXPECT_THROW(make_provider("embeddings-file:/nonexistent/dbench.emb"), ProviderError);
  EXPECT_EQ(make_provider("builtin")->name(), "builtin");
}

TEST(Providers, FileProviderLooksUpByKey) {
  const auto path = std::filesystem::temp_directory_path() / "dbench_provider.emb";
  const std::vector<Embedding> recs = {Embedding("a", {1.0, 0.0}), Embedding("a__motion_blur_20", {0.0, 1.0})};
  emb1::write_file(path, recs);
  const auto provider = make_provider("embeddings-file:" + path.string());
  bool loaded = false;
  const auto e = provider->embed({"a__motion_blur_20", [&] {
                                    loaded = true;
                                    return Image::filled(1, 1, 1, 0);
                                  }});
  EXPECT_FALSE(loaded);
  EXPECT_EQ(e.values()[1], 1.0);
  EXPECT_THROW(provider->embed({"missing", [] { return Image::filled(1, 1, 1, 0); }}), ProviderError);

  std::ofstream(path, std::ios::binary | std::ios::trunc) << "garbage";
  EXPECT_THROW(FileProvider{path}, ProviderError);
  std::filesystem::remove(path);
}

TEST(Search, ExactMatchAndOrthogonal) {
  const std::vector<Embedding> gallery = {Embedding("g0", {1, 0, 0}), Embedding("g1", {0, 1, 0}),
                                          Embedding("g2", {0, 0, 1})};
  const auto r = search_1_to_n(Embedding("p", {0, 1, 0}), gallery, 0.5);
  EXPECT_EQ(r.matched, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.matched_ids(std::vector<FaceRecord>{rec("g0"), rec("g1"), rec("g2")}),
            (std::vector<std::string>{"g1"}));
  EXPECT_EQ(r.distances.size(), 3u);
  const std::vector<Embedding> other = {Embedding("o", {1, -1, 0})};
  EXPECT_TRUE(search_1_to_n(Embedding("q", {1, 1, 1}), other, 0.5).matched.empty());
  EXPECT_THROW(search_1_to_n(Embedding("p", {1}), std::span<const Embedding>{}, 0.5), UsageError);
}

TEST(Search, BoundaryIsInclusive) {
  // Planar rotations with cosines 0.8, 0.32, 0.1 give distances 0.2, 0.68, 0.9.
  std::vector<Embedding> gallery;
  for (double c : {0.8, 0.32, 0.1}) gallery.emplace_back("g", std::vector<double>{c, std::sqrt(1 - c * c)});
  const auto r = search_1_to_n(Embedding("p", {1, 0}), gallery, 0.68);
  EXPECT_NEAR(r.distances[0], 0.2, 1e-12);
  EXPECT_NEAR(r.distances[1], 0.68, 1e-12);
  EXPECT_NEAR(r.distances[2], 0.9, 1e-12);
  EXPECT_EQ(r.matched, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(match_from_distances("p", {0.68}, 0.68).is_match(0));
  EXPECT_FALSE(match_from_distances("p", {std::nextafter(0.68, 1.0)}, 0.68).is_match(0));
}

Split default_shape_split() {
  Split s;
  for (int i = 0; i < 167; ++i) s.gallery.push_back(rec("g" + std::to_string(1000 + i)));
  for (int i = 0; i < 83; ++i) s.probes.push_back({s.gallery[i * 2], true});
  for (int i = 0; i < 84; ++i) s.probes.push_back({rec("t" + std::to_string(1000 + i)), false});
  return s;
}

std::vector<MatchResult> results_for(const Split& s, double mate_d, double other_d, double t) {
  std::vector<MatchResult> out;
  for (const auto& p : s.probes) {
    std::vector<double> d(s.gallery.size(), other_d);
    for (std::size_t j = 0; j < s.gallery.size(); ++j) {
      if (s.gallery[j].id == p.record.id) d[j] = mate_d;
    }
    out.push_back(match_from_distances(p.record.id, d, t));
  }
  return out;
}

TEST(Tally, DefaultSplitArithmetic) {
  const Split s = default_shape_split();
  EXPECT_EQ(tally(s, results_for(s, 0.0, 0.9, 0.68)), (ConfusionCounts{83, 0, 27806, 0}));
  EXPECT_EQ(tally(s, results_for(s, 0.0, 0.9, 2.0)), (ConfusionCounts{83, 27806, 0, 0}));
  EXPECT_EQ(tally(s, results_for(s, 0.0, 0.9, -1.0)), (ConfusionCounts{0, 0, 27806, 83}));
  EXPECT_EQ(84 * 167 + 83 * 166, 27806);
}

TEST(Tally, PerProbeMode) {
  const Split s = default_shape_split();
  // Every probe gets exactly one nonmate outcome; TP probes also one mate outcome.
  EXPECT_EQ(tally(s, results_for(s, 0.0, 0.9, 0.68), TallyMode::PerProbe), (ConfusionCounts{83, 0, 167, 0}));
  EXPECT_EQ(tally(s, results_for(s, 0.0, 0.5, 0.68), TallyMode::PerProbe), (ConfusionCounts{83, 167, 0, 0}));
  EXPECT_EQ(parse_tally_mode(tally_mode_name(TallyMode::PerProbe)), TallyMode::PerProbe);
  EXPECT_FALSE(parse_tally_mode("rank-1"));
}

TEST(Tally, Errors) {
  const Split s = default_shape_split();
  auto results = results_for(s, 0.0, 0.9, 0.68);
  results.pop_back();
  EXPECT_THROW(tally(s, results), UsageError);
  results = results_for(s, 0.0, 0.9, 0.68);
  std::swap(results[0], results[1]);
  EXPECT_THROW(tally(s, results), UsageError);
  Split broken = s;
  broken.probes[0].record = rec("nobody");
  EXPECT_THROW(mate_indices(broken), UsageError);
}

ConfusionCounts brute_force(const Split& s, const std::vector<std::vector<double>>& d, double t) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < s.probes.size(); ++i) {
    for (std::size_t j = 0; j < s.gallery.size(); ++j) {
      const bool mate = s.probes[i].record.id == s.gallery[j].id;
      const bool match = d[i][j] <= t;
      if (mate) {
        (match ? c.tp : c.fn)++;
      } else {
        (match ? c.fp : c.tn)++;
      }
    }
  }
  return c;
}

TEST(Tally, MatchesBruteForceAndIsMonotone) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Split s;
    const std::size_t g = 1 + gen() % 10;
    for (std::size_t j = 0; j < g; ++j) s.gallery.push_back(rec("g" + std::to_string(j)));
    const std::size_t tp = gen() % (g + 1), ta = gen() % 6;
    for (std::size_t i = 0; i < tp; ++i) s.probes.push_back({s.gallery[(i * 7) % g], true});
    for (std::size_t i = 0; i < ta; ++i) s.probes.push_back({rec("t" + std::to_string(i)), false});
    std::vector<std::vector<double>> d(s.probes.size(), std::vector<double>(g));
    for (auto& row : d)
      for (auto& v : row) v = u(gen);
    ConfusionCounts prev{};
    bool first = true;
    for (double t : {-0.1, 0.3, 0.68, 1.0, 1.7, 2.0}) {
      std::vector<MatchResult> results;
      for (std::size_t i = 0; i < s.probes.size(); ++i) results.push_back(match_from_distances(s.probes[i].record.id, d[i], t));
      const auto c = tally(s, results);
      ASSERT_EQ(c, brute_force(s, d, t)) << "trial " << trial << " t " << t;
      if (!first) {
        EXPECT_GE(c.tp, prev.tp);
        EXPECT_GE(c.fp, prev.fp);
        EXPECT_LE(c.tn, prev.tn);
        EXPECT_LE(c.fn, prev.fn);
      }
      prev = c;
      first = false;
    }
  }
}

}  // namespace
