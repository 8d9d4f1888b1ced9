#include <benchmark/benchmark.h>

#include <random>

#include "dbench/degrade.hpp"
#include "dbench/embedding.hpp"
#include "dbench/search.hpp"

namespace {

using namespace dbench;

Image noise(int w, int h, int channels, unsigned seed = 1) {
  std::mt19937 gen(seed);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * channels);
  for (auto& p : px) p = static_cast<std::uint8_t>(gen());
  return Image(w, h, channels, std::move(px));
}

void BM_ContrastBrightness(benchmark::State& state) {
  const Image img = noise(256, 256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(adjust_contrast_brightness(img, 1.5, 20));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_ContrastBrightness);

// Cost should stay flat in s: the blur is a running box sum.
void BM_MotionBlur(benchmark::State& state) {
  const Image img = noise(256, 256, 3);
  const int s = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(motion_blur(img, s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_MotionBlur)->Arg(3)->Arg(21)->Arg(101);

void BM_Resample(benchmark::State& state) {
  const Image img = noise(256, 256, 3);
  const double scale = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(resample(img, scale));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_Resample)->Arg(1)->Arg(33)->Arg(64);

void BM_BuiltinEmbed(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Image img = noise(side, side, 3);
  for (auto _ : state) benchmark::DoNotOptimize(builtin_embed(img));
}
BENCHMARK(BM_BuiltinEmbed)->Arg(100)->Arg(512);

std::vector<Embedding> gallery_of(std::size_t n) {
  std::vector<Embedding> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(builtin_embed(noise(64, 64, 1, static_cast<unsigned>(i + 7))));
  return g;
}

void BM_Search(benchmark::State& state) {
  const auto gallery = gallery_of(static_cast<std::size_t>(state.range(0)));
  const Embedding probe = builtin_embed(noise(64, 64, 1, 3));
  for (auto _ : state) benchmark::DoNotOptimize(search_1_to_n(probe, gallery, kDefaultThreshold));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Search)->Arg(167)->Arg(1000);

void BM_TallyDefaultSplit(benchmark::State& state) {
  // Default plan shape: 167 gallery, 83 present, 167 absent probes.
  Split split;
  auto rec = [](std::string id) {
    FaceRecord r;
    r.id = std::move(id);
    r.race = Race::White;
    r.gender = Gender::Male;
    return r;
  };
  for (int i = 0; i < 167; ++i) split.gallery.push_back(rec("g" + std::to_string(i)));
  for (int i = 0; i < 83; ++i) split.probes.push_back({split.gallery[static_cast<std::size_t>(i)], true});
  for (int i = 0; i < 167; ++i) split.probes.push_back({rec("a" + std::to_string(i)), false});
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<MatchResult> results;
  for (const auto& p : split.probes) {
    std::vector<double> d(167);
    for (auto& v : d) v = u(gen);
    results.push_back(match_from_distances(p.record.id, std::move(d), kDefaultThreshold));
  }
  for (auto _ : state) benchmark::DoNotOptimize(tally(split, results));
}
BENCHMARK(BM_TallyDefaultSplit);

}  // namespace

BENCHMARK_MAIN();
