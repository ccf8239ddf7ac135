#include <benchmark/benchmark.h>

#include <random>

#include "oef/fusion.hpp"
#include "oef/synth.hpp"

namespace {

using namespace oef;

// Forest-like score volume: a handful of edge labels per pixel whose scores
// sum to at most one, background taking the rest.
ScoreVolume sparse_scores(int w, int h, int labels_per_pixel, std::uint64_t seed) {
  const LabelSpaceConfig cfg;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label(1, cfg.num_edge_labels());
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ScoreVolume s(w, h, cfg.num_classes());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float left = 1.0f;
      for (int i = 0; i < labels_per_pixel; ++i) {
        const float v = left * u(rng) * 0.5f;
        s(x, y, label(rng)) += v;
        left -= v;
      }
      s(x, y, 0) = left;
    }
  return s;
}

struct Scene {
  ImageF image;
  ScoreVolume scores;
  EdgeMaskTable table{LabelSpaceConfig{}};
};

const Scene& scene() {
  static const Scene s = [] {
    Scene out;
    out.image = to_float(generate_scene({}, 11).image);
    out.scores = sparse_scores(out.image.width(), out.image.height(), 4, 3);
    return out;
  }();
  return s;
}

void BM_Composite(benchmark::State& state) {
  const Scene& s = scene();
  const int sh = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(composite(s.scores, s.image, sh, s.table));
  state.SetItemsProcessed(state.iterations() * s.image.width() * s.image.height());
}
BENCHMARK(BM_Composite)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_CompositeCollapsed(benchmark::State& state) {
  const Scene& s = scene();
  const int sh = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(composite_collapsed(s.scores, s.image, sh, s.table));
  state.SetItemsProcessed(state.iterations() * s.image.width() * s.image.height());
}
BENCHMARK(BM_CompositeCollapsed)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_SharpenOffsets(benchmark::State& state) {
  const Scene& s = scene();
  SharpenScratch scratch;
  std::vector<Pixel> out;
  EdgeLabel k = 1;
  for (auto _ : state) {
    sharpen_offsets(s.image, {100, 75}, k, 2, s.table, scratch, out);
    benchmark::DoNotOptimize(out.data());
    k = k % s.table.config().num_edge_labels() + 1;
  }
}
BENCHMARK(BM_SharpenOffsets);

void BM_Nms(benchmark::State& state) {
  const Scene& s = scene();
  const OrientedEdgeMap e = composite_collapsed(s.scores, s.image, 0, s.table);
  for (auto _ : state) benchmark::DoNotOptimize(nms(e));
}
BENCHMARK(BM_Nms)->Unit(benchmark::kMillisecond);

}  // namespace
