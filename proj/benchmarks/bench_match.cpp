#include <benchmark/benchmark.h>

#include <random>

#include "oef/bench.hpp"
#include "oef/groundtruth.hpp"
#include "oef/synth.hpp"

namespace {

using namespace oef;

// Ground truth from a synthetic scene; the detection is the same boundary
// jittered by up to one pixel with a share of false positives.
void BM_MatchBoundaries(benchmark::State& state) {
  const SynthExample ex = generate_scene({}, 21);
  std::vector<BinaryMap> gts;
  for (const auto& seg : ex.annotators) gts.push_back(extract_boundaries(seg).mask);
  const BinaryMap& g = gts[0];
  BinaryMap det(g.width(), g.height());
  std::mt19937 rng(2);
  for (int y = 1; y + 1 < g.height(); ++y)
    for (int x = 1; x + 1 < g.width(); ++x) {
      if (g(x, y)) det(x + static_cast<int>(rng() % 3) - 1, y) = 1;
      if (rng() % 200 == 0) det(x, y) = 1;
    }
  for (auto _ : state) benchmark::DoNotOptimize(match_boundaries(det, gts));
}
BENCHMARK(BM_MatchBoundaries)->Unit(benchmark::kMicrosecond);

void BM_Evaluate(benchmark::State& state) {
  std::vector<ImageF> dets;
  std::vector<std::vector<BinaryMap>> gts;
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < 4; ++i) {
    const SynthExample ex = generate_scene({}, 40 + i);
    std::vector<BinaryMap> g;
    for (const auto& seg : ex.annotators) g.push_back(extract_boundaries(seg).mask);
    ImageF d(g[0].width(), g[0].height());
    for (int y = 0; y < d.height(); ++y)
      for (int x = 0; x < d.width(); ++x) d(x, y) = (g[0](x, y) ? 0.5f : 0.0f) + 0.3f * u(rng);
    dets.push_back(d);
    gts.push_back(g);
  }
  MatchConfig cfg;
  cfg.n_thresholds = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(dets, gts, cfg));
}
BENCHMARK(BM_Evaluate)->Arg(9)->Arg(33)->Unit(benchmark::kMillisecond);

}  // namespace
