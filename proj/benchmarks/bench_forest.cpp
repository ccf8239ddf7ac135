#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "oef/features.hpp"
#include "oef/forest.hpp"
#include "oef/groundtruth.hpp"
#include "oef/synth.hpp"

namespace {

using namespace oef;

void BM_BestSplit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), n_features = 64, num_classes = 121;
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> values(static_cast<size_t>(n) * n_features);
  for (auto& v : values) v = u(rng);
  std::vector<EdgeLabel> labels(n);
  for (auto& y : labels) y = static_cast<EdgeLabel>(rng() % num_classes);
  for (auto _ : state)
    benchmark::DoNotOptimize(best_split(values, n_features, labels, num_classes, 8, 8));
  state.SetItemsProcessed(state.iterations() * n * n_features);
}
BENCHMARK(BM_BestSplit)->Arg(256)->Arg(4096)->Arg(65536);

struct TrainingData {
  std::vector<ChannelStack> stacks;
  LabeledPatchSet set;
};

const TrainingData& training_data() {
  static const TrainingData d = [] {
    TrainingData out;
    const LabelSpaceConfig labels;
    std::vector<std::vector<GroundTruth>> gts;
    for (int i = 0; i < 12; ++i) {
      const SynthExample ex = generate_scene({}, 100 + i);
      gts.push_back({prepare_groundtruth(ex.annotators[0])});
      out.stacks.push_back(compute_channels(to_float(ex.image), labels));
    }
    out.set = sample_training_set(gts, labels, {60, 1, 60});
    return out;
  }();
  return d;
}

// One tree on the whole balanced set; items are training patches.
void BM_TrainTree(benchmark::State& state) {
  const TrainingData& d = training_data();
  const ForestConfig cfg;
  const auto pool = enumerate_feature_pool(cfg.labels, cfg.n_channels, cfg.pool);
  std::vector<std::int32_t> samples(d.set.patches.size());
  std::iota(samples.begin(), samples.end(), 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(train_tree({d.stacks, d.set.patches}, samples, pool, cfg, 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_TrainTree)->Unit(benchmark::kMillisecond);

void BM_PredictImage(benchmark::State& state) {
  const TrainingData& d = training_data();
  const ForestConfig cfg;
  ForestTrainingOptions opt;
  opt.n_trees = 4;
  opt.bootstrap_size = static_cast<int>(d.set.patches.size());
  static const Forest forest = train_forest({d.stacks, d.set.patches}, cfg, opt);
  const auto mode = state.range(0) ? FusionMode::kVote : FusionMode::kAverage;
  const ChannelStack& stack = d.stacks[0];
  for (auto _ : state) benchmark::DoNotOptimize(predict_image(forest, stack, 200, 150, mode));
  state.SetItemsProcessed(state.iterations() * 200 * 150);
}
BENCHMARK(BM_PredictImage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ComputeChannels(benchmark::State& state) {
  const ImageF image = to_float(generate_scene({}, 7).image);
  const LabelSpaceConfig labels;
  for (auto _ : state) benchmark::DoNotOptimize(compute_channels(image, labels));
}
BENCHMARK(BM_ComputeChannels)->Unit(benchmark::kMillisecond);

}  // namespace
