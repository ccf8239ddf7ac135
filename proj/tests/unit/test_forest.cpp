#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "oef/env.hpp"
#include "oef/errors.hpp"
#include "oef/features.hpp"
#include "oef/forest.hpp"
#include "oef/groundtruth.hpp"
#include "oef/synth.hpp"

namespace oef {
namespace {

namespace fs = std::filesystem;

const LabelSpaceConfig kCfg;

// One single-channel stack per sample, filled with a constant value.
ChannelStack constant_stack(float v) {
  ChannelStack s(8, 8, {{"toy", 0}}, 5);
  s.set_channel(0, ImageF(8, 8, 1, v));
  return s;
}

struct ToyData {
  std::vector<ChannelStack> stacks;
  std::vector<LabeledPatch> patches;
};

ToyData separable_data(int n, unsigned seed) {
  ToyData d;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < n; ++i) {
    const float v = u(rng);
    d.stacks.push_back(constant_stack(v));
    d.patches.push_back({i, 8, 8, 0, v < 0.4f ? 3 : 17});
  }
  return d;
}

ForestConfig toy_config() {
  ForestConfig cfg;
  cfg.n_channels = 1;
  cfg.pool = {16, 0, 5};
  cfg.hyper.min_leaf_count = 1;
  return cfg;
}

TEST(Gini, PureAndMixed) {
  const std::int32_t pure[] = {4, 0};
  EXPECT_DOUBLE_EQ(gini_impurity(pure), 0.0);
  const std::int32_t mixed[] = {2, 2};
  EXPECT_DOUBLE_EQ(gini_impurity(mixed), 0.5);
  const std::int32_t three[] = {1, 1, 1};
  EXPECT_NEAR(gini_impurity(three), 2.0 / 3.0, 1e-15);
}

TEST(BestSplit, PerfectSplitHasZeroImpurity) {
  const float values[] = {0, 1, 2, 3, 10, 11, 12, 13};
  const EdgeLabel labels[] = {1, 1, 1, 1, 2, 2, 2, 2};
  const SplitResult r = best_split(values, 1, labels, 3, 8, 1);
  ASSERT_TRUE(r.valid());
  EXPECT_DOUBLE_EQ(r.impurity, 0.0);
  EXPECT_GT(r.threshold, 3.0f);
  EXPECT_LE(r.threshold, 10.0f);
}

// Brute force over every (feature, candidate threshold): partition the
// samples directly and compare exact scores sum L^2/nL + sum R^2/nR.
SplitResult oracle_split(const std::vector<float>& values, int n_features,
                         const std::vector<EdgeLabel>& labels, int num_classes, int n_thresholds,
                         int min_leaf, __int128* best_num, __int128* best_den) {
  const size_t n = labels.size();
  SplitResult best;
  __int128 bn = -1, bd = 1;
  for (int f = 0; f < n_features; ++f) {
    const std::span<const float> row(values.data() + f * n, n);
    for (float t : candidate_thresholds(row, n_thresholds)) {
      std::vector<std::int64_t> l(num_classes, 0), r(num_classes, 0);
      std::int64_t nl = 0, nr = 0;
      for (size_t i = 0; i < n; ++i) {
        if (row[i] < t) {
          ++l[labels[i]];
          ++nl;
        } else {
          ++r[labels[i]];
          ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      std::int64_t sl = 0, sr = 0;
      for (int c = 0; c < num_classes; ++c) {
        sl += l[c] * l[c];
        sr += r[c] * r[c];
      }
      const __int128 num = static_cast<__int128>(sl) * nr + static_cast<__int128>(sr) * nl;
      const __int128 den = static_cast<__int128>(nl) * nr;
      if (bn < 0 || num * bd > bn * den) {
        bn = num;
        bd = den;
        best.feature = f;
        best.threshold = t;
        best.impurity = (static_cast<double>(n) - static_cast<double>(sl) / nl -
                         static_cast<double>(sr) / nr) / n;
      }
    }
  }
  *best_num = bn;
  *best_den = bd;
  return best;
}

TEST(BestSplit, MatchesExhaustiveOracleOnRandomNodes) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 20 + static_cast<int>(rng() % 181);  // up to 200 samples
    const int n_features = 1 + static_cast<int>(rng() % 6);
    const int num_classes = 2 + static_cast<int>(rng() % 4);
    const int n_thresholds = trial % 2 ? 8 : 256;  // sampled vs all distinct values
    const int min_leaf = 1 + static_cast<int>(rng() % 8);
    std::vector<EdgeLabel> labels(n);
    for (auto& y : labels) y = static_cast<EdgeLabel>(rng() % num_classes);
    std::vector<float> values(static_cast<size_t>(n) * n_features);
    std::uniform_int_distribution<int> coarse(0, 30);  // many ties
    for (auto& v : values) v = static_cast<float>(coarse(rng));
    __int128 num, den;
    const SplitResult oracle = oracle_split(values, n_features, labels, num_classes, n_thresholds, min_leaf, &num, &den);
    const SplitResult got = best_split(values, n_features, labels, num_classes, n_thresholds, min_leaf);
    ASSERT_EQ(got.valid(), oracle.valid()) << "trial " << trial;
    if (!oracle.valid()) continue;
    EXPECT_EQ(got.feature, oracle.feature) << "trial " << trial;
    EXPECT_EQ(got.threshold, oracle.threshold) << "trial " << trial;
    EXPECT_NEAR(got.impurity, oracle.impurity, 1e-12);
  }
}

TEST(CandidateThresholds, QuantilesDeduplicatedAboveMinimum) {
  const float values[] = {5, 1, 1, 3, 2, 4, 1, 6};
  const auto thr = candidate_thresholds(values, 8);
  EXPECT_TRUE(std::is_sorted(thr.begin(), thr.end()));
  EXPECT_EQ(std::adjacent_find(thr.begin(), thr.end()), thr.end());
  for (float t : thr) EXPECT_GT(t, 1.0f);
  const float constant[] = {2, 2, 2, 2};
  EXPECT_TRUE(candidate_thresholds(constant, 8).empty());
}

TEST(TrainTree, SeparableTwoClassDataIsLearnedExactly) {
  ToyData d = separable_data(64, 1);
  // With 8 quantile thresholds the exact class boundary may not be a
  // candidate, so the tree can need a few extra splits; it must still fit
  // the data perfectly. With every distinct value as a candidate a single
  // split suffices.
  for (int n_thresholds : {8, 256}) {
    ForestConfig cfg = toy_config();
    cfg.hyper.n_thresholds = n_thresholds;
    const auto pool = enumerate_feature_pool(cfg.labels, 1, cfg.pool);
    std::vector<std::int32_t> samples(d.patches.size());
    std::iota(samples.begin(), samples.end(), 0);
    TreeReport report;
    const DecisionTree tree = train_tree({d.stacks, d.patches}, samples, pool, cfg, 3, &report);
    for (const auto& p : d.patches) {
      const Pixel c = channel_cell({p.x, p.y});
      const LeafPosterior& leaf = tree.route(d.stacks[p.image], d.stacks[p.image].index(c.x, c.y));
      EXPECT_EQ(leaf.argmax, p.label);
      ASSERT_EQ(leaf.entries.size(), 1u);
      EXPECT_FLOAT_EQ(leaf.entries[0].second, 1.0f);
    }
    EXPECT_EQ(report.leaves, tree.leaves.size());
    if (n_thresholds == 256) {
      EXPECT_EQ(tree.depth(), 1);
      EXPECT_EQ(tree.leaves.size(), 2u);
    }
  }
}

TEST(TrainForest, SameSeedsGiveIdenticalTrees) {
  ToyData d = separable_data(80, 2);
  // Mix in label noise so trees have some depth.
  for (size_t i = 0; i < d.patches.size(); i += 7) d.patches[i].label = 9;
  const ForestConfig cfg = toy_config();
  ForestTrainingOptions opt;
  opt.n_trees = 2;
  opt.bootstrap_size = 80;
  opt.seeds = {11, 11};
  const Forest f = train_forest({d.stacks, d.patches}, cfg, opt);
  ASSERT_EQ(f.trees.size(), 2u);
  ASSERT_EQ(f.trees[0].nodes.size(), f.trees[1].nodes.size());
  for (size_t i = 0; i < f.trees[0].nodes.size(); ++i) {
    EXPECT_EQ(f.trees[0].nodes[i].feature, f.trees[1].nodes[i].feature);
    EXPECT_EQ(f.trees[0].nodes[i].threshold, f.trees[1].nodes[i].threshold);
  }
  opt.threads = 2;
  const Forest g = train_forest({d.stacks, d.patches}, cfg, opt);
  EXPECT_EQ(g.trees[0].nodes.size(), f.trees[0].nodes.size());
}

// Two-leaf delta trees built by hand: feature 0 < 0.5 goes left.
Forest delta_forest(std::vector<std::pair<EdgeLabel, EdgeLabel>> leaves) {
  Forest f;
  f.config = toy_config();
  for (auto [a, b] : leaves) {
    DecisionTree t;
    t.nodes = {{FeatureId{}, 0.5f, 2, -1}, {FeatureId{}, 0, -1, 0}, {FeatureId{}, 0, -1, 1}};
    t.leaves = {{a, 10, {{static_cast<std::uint16_t>(a), 1.0f}}},
                {b, 10, {{static_cast<std::uint16_t>(b), 1.0f}}}};
    f.trees.push_back(t);
  }
  return f;
}

TEST(Predict, SingleTreeAverageIsLeafPosterior) {
  Forest f;
  f.config = toy_config();
  DecisionTree t;
  t.nodes = {{FeatureId{}, 0, -1, 0}};
  t.leaves = {{4, 10, {{2, 0.3f}, {4, 0.7f}}}};
  f.trees.push_back(t);
  const ChannelStack s = constant_stack(0.2f);
  const ScoreVector avg = predict_average(f, s, {8, 8});
  ASSERT_EQ(avg.size(), 121u);
  EXPECT_FLOAT_EQ(avg[2], 0.3f);
  EXPECT_FLOAT_EQ(avg[4], 0.7f);
  const ScoreVector vote = predict_vote(f, s, {8, 8});
  EXPECT_FLOAT_EQ(vote[4], 1.0f);
  EXPECT_FLOAT_EQ(vote[2], 0.0f);
}

TEST(Predict, TwoDeltaTreesAverageToHalves) {
  const Forest f = delta_forest({{5, 6}, {7, 8}});
  const ScoreVector avg = predict_average(f, constant_stack(0.1f), {8, 8});
  EXPECT_FLOAT_EQ(avg[5], 0.5f);
  EXPECT_FLOAT_EQ(avg[7], 0.5f);
  double sum = 0;
  for (float v : avg) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(Predict, DeltaLeavesMakeVoteEqualAverage) {
  const Forest f = delta_forest({{5, 6}, {5, 9}, {7, 6}, {0, 1}});
  for (float v : {0.1f, 0.9f}) {
    const ChannelStack s = constant_stack(v);
    EXPECT_EQ(predict_average(f, s, {8, 8}), predict_vote(f, s, {8, 8}));
  }
}

TEST(Predict, AgreeingTreesVoteOneHot) {
  const Forest f = delta_forest({{5, 6}, {5, 6}, {5, 6}});
  const ScoreVector vote = predict_vote(f, constant_stack(0.1f), {8, 8});
  EXPECT_FLOAT_EQ(vote[5], 1.0f);
  EXPECT_EQ(std::count_if(vote.begin(), vote.end(), [](float v) { return v != 0; }), 1);
}

TEST(Predict, ImageVolumeSumsToOne) {
  ToyData d = separable_data(40, 4);
  const ForestConfig cfg = toy_config();
  ForestTrainingOptions opt;
  opt.n_trees = 3;
  opt.bootstrap_size = 40;
  const Forest f = train_forest({d.stacks, d.patches}, cfg, opt);
  ChannelStack s(8, 8, {{"toy", 0}}, 5);
  ImageF plane(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) plane(x, y) = (x + y) / 14.0f;
  s.set_channel(0, plane);
  for (FusionMode mode : {FusionMode::kAverage, FusionMode::kVote}) {
    const ScoreVolume v = predict_image(f, s, 16, 16, mode, 2);
    ASSERT_EQ(v.channels(), 121);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double sum = 0;
        for (int k = 0; k < 121; ++k) sum += v(x, y, k);
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
  }
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = scratch_dir() / "oef_forest_tests";
  fs::create_directories(dir);
  return dir / name;
}

Forest trained_synthetic_forest(int n_trees) {
  SynthConfig sc;
  sc.width = 96;
  sc.height = 72;
  std::vector<std::vector<GroundTruth>> gts;
  std::vector<ChannelStack> stacks;
  for (int i = 0; i < 6; ++i) {
    const SynthExample ex = generate_scene(sc, 300 + i);
    gts.push_back({prepare_groundtruth(ex.annotators[0])});
    stacks.push_back(compute_channels(to_float(ex.image), kCfg));
  }
  const LabeledPatchSet set = sample_training_set(gts, kCfg, {4, 1, 20});
  ForestConfig cfg;
  cfg.pool = {64, 192, 7};
  ForestTrainingOptions opt;
  opt.n_trees = n_trees;
  opt.bootstrap_size = 300;
  return train_forest({stacks, set.patches}, cfg, opt);
}

TEST(Persistence, RoundTripIsBitExact) {
  const Forest f = trained_synthetic_forest(2);
  const fs::path path = temp_file("roundtrip.oef");
  save_forest(f, path);
  const Forest g = load_forest(path);
  ASSERT_EQ(g.trees.size(), f.trees.size());
  EXPECT_EQ(g.config, f.config);
  const ChannelStack s = compute_channels(to_float(generate_scene({}, 9).image), kCfg);
  for (int y = 0; y < 150; y += 7)
    for (int x = 0; x < 200; x += 7) {
      const ScoreVector a = predict_average(f, s, {x, y}), b = predict_average(g, s, {x, y});
      ASSERT_EQ(a, b);
    }
  // Saving the loaded model reproduces the file byte for byte.
  const fs::path again = temp_file("roundtrip2.oef");
  save_forest(g, again);
  std::ifstream ia(path, std::ios::binary), ib(again, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(ia)), {}), sb((std::istreambuf_iterator<char>(ib)), {});
  EXPECT_EQ(sa, sb);
}

TEST(Persistence, ArgmaxOnlyModelsVoteIdentically) {
  const Forest f = trained_synthetic_forest(3);
  const fs::path full = temp_file("full.oef"), slim = temp_file("slim.oef");
  save_forest(f, full);
  save_forest(f, slim, {false});
  EXPECT_LT(fs::file_size(slim), fs::file_size(full));
  const Forest a = load_forest(slim);
  const Forest b = load_forest(full, {true});
  EXPECT_FALSE(a.has_posteriors);
  EXPECT_FALSE(b.has_posteriors);
  const ChannelStack s = compute_channels(to_float(generate_scene({}, 10).image), kCfg);
  for (int y = 0; y < 150; y += 11)
    for (int x = 0; x < 200; x += 11) {
      EXPECT_EQ(predict_vote(a, s, {x, y}), predict_vote(f, s, {x, y}));
      EXPECT_EQ(predict_vote(b, s, {x, y}), predict_vote(f, s, {x, y}));
    }
  EXPECT_LT(a.model_bytes(), f.model_bytes());
}

TEST(Persistence, TruncatedFileIsDataError) {
  const Forest f = trained_synthetic_forest(1);
  const fs::path path = temp_file("trunc.oef");
  save_forest(f, path);
  const auto size = fs::file_size(path);
  for (auto cut : {size - 1, size / 2, static_cast<decltype(size)>(3)}) {
    fs::copy_file(path, temp_file("cut.oef"), fs::copy_options::overwrite_existing);
    fs::resize_file(temp_file("cut.oef"), cut);
    EXPECT_THROW(load_forest(temp_file("cut.oef")), DataError) << "cut at " << cut;
  }
  EXPECT_THROW(load_forest(temp_file("does_not_exist.oef")), DataError);
}

TEST(Persistence, CorruptedByteIsDataError) {
  const Forest f = trained_synthetic_forest(1);
  const fs::path path = temp_file("corrupt.oef");
  save_forest(f, path);
  std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
  io.seekp(static_cast<std::streamoff>(fs::file_size(path) / 2));
  io.put('\x5a');
  io.close();
  EXPECT_THROW(load_forest(path), DataError);
}

TEST(Persistence, VersionMismatchIsConfigError) {
  const Forest f = trained_synthetic_forest(1);
  const fs::path path = temp_file("version.oef");
  save_forest(f, path);
  std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
  io.seekp(4);  // version follows the 4-byte magic
  const char v[4] = {9, 0, 0, 0};
  io.write(v, 4);
  io.close();
  EXPECT_THROW(load_forest(path), ConfigError);
}

TEST(Persistence, LabelSpaceMismatchIsConfigError) {
  ToyData d = separable_data(30, 6);
  ForestConfig cfg = toy_config();
  cfg.labels = {16, 5, 4};
  ForestTrainingOptions opt;
  opt.n_trees = 1;
  opt.bootstrap_size = 30;
  const Forest f = train_forest({d.stacks, d.patches}, cfg, opt);
  const fs::path path = temp_file("small_space.oef");
  save_forest(f, path);
  const Forest g = load_forest(path);
  EXPECT_NO_THROW(g.check_compatible({16, 5, 4}));
  EXPECT_THROW(g.check_compatible(LabelSpaceConfig{}), ConfigError);
}

}  // namespace
}  // namespace oef
