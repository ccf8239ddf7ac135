#include "oef/forest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "oef/errors.hpp"
#include "oef/log.hpp"
#include "oef/parallel.hpp"

namespace oef {
namespace {

using i128 = __int128;

// A split is scored by sum_c L_c^2 / nL + sum_c R_c^2 / nR (larger is purer),
// kept as an exact fraction so comparisons are reproducible.
struct Score {
  std::int64_t num_left = 0, n_left = 1, num_right = 0, n_right = 1;
  // numerator / denominator of the score
  i128 numerator() const {
    return static_cast<i128>(num_left) * n_right + static_cast<i128>(num_right) * n_left;
  }
  i128 denominator() const { return static_cast<i128>(n_left) * n_right; }
  bool better_than(const Score& o) const {
    // a/b > c/d with positive denominators; values fit comfortably in 128 bits
    // for nodes below ~10^8 samples.
    return numerator() * o.denominator() > o.numerator() * denominator();
  }
  double impurity() const {
    const double n = static_cast<double>(n_left + n_right);
    return (n - static_cast<double>(num_left) / n_left -
            static_cast<double>(num_right) / n_right) /
           n;
  }
};

struct SplitScratch {
  std::vector<std::uint8_t> bins;
  std::vector<std::int32_t> bin_start;
  std::vector<EdgeLabel> ordered;
  std::vector<std::int32_t> left, right, total;
};

struct ExactSplit {
  SplitResult result;
  Score score;
};

ExactSplit best_split_exact(std::span<const float> values, int n_features,
                            std::span<const EdgeLabel> labels, int num_classes,
                            int n_thresholds, int min_leaf_count, SplitScratch& s) {
  const int n = static_cast<int>(labels.size());
  ExactSplit best;
  s.total.assign(num_classes, 0);
  for (EdgeLabel y : labels) ++s.total[y];
  s.left.assign(num_classes, 0);
  s.right = s.total;
  std::int64_t total_sq = 0;
  for (std::int32_t c : s.total) total_sq += static_cast<std::int64_t>(c) * c;
  s.bins.resize(n);
  s.ordered.resize(n);

  for (int f = 0; f < n_features; ++f) {
    const auto v = values.subspan(static_cast<size_t>(f) * n, n);
    const std::vector<float> thr = candidate_thresholds(v, n_thresholds);
    if (thr.empty()) continue;
    const int nb = static_cast<int>(thr.size()) + 1;
    s.bin_start.assign(nb + 1, 0);
    for (int i = 0; i < n; ++i) {
      const int b = static_cast<int>(std::upper_bound(thr.begin(), thr.end(), v[i]) - thr.begin());
      s.bins[i] = static_cast<std::uint8_t>(b);
      ++s.bin_start[b + 1];
    }
    for (int b = 0; b < nb; ++b) s.bin_start[b + 1] += s.bin_start[b];
    {
      std::vector<std::int32_t> cursor(s.bin_start.begin(), s.bin_start.end() - 1);
      for (int i = 0; i < n; ++i) s.ordered[cursor[s.bins[i]]++] = labels[i];
    }
    std::int64_t left_sq = 0, right_sq = total_sq;
    std::int64_t n_left = 0;
    for (int j = 0; j + 1 < nb; ++j) {
      for (int i = s.bin_start[j]; i < s.bin_start[j + 1]; ++i) {
        const EdgeLabel c = s.ordered[i];
        left_sq += 2 * static_cast<std::int64_t>(s.left[c]) + 1;
        ++s.left[c];
        right_sq -= 2 * static_cast<std::int64_t>(s.right[c]) - 1;
        --s.right[c];
      }
      n_left = s.bin_start[j + 1];
      const std::int64_t n_right = n - n_left;
      if (n_left < min_leaf_count || n_right < min_leaf_count) continue;
      Score score{left_sq, n_left, right_sq, n_right};
      if (!best.result.valid() || score.better_than(best.score)) {
        best.score = score;
        best.result = {f, thr[j], score.impurity()};
      }
    }
    // Restore left/right for the classes this feature touched.
    for (int i = 0; i < s.bin_start[nb - 1]; ++i) {
      const EdgeLabel c = s.ordered[i];
      s.left[c] = 0;
      s.right[c] = s.total[c];
    }
  }
  return best;
}

LeafPosterior make_leaf(std::span<const std::int32_t> counts, std::int32_t n) {
  LeafPosterior leaf;
  leaf.count = n;
  std::int32_t best = -1;
  for (int k = 0; k < static_cast<int>(counts.size()); ++k) {
    if (counts[k] == 0) continue;
    leaf.entries.emplace_back(static_cast<std::uint16_t>(k),
                              static_cast<float>(static_cast<double>(counts[k]) / n));
    if (counts[k] > best) {
      best = counts[k];
      leaf.argmax = k;
    }
  }
  return leaf;
}

struct TreeBuilder {
  const TrainingView& data;
  std::span<const FeatureId> pool;
  const ForestConfig& cfg;
  std::mt19937_64 rng;
  std::vector<std::int32_t> samples{};
  std::vector<size_t> cell{};          // per patch
  std::vector<EdgeLabel> all_labels{};  // per patch
  std::vector<int> pool_perm{};
  std::vector<float> values{};
  std::vector<EdgeLabel> node_labels{};
  std::vector<std::uint8_t> goes_left{};
  std::vector<std::int32_t> scratch_samples{};
  SplitScratch scratch{};
  DecisionTree tree{};
  int n_features = 0;
  int max_depth_seen = 0;

  std::int32_t build(int begin, int end, int depth) {
    const int n = end - begin;
    const int num_classes = cfg.labels.num_classes();
    max_depth_seen = std::max(max_depth_seen, depth);
    std::vector<std::int32_t> counts(num_classes, 0);
    node_labels.resize(n);
    for (int i = 0; i < n; ++i) {
      node_labels[i] = all_labels[samples[begin + i]];
      ++counts[node_labels[i]];
    }
    const std::int32_t index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    const auto& hyper = cfg.hyper;
    auto leaf = [&] {
      tree.nodes[index].leaf = static_cast<std::int32_t>(tree.leaves.size());
      tree.leaves.push_back(make_leaf(counts, n));
      return index;
    };
    if (pure || depth >= hyper.max_depth || n < 2 * hyper.min_leaf_count) return leaf();

    // Partial Fisher-Yates: the first n_features entries become this node's draw.
    const int pool_size = static_cast<int>(pool.size());
    for (int i = 0; i < n_features; ++i) {
      const int j = std::uniform_int_distribution<int>(i, pool_size - 1)(rng);
      std::swap(pool_perm[i], pool_perm[j]);
    }
    values.resize(static_cast<size_t>(n_features) * n);
    for (int f = 0; f < n_features; ++f) {
      const FeatureId& fid = pool[pool_perm[f]];
      float* row = values.data() + static_cast<size_t>(f) * n;
      for (int i = 0; i < n; ++i) {
        const std::int32_t p = samples[begin + i];
        row[i] = read_feature_at(data.stacks[data.patches[p].image], cell[p], fid);
      }
    }
    const ExactSplit split = best_split_exact(values, n_features, node_labels, num_classes,
                                              hyper.n_thresholds, hyper.min_leaf_count, scratch);
    if (!split.result.valid()) return leaf();
    std::int64_t parent_sq = 0;
    for (auto c : counts) parent_sq += static_cast<std::int64_t>(c) * c;
    // Child score must beat the unsplit node: sumsq/n.
    if (split.score.numerator() * n <= static_cast<i128>(parent_sq) * split.score.denominator())
      return leaf();

    const FeatureId fid = pool[pool_perm[split.result.feature]];
    const float* row = values.data() + static_cast<size_t>(split.result.feature) * n;
    scratch_samples.resize(n);
    int nl = 0;
    for (int i = 0; i < n; ++i)
      if (row[i] < split.result.threshold) scratch_samples[nl++] = samples[begin + i];
    int nr = nl;
    for (int i = 0; i < n; ++i)
      if (!(row[i] < split.result.threshold)) scratch_samples[nr++] = samples[begin + i];
    std::copy(scratch_samples.begin(), scratch_samples.begin() + n, samples.begin() + begin);

    tree.nodes[index].feature = fid;
    tree.nodes[index].threshold = split.result.threshold;
    build(begin, begin + nl, depth + 1);
    const std::int32_t right = build(begin + nl, end, depth + 1);
    tree.nodes[index].right = right;
    return index;
  }
};

}  // namespace

int DecisionTree::depth() const {
  // Preorder walk with an explicit stack of (node, depth).
  int best = 0;
  std::vector<std::pair<std::int32_t, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[i].is_leaf()) {
      stack.push_back({i + 1, d + 1});
      stack.push_back({nodes[i].right, d + 1});
    }
  }
  return best;
}

void Forest::check_compatible(const LabelSpaceConfig& labels) const {
  if (!(config.labels == labels)) {
    throw ConfigError("model label space (p=" + std::to_string(config.labels.patch_size) +
                      ", n=" + std::to_string(config.labels.n_dist_bins) +
                      ", m=" + std::to_string(config.labels.n_orient_bins) +
                      ") does not match the pipeline (p=" + std::to_string(labels.patch_size) +
                      ", n=" + std::to_string(labels.n_dist_bins) +
                      ", m=" + std::to_string(labels.n_orient_bins) + ")");
  }
}

size_t Forest::node_count() const {
  size_t n = 0;
  for (const auto& t : trees) n += t.nodes.size();
  return n;
}

size_t Forest::model_bytes() const {
  size_t bytes = 0;
  for (const auto& t : trees) {
    bytes += t.nodes.size() * sizeof(TreeNode);
    for (const auto& leaf : t.leaves)
      bytes += sizeof(LeafPosterior) + leaf.entries.size() * sizeof(leaf.entries[0]);
  }
  return bytes;
}

double gini_impurity(std::span<const std::int32_t> counts) {
  double n = 0, sq = 0;
  for (auto c : counts) {
    n += c;
    sq += static_cast<double>(c) * c;
  }
  return n == 0 ? 0.0 : 1.0 - sq / (n * n);
}

std::vector<float> candidate_thresholds(std::span<const float> values, int n_thresholds) {
  constexpr size_t kMaxExact = 256;
  const size_t n = values.size();
  if (n < 2 || n_thresholds < 1) return {};
  std::vector<float> sample;
  if (n <= kMaxExact) {
    sample.assign(values.begin(), values.end());
  } else {
    sample.resize(kMaxExact);
    for (size_t i = 0; i < kMaxExact; ++i) sample[i] = values[i * n / kMaxExact];
  }
  std::sort(sample.begin(), sample.end());
  std::vector<float> thr;
  const size_t m = sample.size();
  for (int j = 1; j <= n_thresholds; ++j) {
    const float t = sample[static_cast<size_t>(j) * m / (n_thresholds + 1)];
    if (t > sample.front()) thr.push_back(t);
  }
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  return thr;
}

SplitResult best_split(std::span<const float> values, int n_features,
                       std::span<const EdgeLabel> labels, int num_classes,
                       int n_thresholds, int min_leaf_count) {
  if (values.size() != static_cast<size_t>(n_features) * labels.size()) {
    throw std::invalid_argument("best_split: values must hold n_features rows");
  }
  if (labels.empty()) throw std::invalid_argument("best_split: empty node");
  SplitScratch scratch{};
  return best_split_exact(values, n_features, labels, num_classes, n_thresholds,
                          min_leaf_count, scratch)
      .result;
}

DecisionTree train_tree(const TrainingView& data, std::span<const std::int32_t> samples,
                        std::span<const FeatureId> pool, const ForestConfig& cfg,
                        std::uint64_t seed, TreeReport* report) {
  if (samples.empty()) throw std::invalid_argument("train_tree: no samples");
  if (pool.empty()) throw std::invalid_argument("train_tree: empty feature pool");
  const auto start = std::chrono::steady_clock::now();
  TreeBuilder b{data, pool, cfg, std::mt19937_64(seed)};
  b.samples.assign(samples.begin(), samples.end());
  b.cell.resize(data.patches.size());
  b.all_labels.resize(data.patches.size());
  for (size_t i = 0; i < data.patches.size(); ++i) {
    const LabeledPatch& p = data.patches[i];
    const Pixel c = channel_cell({p.x, p.y});
    b.cell[i] = data.stacks[p.image].index(c.x, c.y);
    b.all_labels[i] = p.label;
  }
  b.pool_perm.resize(pool.size());
  std::iota(b.pool_perm.begin(), b.pool_perm.end(), 0);
  b.n_features = cfg.hyper.n_features_per_node > 0
                     ? std::min<int>(cfg.hyper.n_features_per_node, static_cast<int>(pool.size()))
                     : std::max(1, static_cast<int>(std::lround(std::sqrt(pool.size()))));
  b.build(0, static_cast<int>(b.samples.size()), 0);
  if (report) {
    report->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report->nodes = b.tree.nodes.size();
    report->leaves = b.tree.leaves.size();
    report->depth = b.max_depth_seen;
    report->samples = samples.size();
  }
  return std::move(b.tree);
}

Forest train_forest(const TrainingView& data, const ForestConfig& cfg,
                    const ForestTrainingOptions& options, std::vector<TreeReport>* reports) {
  if (options.n_trees < 1) throw std::invalid_argument("train_forest: need at least one tree");
  if (data.patches.empty()) throw DataError("train_forest: no training patches");
  cfg.labels.validate();
  std::vector<std::uint64_t> seeds = options.seeds;
  if (seeds.empty()) {
    std::mt19937_64 seeder(options.base_seed);
    for (int t = 0; t < options.n_trees; ++t) seeds.push_back(seeder());
  }
  if (static_cast<int>(seeds.size()) != options.n_trees) {
    throw std::invalid_argument("train_forest: need one seed per tree");
  }
  int bootstrap = options.bootstrap_size;
  if (bootstrap <= 0 || bootstrap > static_cast<int>(data.patches.size())) {
    if (bootstrap > static_cast<int>(data.patches.size()))
      warn("train_forest: bootstrap size " + std::to_string(bootstrap) + " exceeds the " +
           std::to_string(data.patches.size()) + " available patches; using all of them");
    bootstrap = static_cast<int>(data.patches.size());
  }
  const auto pool = enumerate_feature_pool(cfg.labels, cfg.n_channels, cfg.pool);

  Forest forest;
  forest.config = cfg;
  forest.trees.resize(options.n_trees);
  std::vector<TreeReport> local(options.n_trees);
  parallel_for(0, options.n_trees, options.threads, [&](int t) {
    std::mt19937_64 rng(seeds[t]);
    std::uniform_int_distribution<std::int32_t> pick(
        0, static_cast<std::int32_t>(data.patches.size()) - 1);
    std::vector<std::int32_t> sample(bootstrap);
    for (auto& s : sample) s = pick(rng);
    forest.trees[t] = train_tree(data, sample, pool, cfg, rng(), &local[t]);
  });
  if (reports) *reports = std::move(local);
  return forest;
}

void predict_average(const Forest& f, const ChannelStack& stack, Pixel center,
                     std::span<float> out) {
  if (!f.has_posteriors) {
    throw ConfigError("averaging needs leaf posteriors; this model stores argmax only");
  }
  std::fill(out.begin(), out.end(), 0.0f);
  const Pixel cell = channel_cell(center);
  const size_t index = stack.index(cell.x, cell.y);
  const float inv = 1.0f / static_cast<float>(f.trees.size());
  for (const auto& tree : f.trees)
    for (const auto& [k, p] : tree.route(stack, index).entries) out[k] += p * inv;
}

void predict_vote(const Forest& f, const ChannelStack& stack, Pixel center,
                  std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  const Pixel cell = channel_cell(center);
  const size_t index = stack.index(cell.x, cell.y);
  const float inv = 1.0f / static_cast<float>(f.trees.size());
  for (const auto& tree : f.trees) out[tree.route(stack, index).argmax] += inv;
}

ScoreVector predict_average(const Forest& f, const ChannelStack& stack, Pixel center) {
  ScoreVector w(f.num_classes());
  predict_average(f, stack, center, w);
  return w;
}

ScoreVector predict_vote(const Forest& f, const ChannelStack& stack, Pixel center) {
  ScoreVector w(f.num_classes());
  predict_vote(f, stack, center, w);
  return w;
}

ScoreVolume predict_image(const Forest& f, const ChannelStack& stack, int width, int height,
                          FusionMode mode, int threads) {
  if ((width + 1) / 2 != stack.width() || (height + 1) / 2 != stack.height()) {
    throw std::invalid_argument("predict_image: channel stack does not match image size");
  }
  if (mode == FusionMode::kAverage && !f.has_posteriors) {
    throw ConfigError("averaging needs leaf posteriors; this model stores argmax only");
  }
  const int nc = f.num_classes();
  ScoreVolume out(width, height, nc);
  parallel_for(0, height, threads, [&](int y) {
    for (int x = 0; x < width; ++x) {
      std::span<float> w(&out(x, y, 0), nc);
      if (mode == FusionMode::kAverage) {
        predict_average(f, stack, {x, y}, w);
      } else {
        predict_vote(f, stack, {x, y}, w);
      }
    }
  });
  return out;
}

}  // namespace oef
