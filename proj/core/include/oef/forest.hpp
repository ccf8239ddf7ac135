#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "oef/features.hpp"
#include "oef/groundtruth.hpp"
#include "oef/image.hpp"
#include "oef/label_space.hpp"

namespace oef {

struct TreeHyper {
  int max_depth = 64;
  int min_leaf_count = 8;
  int n_features_per_node = 0;  // 0: sqrt(pool size)
  int n_thresholds = 8;
  friend bool operator==(const TreeHyper&, const TreeHyper&) = default;
};

struct ForestConfig {
  LabelSpaceConfig labels;
  FeaturePoolConfig pool;
  int n_channels = kNumChannels;
  TreeHyper hyper;
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

struct TreeNode {
  FeatureId feature;
  float threshold = 0.0f;
  std::int32_t right = -1;  // left child is the next node (preorder)
  std::int32_t leaf = -1;   // index into leaves, or -1 for internal nodes
  bool is_leaf() const { return leaf >= 0; }
};

struct LeafPosterior {
  EdgeLabel argmax = kBackground;
  std::int32_t count = 0;
  // Sparse empirical posterior, sorted by label; empty in argmax-only models.
  std::vector<std::pair<std::uint16_t, float>> entries;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // preorder, root at 0
  std::vector<LeafPosterior> leaves;

  const LeafPosterior& route(const ChannelStack& stack, size_t cell_index) const {
    std::int32_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = read_feature_at(stack, cell_index, n.feature) < n.threshold ? i + 1 : n.right;
    }
    return leaves[nodes[i].leaf];
  }
  int depth() const;
};

class Forest {
 public:
  ForestConfig config;
  std::vector<DecisionTree> trees;
  bool has_posteriors = true;

  int num_classes() const { return config.labels.num_classes(); }
  // Throws ConfigError when the model was trained for a different label space.
  void check_compatible(const LabelSpaceConfig& labels) const;
  // Node array plus stored leaf entries, in bytes.
  size_t model_bytes() const;
  size_t node_count() const;
};

// ---- Split selection ------------------------------------------------------

double gini_impurity(std::span<const std::int32_t> counts);

// Candidate thresholds: n_thresholds quantiles of the values (exact for up to
// 256 values, otherwise of a strided subsample), deduplicated and ascending.
// A sample goes left when value < threshold.
std::vector<float> candidate_thresholds(std::span<const float> values, int n_thresholds);

struct SplitResult {
  int feature = -1;
  float threshold = 0.0f;
  double impurity = std::numeric_limits<double>::infinity();
  bool valid() const { return feature >= 0; }
};

// values holds n_features rows of labels.size() samples. Minimizes the
// size-weighted child Gini over every (feature, candidate threshold) pair whose
// children both hold at least min_leaf_count samples; ties keep the first pair
// in (feature, ascending threshold) order.
SplitResult best_split(std::span<const float> values, int n_features,
                       std::span<const EdgeLabel> labels, int num_classes,
                       int n_thresholds, int min_leaf_count);

// ---- Training --------------------------------------------------------------

struct TrainingView {
  std::span<const ChannelStack> stacks;  // indexed by LabeledPatch::image
  std::span<const LabeledPatch> patches;
};

struct TreeReport {
  double seconds = 0.0;
  size_t nodes = 0;
  size_t leaves = 0;
  int depth = 0;
  size_t samples = 0;
};

// Grows one tree on the given sample indices (duplicates allowed).
DecisionTree train_tree(const TrainingView& data, std::span<const std::int32_t> samples,
                        std::span<const FeatureId> pool, const ForestConfig& cfg,
                        std::uint64_t seed, TreeReport* report = nullptr);

struct ForestTrainingOptions {
  int n_trees = 8;
  int bootstrap_size = 100000;
  std::vector<std::uint64_t> seeds;  // one per tree; empty: derived from base_seed
  std::uint64_t base_seed = 1;
  int threads = 1;
};

// Each tree sees its own bootstrap sample (with replacement) of the patches.
Forest train_forest(const TrainingView& data, const ForestConfig& cfg,
                    const ForestTrainingOptions& options,
                    std::vector<TreeReport>* reports = nullptr);

// ---- Prediction ------------------------------------------------------------

enum class FusionMode { kAverage, kVote };

using ScoreVector = std::vector<float>;

// Mean of leaf posteriors (out has K+1 entries and is overwritten).
void predict_average(const Forest& f, const ChannelStack& stack, Pixel center,
                     std::span<float> out);
// One 1/T vote per tree for its leaf argmax.
void predict_vote(const Forest& f, const ChannelStack& stack, Pixel center,
                  std::span<float> out);

ScoreVector predict_average(const Forest& f, const ChannelStack& stack, Pixel center);
ScoreVector predict_vote(const Forest& f, const ChannelStack& stack, Pixel center);

// Per-pixel score vectors over a width x height image: K+1 channels.
using ScoreVolume = ImageF;

ScoreVolume predict_image(const Forest& f, const ChannelStack& stack, int width,
                          int height, FusionMode mode, int threads = 1);

// ---- Persistence -------------------------------------------------------------

struct SaveOptions {
  bool posteriors = true;  // false: leaves keep only argmax and count
};

struct LoadOptions {
  bool skip_posteriors = false;  // read an argmax-only view of a full model
};

inline constexpr std::uint32_t kForestFormatVersion = 1;

void save_forest(const Forest& f, const std::filesystem::path& path,
                 const SaveOptions& options = {});
// Throws DataError on corrupt or truncated files, ConfigError on version mismatch.
Forest load_forest(const std::filesystem::path& path, const LoadOptions& options = {});

}  // namespace oef
