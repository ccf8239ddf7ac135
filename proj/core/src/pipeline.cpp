#include "oef/pipeline.hpp"

#include <sys/resource.h>

#include <chrono>
#include <random>
#include <string>

#include "oef/features.hpp"
#include "oef/groundtruth.hpp"
#include "oef/log.hpp"
#include "oef/parallel.hpp"

namespace oef {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

long peak_rss_kb() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
  return usage.ru_maxrss;
}

Forest train_model(std::span<const Example> examples, const PipelineConfig& cfg, int threads,
                   TrainReport* report) {
  cfg.validate();
  const int n = static_cast<int>(examples.size());
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<GroundTruth>> gts(n);
  parallel_for(0, n, threads, [&](int i) {
    for (const auto& seg : examples[i].segmentations)
      gts[i].push_back(prepare_groundtruth(seg, cfg.training.spur_length, cfg.training.theta_window));
  });
  const double gt_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<ChannelStack> stacks(n);
  parallel_for(0, n, threads, [&](int i) { stacks[i] = compute_channels(examples[i].image, cfg.labels); });
  const double channel_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const LabeledPatchSet set = sample_training_set(gts, cfg.labels, cfg.sampling);
  const double sampling_seconds = seconds_since(t0);
  gts.clear();

  ForestTrainingOptions options;
  options.n_trees = cfg.training.n_trees;
  options.bootstrap_size = cfg.training.bootstrap_size;
  options.base_seed = cfg.seed;
  options.threads = threads;
  std::vector<TreeReport> trees;
  Forest forest = train_forest({stacks, set.patches}, cfg.forest_config(), options, &trees);
  if (report) {
    report->groundtruth_seconds = gt_seconds;
    report->channel_seconds = channel_seconds;
    report->sampling_seconds = sampling_seconds;
    report->patches = static_cast<std::int64_t>(set.patches.size());
    report->draws = set.draws;
    report->class_counts = set.class_counts;
    report->trees = std::move(trees);
    report->peak_rss_kb = peak_rss_kb();
  }
  return forest;
}

std::vector<CalibrationPair> calibration_pairs(const Forest& forest,
                                               std::span<const Example> examples,
                                               const PipelineConfig& cfg, double scale,
                                               int threads) {
  const LabelSpaceConfig& labels = forest.config.labels;
  const int p = labels.patch_size, nk = labels.num_classes();
  std::vector<std::vector<CalibrationPair>> per_image(examples.size());
  parallel_for(0, static_cast<int>(examples.size()), threads, [&](int i) {
    const Example& ex = examples[i];
    const int w = std::max(1, static_cast<int>(std::lround(ex.image.width() * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(ex.image.height() * scale)));
    if (w < p || h < p || ex.segmentations.empty()) return;
    const ImageF image = resize_bilinear(ex.image, w, h);
    std::vector<GroundTruth> gts;
    for (const auto& seg : ex.segmentations)
      gts.push_back(prepare_groundtruth(resize_nearest(seg, w, h), cfg.training.spur_length,
                                        cfg.training.theta_window));
    const ChannelStack stack = compute_channels(image, labels);
    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i) * 7919ULL +
                        static_cast<std::uint64_t>(scale * 1024));
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
    std::vector<float> scores(nk), target(nk);
    // Only edge patches count: centers that at least one annotator labels
    // with an edge class. Background centers would swamp the fit with
    // zero targets.
    const int wanted = cfg.calibration.pairs_per_image;
    int accepted = 0;
    for (long draw = 0; accepted < wanted && draw < 50L * wanted; ++draw) {
      const Pixel c{px(rng), py(rng)};
      std::fill(target.begin(), target.end(), 0.0f);
      for (const auto& gt : gts) target[label_patch(gt, c, labels)] += 1.0f / gts.size();
      if (!(target[kBackground] < 1.0f)) continue;
      ++accepted;
      if (cfg.detection.mode == FusionMode::kVote) predict_vote(forest, stack, c, scores);
      else predict_average(forest, stack, c, scores);
      for (int k = 1; k < nk; ++k)
        if (scores[k] > 0) per_image[i].push_back({scores[k], target[k]});
    }
  });
  std::vector<CalibrationPair> out;
  for (auto& v : per_image) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<double> fit_pyramid_betas(const Forest& forest, std::span<const Example> examples,
                                      const PipelineConfig& cfg, int threads) {
  const auto& pyr = cfg.detection.pyramid;
  std::vector<double> betas = pyr.beta;
  for (size_t s = 0; s < pyr.scales.size(); ++s) {
    const auto pairs = calibration_pairs(forest, examples, cfg, pyr.scales[s], threads);
    try {
      betas[s] = fit_beta(pairs);
    } catch (const std::exception& e) {
      warn("calibration: keeping beta " + std::to_string(betas[s]) + " at scale " +
           std::to_string(pyr.scales[s]) + " (" + e.what() + ")");
    }
  }
  return betas;
}

Detection run_detection(const ImageF& image, const Forest& forest, const PipelineConfig& cfg,
                        int threads) {
  DetectOptions options;
  options.mode = cfg.detection.mode;
  options.calibration = cfg.detection.calibration;
  options.collapsed = cfg.detection.collapsed;
  options.align_scales = cfg.detection.align_scales;
  options.score_threshold = cfg.detection.score_threshold;
  options.threads = threads;
  Detection d;
  d.edges = detect_multiscale(image, forest, cfg.detection.pyramid, options);
  d.strength = max_strength(d.edges);
  d.thinned = nms(d.edges);
  return d;
}

}  // namespace oef
