#pragma once

#include <span>
#include <vector>

#include "oef/calibration.hpp"
#include "oef/config.hpp"
#include "oef/dataset.hpp"
#include "oef/forest.hpp"
#include "oef/fusion.hpp"

namespace oef {

struct TrainReport {
  double groundtruth_seconds = 0;
  double channel_seconds = 0;
  double sampling_seconds = 0;
  std::int64_t patches = 0;
  std::int64_t draws = 0;
  std::vector<std::int64_t> class_counts;
  std::vector<TreeReport> trees;
  long peak_rss_kb = 0;
};

// Ground truth, channels, balanced sampling and forest training.
Forest train_model(std::span<const Example> examples, const PipelineConfig& cfg, int threads,
                   TrainReport* report = nullptr);

// (score, soft target) pairs for every edge label with a nonzero score at
// sampled edge centers of each example, run at one pyramid scale. A center
// counts as an edge center when some annotator gives it an edge label.
std::vector<CalibrationPair> calibration_pairs(const Forest& forest,
                                               std::span<const Example> examples,
                                               const PipelineConfig& cfg, double scale,
                                               int threads);

// One fitted beta per pyramid scale; scales without usable pairs keep the
// configured value.
std::vector<double> fit_pyramid_betas(const Forest& forest, std::span<const Example> examples,
                                      const PipelineConfig& cfg, int threads);

struct Detection {
  OrientedEdgeMap edges;
  ImageF strength;  // max over orientations
  ImageF thinned;   // non-maximum suppressed
};

Detection run_detection(const ImageF& image, const Forest& forest, const PipelineConfig& cfg,
                        int threads);

// Peak resident set size of this process in kilobytes (0 if unknown).
long peak_rss_kb();

}  // namespace oef
