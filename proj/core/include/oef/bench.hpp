#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "oef/image.hpp"

namespace oef {

struct MatchConfig {
  // Maximum correspondence distance as a fraction of the image diagonal.
  double max_dist_fraction = 0.0075;
  int n_thresholds = 99;
  // Extra thresholds, evenly spaced in rank, strictly between the two coarse
  // thresholds around the best aggregate F. 0 disables the second pass.
  int refine_thresholds = 99;
  // Thin each thresholded detection map before matching.
  bool thin_detections = true;
  // Extends the curve flat to recall 0 when integrating AP.
  bool left_extend = false;
  int threads = 1;

  void validate() const;
};

struct MatchCounts {
  long long detected = 0;          // detected boundary pixels
  long long matched_detected = 0;  // detected pixels matched to some annotator
  long long gt_total = 0;          // ground-truth pixels summed over annotators
  long long matched_gt = 0;        // ground-truth pixels with a partner, summed over annotators

  long long true_positives() const { return matched_detected; }
  long long false_positives() const { return detected - matched_detected; }
  long long false_negatives() const { return gt_total - matched_gt; }
  // Empty detections have precision 1 by convention; no ground truth gives recall 1.
  double precision() const;
  double recall() const;
  double f_measure() const;

  MatchCounts& operator+=(const MatchCounts& o);
};

double f_measure(double precision, double recall);

// One-to-one correspondence within max distance, solved exactly per
// annotator (maximum-cardinality bipartite matching). A detected pixel counts
// as a true positive once if it can be matched to any annotator; that count is
// the maximum matching against the disjoint union of all annotators' pixels.
MatchCounts match_boundaries(const BinaryMap& detected, std::span<const BinaryMap> groundtruths,
                             const MatchConfig& cfg = {});

// Match radius in pixels for an image of this size.
double match_radius(int width, int height, const MatchConfig& cfg);

struct PRPoint {
  double threshold = 0;
  double precision = 1;
  double recall = 0;
  double f = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // thresholds strictly decreasing
  double ods = 0, ods_threshold = 0;
  double ois = 0;
  double ap = 0;
  double best_precision = 0, best_recall = 0;
  // Per-image counts at each threshold, [image][threshold].
  std::vector<std::vector<MatchCounts>> per_image;
};

// Detection thresholds: up to n distinct pooled values other than the global
// minimum, evenly spaced in rank from the largest to the smallest candidate,
// in decreasing order. They depend only on the order
// of the values, so the sweep is invariant under strictly increasing maps.
std::vector<float> sweep_thresholds(std::span<const ImageF> detections, int n);

// Sweeps thresholds over all images (pixel detected when value >= t), then
// refines around the best one. Both passes are rank-based.
// groundtruths[i] holds the thinned boundary maps of every annotator of image i.
PRCurve evaluate(std::span<const ImageF> detections,
                 std::span<const std::vector<BinaryMap>> groundtruths,
                 const MatchConfig& cfg = {});

// Area under the precision-recall points (trapezoids between observed
// recalls, zero outside the observed range unless left_extend).
double average_precision(std::span<const PRPoint> points, bool left_extend);

// Global strictly increasing value map. Knots are the distinct input values.
struct MonotoneTransform {
  std::vector<float> in, out;
  float operator()(float v) const;
};

struct HistogramNormalization {
  MonotoneTransform transform;
  std::vector<ImageF> maps;
};

// Matches each map's value distribution to the pooled reference distribution
// by quantile mapping, averages the per-map transforms into one monotone map
// and applies it to every map. Constant inputs give the identity.
HistogramNormalization histogram_normalize(std::span<const ImageF> maps,
                                           std::span<const ImageF> reference);

// Normalized histogram over [lo, hi] with `bins` bins, pooled over maps.
std::vector<double> value_histogram(std::span<const ImageF> maps, int bins, float lo, float hi);

void write_pr_table(const PRCurve& curve, std::ostream& out);
void write_summary(const PRCurve& curve, std::ostream& out);
// RGB plot of the curve with iso-F contours.
ImageU8 render_pr_plot(const PRCurve& curve, int size = 400);

}  // namespace oef
