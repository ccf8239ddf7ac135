#pragma once

#include <vector>

#include "oef/calibration.hpp"
#include "oef/forest.hpp"
#include "oef/image.hpp"
#include "oef/label_space.hpp"

namespace oef {

// Per-label straight edge geometry in patch coordinates. Offsets u span
// [-p/2, p/2) on both axes; the line of label (d, theta) is
// s(u) = -sin(theta) * ux - cos(theta) * uy + d = 0 (image y down).
class EdgeMaskTable {
 public:
  explicit EdgeMaskTable(const LabelSpaceConfig& cfg);

  const LabelSpaceConfig& config() const { return cfg_; }
  // Midpoint-rule rasterization: -h < s(u) <= h with h = max(|sin|, |cos|) / 2.
  const std::vector<Pixel>& straight(EdgeLabel k) const { return straight_[k]; }
  double signed_distance(EdgeLabel k, Pixel u) const;
  // Unit step along the axis where s changes fastest.
  Pixel major_step(EdgeLabel k) const { return major_[k]; }
  int orientation_of(EdgeLabel k) const { return (k - 1) / cfg_.n_dist_bins; }

 private:
  LabelSpaceConfig cfg_;
  std::vector<std::vector<Pixel>> straight_;
  std::vector<double> sin_, cos_, d_;
  std::vector<Pixel> major_;
};

// Reusable buffers for sharpening one patch at a time.
struct SharpenScratch {
  std::vector<std::uint8_t> side;
  std::vector<float> color;
};

// Offsets of the sharpened mask of label k at `center`. sh = 0 returns the
// straight mask. For sh > 0 the patch is split just after the straight mask
// along the major step, the mean color of each side is computed, pixels with
// |s(u)| <= sh are reassigned to the nearer mean, and each transition along
// the major step contributes the pixel before it (the ground-truth boundary
// convention).
void sharpen_offsets(const ImageF& image, Pixel center, EdgeLabel k, int sh,
                     const EdgeMaskTable& table, SharpenScratch& scratch,
                     std::vector<Pixel>& out);

// p x p binary mask, (0, 0) is offset (-p/2, -p/2).
BinaryMap sharpen_mask(const ImageF& image, Pixel center, EdgeLabel k, int sh,
                       const EdgeMaskTable& table);

struct OrientedEdgeMap {
  ImageF strength;  // m channels, one per orientation bin
  double scale = 1.0;

  int width() const { return strength.width(); }
  int height() const { return strength.height(); }
  int orientations() const { return strength.channels(); }
};

struct CompositeOptions {
  // Patches whose weight is <= this are skipped (0 keeps the sum exact).
  float score_threshold = 0.0f;
  int threads = 1;
};

// E(x, y, theta) = sum over labels of orientation theta and patches (i, j)
// covering (x, y) of w(i, j, k) * M_(i,j,k)(x - i, y - j).
OrientedEdgeMap composite(const ScoreVolume& scores, const ImageF& image, int sh,
                          const EdgeMaskTable& table, const CompositeOptions& options = {});

// Translates every distance channel onto the d = 0 line of its orientation
// (offset d * (sin, cos), rounded) and composites one channel per orientation.
OrientedEdgeMap composite_collapsed(const ScoreVolume& scores, const ImageF& image, int sh,
                                    const EdgeMaskTable& table,
                                    const CompositeOptions& options = {});

// The collapsed per-orientation weights (m channels), exposed for tests.
ImageF collapse_scores(const ScoreVolume& scores, const EdgeMaskTable& table);

struct PyramidConfig {
  std::vector<double> scales = {0.25, 0.5, 1.0, 2.0};
  std::vector<int> sharpen = {1, 1, 2, 2};
  std::vector<double> beta = {8.0, 8.0, 8.0, 8.0};

  void validate() const;
};

struct DetectOptions {
  FusionMode mode = FusionMode::kAverage;
  CalibrationMode calibration = CalibrationMode::kExponential;
  bool collapsed = true;
  bool align_scales = true;
  float score_threshold = 0.0f;
  int threads = 1;
};

struct ScaleScores {
  double scale = 1.0;
  ImageF image;  // resized input
  ScoreVolume scores;
};

// Resizes the image, computes channels and runs the forest densely. Returns
// an empty image when the scaled image is smaller than the patch.
ScaleScores score_scale(const ImageF& image, const Forest& forest, double scale,
                        FusionMode mode, int threads = 1);

// Boundary pixels lie half a pixel before the true boundary along the major
// axis of their orientation, at whatever resolution they were detected. After
// upsampling by f > 1 that offset becomes f / 2, so channel j is translated by
// (f - 1) / 2 pixels along its major axis to match full-resolution ground
// truth. Downsampling and align = false use plain bilinear resizing.
ImageF resize_oriented(const ImageF& strength, int width, int height, const EdgeMaskTable& table,
                       bool align);

// Calibrates, composites and resizes back to width x height.
OrientedEdgeMap fuse_scale(const ScaleScores& scaled, const EdgeMaskTable& table,
                           const CalibrationModel& calibration, int sh, bool collapsed,
                           int width, int height, const CompositeOptions& options = {},
                           bool align = true);

// Unweighted mean of the per-scale maps; scales that do not fit are skipped
// with a warning.
OrientedEdgeMap detect_multiscale(const ImageF& image, const Forest& forest,
                                  const PyramidConfig& pyramid,
                                  const DetectOptions& options = {});

OrientedEdgeMap average_maps(const std::vector<OrientedEdgeMap>& maps);

// Max-over-orientation strength (single channel).
ImageF max_strength(const OrientedEdgeMap& e);

// Suppresses pixels that are not maximal along the normal of their strongest
// orientation (bilinear neighbors at +-1 px), then thins the support.
ImageF nms(const OrientedEdgeMap& e);

}  // namespace oef
