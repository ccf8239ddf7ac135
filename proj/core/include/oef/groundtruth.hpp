#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oef/image.hpp"
#include "oef/label_space.hpp"
#include "oef/morphology.hpp"

namespace oef {

struct EdgeList {
  std::vector<Pixel> pixels;  // ordered chain, 8-connected
  bool closed = false;
};

// Thinned boundary mask with its pixels linked into ordered chains. Lists are
// broken at junctions; each junction pixel is attached to the end of the
// longest adjacent list so that every boundary pixel is in exactly one list.
struct EdgePixelGraph {
  BinaryMap mask;
  BinaryMap junction_mask;
  std::vector<EdgeList> lists;
  std::vector<Pixel> junctions;
  Image<std::int32_t> list_index;  // -1 off the mask
  Image<std::int32_t> list_position;

  int width() const { return mask.width(); }
  int height() const { return mask.height(); }
  bool is_junction(Pixel p) const;
};

// Links an already thinned mask into lists.
EdgePixelGraph link_edges(BinaryMap mask);

EdgePixelGraph extract_boundaries(const SegmentationMap& seg);

// Deletes lists shorter than min_len that hang off a junction with a free far
// end, then re-links. One pass.
EdgePixelGraph remove_spurs(const EdgePixelGraph& g, int min_len = 7);

// Tangent orientation at q in (-pi/2, pi/2] from a quadratic fit over the list
// pixels within +-window positions of q (arc-length parameter).
double estimate_theta(const EdgePixelGraph& g, Pixel q, int window = 6);

// Everything needed to label patches of one annotation.
struct GroundTruth {
  SegmentationMap segments;
  EdgePixelGraph graph;
  DistanceField field;
  ImageF theta;  // per boundary pixel; NaN elsewhere
};

GroundTruth prepare_groundtruth(const SegmentationMap& seg, int spur_len = 7,
                                int theta_window = 6);

EdgeLabel label_patch(const GroundTruth& gt, Pixel center, const LabelSpaceConfig& cfg);

// Signed distance of `center` to the straight edge through q with orientation
// theta; positive on the left of the edge.
double signed_edge_distance(Pixel center, Pixel q, double theta);

// Distinct segment ids inside the p x p window around center, capped at cap.
int count_segments(const SegmentationMap& seg, Pixel center, int patch_size, int cap = 3);

struct LabeledPatch {
  std::int32_t image = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t annotator = 0;
  EdgeLabel label = kBackground;
  friend bool operator==(const LabeledPatch&, const LabeledPatch&) = default;
};

struct LabeledPatchSet {
  std::vector<LabeledPatch> patches;
  std::vector<std::int64_t> class_counts;  // size K + 1

  // Diagnostics from sampling.
  std::int64_t draws = 0;
  std::int64_t rejected_multi_segment = 0;
  std::int64_t non_background_draws = 0;
};

struct SamplingOptions {
  int n_per_class = 100;
  std::uint64_t seed = 1;
  // Candidate draws allowed per requested example before giving up.
  int max_draws_per_example = 60;
};

// Uniformly samples (image, annotator, center) candidates, rejects windows with
// more than two segments and fills every class up to n_per_class. Classes that
// cannot be filled are reported through warn() and all classes are truncated
// to the smallest non-empty count. groundtruths[image][annotator].
LabeledPatchSet sample_training_set(std::span<const std::vector<GroundTruth>> groundtruths,
                                    const LabelSpaceConfig& cfg,
                                    const SamplingOptions& options);

}  // namespace oef
