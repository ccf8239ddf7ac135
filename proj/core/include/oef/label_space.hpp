#pragma once

#include <numbers>
#include <vector>

namespace oef {

// Discretization of straight edges by signed distance d and orientation theta.
// Labels are 1 + theta_bin * n_dist_bins + dist_bin; label 0 is background.
struct LabelSpaceConfig {
  int patch_size = 16;
  int n_dist_bins = 15;
  int n_orient_bins = 8;

  int num_edge_labels() const { return n_dist_bins * n_orient_bins; }
  int num_classes() const { return num_edge_labels() + 1; }
  double half_patch() const { return patch_size / 2.0; }

  // Throws std::invalid_argument when the invariants do not hold.
  void validate() const;

  friend bool operator==(const LabelSpaceConfig&, const LabelSpaceConfig&) = default;
};

using EdgeLabel = int;
inline constexpr EdgeLabel kBackground = 0;

// Signed distance (pixels) and orientation (radians). theta is the direction
// of the edge tangent measured counter-clockwise from the +x axis with y up;
// theta = pi/2 is a vertical edge and theta = 0 a horizontal one. d > 0 when the
// patch center lies left of the edge traversed along theta.
struct EdgeParams {
  double d = 0.0;
  double theta = 0.0;
};

struct LabelBins {
  int dist_bin = 0;
  int orient_bin = 0;
  friend bool operator==(const LabelBins&, const LabelBins&) = default;
};

// Wraps theta into (-pi/2, pi/2], negating d once per half-turn applied.
EdgeParams canonicalize(EdgeParams params);

// Center of orientation bin j: 90deg - j * 180deg / m.
double orient_bin_center(int orient_bin, const LabelSpaceConfig& cfg);
double dist_bin_center(int dist_bin, const LabelSpaceConfig& cfg);

EdgeLabel encode(LabelBins bins, const LabelSpaceConfig& cfg);
LabelBins decode_bins(EdgeLabel k, const LabelSpaceConfig& cfg);

// Throws std::domain_error when |d| >= p/2.
EdgeLabel bin_params(EdgeParams params, const LabelSpaceConfig& cfg);

// Bin-center parameters of k. Throws std::domain_error for k outside [1, K].
EdgeParams decode(EdgeLabel k, const LabelSpaceConfig& cfg);

// The n labels sharing orientation bin `orient_bin`, ordered by distance bin.
std::vector<EdgeLabel> labels_for_orientation(int orient_bin,
                                              const LabelSpaceConfig& cfg);

inline double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }
inline double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

}  // namespace oef
