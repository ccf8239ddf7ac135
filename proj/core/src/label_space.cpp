#include "oef/label_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace oef {
namespace {

constexpr double kPi = std::numbers::pi;

int max_dist_offset(const LabelSpaceConfig& cfg) { return (cfg.n_dist_bins - 1) / 2; }

}  // namespace

void LabelSpaceConfig::validate() const {
  if (patch_size < 4 || patch_size % 2 != 0) {
    throw std::invalid_argument("patch_size must be even and >= 4, got " +
                                std::to_string(patch_size));
  }
  if (n_dist_bins < 1 || n_dist_bins % 2 == 0) {
    throw std::invalid_argument("n_dist_bins must be odd, got " +
                                std::to_string(n_dist_bins));
  }
  if (n_orient_bins < 2) {
    throw std::invalid_argument("n_orient_bins must be >= 2, got " +
                                std::to_string(n_orient_bins));
  }
}

EdgeParams canonicalize(EdgeParams params) {
  const double turns = std::ceil((params.theta - kPi / 2) / kPi);
  params.theta -= turns * kPi;
  // Guard the open end of the interval against rounding.
  if (params.theta <= -kPi / 2) {
    params.theta += kPi;
    params.d = -params.d;
  }
  if (static_cast<long long>(turns) % 2 != 0) params.d = -params.d;
  return params;
}

double orient_bin_center(int orient_bin, const LabelSpaceConfig& cfg) {
  return kPi / 2 - orient_bin * kPi / cfg.n_orient_bins;
}

double dist_bin_center(int dist_bin, const LabelSpaceConfig& cfg) {
  return static_cast<double>(dist_bin - max_dist_offset(cfg));
}

EdgeLabel encode(LabelBins bins, const LabelSpaceConfig& cfg) {
  if (bins.dist_bin < 0 || bins.dist_bin >= cfg.n_dist_bins || bins.orient_bin < 0 ||
      bins.orient_bin >= cfg.n_orient_bins) {
    throw std::domain_error("encode: bin index out of range");
  }
  return 1 + bins.orient_bin * cfg.n_dist_bins + bins.dist_bin;
}

LabelBins decode_bins(EdgeLabel k, const LabelSpaceConfig& cfg) {
  if (k < 1 || k > cfg.num_edge_labels()) {
    throw std::domain_error("decode: label " + std::to_string(k) +
                            " is not an edge label");
  }
  return {(k - 1) % cfg.n_dist_bins, (k - 1) / cfg.n_dist_bins};
}

EdgeLabel bin_params(EdgeParams params, const LabelSpaceConfig& cfg) {
  if (!(std::abs(params.d) < cfg.half_patch())) {
    throw std::domain_error("bin_params: |d| must be < p/2");
  }
  params = canonicalize(params);
  const double step = kPi / cfg.n_orient_bins;
  const double pos = (kPi / 2 - params.theta) / step;
  // Nearest center; exact ties go to the lower index.
  int orient_bin = static_cast<int>(std::ceil(pos - 0.5));
  orient_bin = std::max(orient_bin, 0);
  if (orient_bin >= cfg.n_orient_bins) {
    // Past the last center: the nearest center is bin 0 seen across the seam.
    orient_bin = 0;
    params.d = -params.d;
  }
  const int max_offset = max_dist_offset(cfg);
  const int offset =
      std::clamp(static_cast<int>(std::round(params.d)), -max_offset, max_offset);
  return encode({offset + max_offset, orient_bin}, cfg);
}

EdgeParams decode(EdgeLabel k, const LabelSpaceConfig& cfg) {
  const LabelBins bins = decode_bins(k, cfg);
  return {dist_bin_center(bins.dist_bin, cfg), orient_bin_center(bins.orient_bin, cfg)};
}

std::vector<EdgeLabel> labels_for_orientation(int orient_bin,
                                              const LabelSpaceConfig& cfg) {
  if (orient_bin < 0 || orient_bin >= cfg.n_orient_bins) {
    throw std::domain_error("labels_for_orientation: orientation bin out of range");
  }
  std::vector<EdgeLabel> labels(cfg.n_dist_bins);
  for (int i = 0; i < cfg.n_dist_bins; ++i) labels[i] = encode({i, orient_bin}, cfg);
  return labels;
}

}  // namespace oef
