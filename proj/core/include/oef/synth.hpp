#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "oef/image.hpp"

namespace oef {

struct SynthConfig {
  int width = 200;
  int height = 150;
  int min_shapes = 4;
  int max_shapes = 8;
  double ellipse_fraction = 0.4;  // remaining shapes are random star polygons
  double noise_sigma = 4.0;       // Gaussian noise, 8-bit units
  double texture_amplitude = 6.0;  // per-region stripe texture; 0 disables
  double min_color_distance = 70.0;  // RGB distance between any two region colors
  int supersample = 4;               // anti-aliasing of the rendered image
  int n_annotators = 2;
  // Annotators after the first merge connected regions smaller than this
  // fraction of the image into their most common neighbor.
  double merge_area_fraction = 0.004;

  void validate() const;
};

struct SynthExample {
  ImageU8 image;                             // RGB
  std::vector<SegmentationMap> annotators;  // ids start at 1
};

// Deterministic for a given (config, seed).
SynthExample generate_scene(const SynthConfig& cfg, std::uint64_t seed);

struct SynthDatasetSpec {
  int n_train = 60;
  int n_val = 20;
  int n_test = 50;
  std::uint64_t seed = 1;
};

// Writes <root>/<split>/<id>/image.png and <annotator>.png for the train, val
// and test splits. Returns the number of examples written.
int write_synthetic_dataset(const std::filesystem::path& root, const SynthDatasetSpec& spec,
                            const SynthConfig& cfg);

void save_example(const std::filesystem::path& dir, const SynthExample& example);

// Fraction of pixels on a ground-truth boundary, averaged over annotators.
double boundary_density(const SynthExample& example);

}  // namespace oef
