#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oef/image.hpp"

namespace oef {

// One image with every annotator's segmentation. On disk an example is a
// directory holding image.png (8-bit color) and 0.png, 1.png, ... (16-bit
// segment ids).
struct Example {
  std::string id;
  ImageF image;  // RGB in [0, 1]
  std::vector<SegmentationMap> segmentations;
};

// Example directories below split_dir, sorted by name.
std::vector<std::filesystem::path> list_examples(const std::filesystem::path& split_dir);

// Throws DataError if the image is missing or sizes disagree. Annotations
// are optional when require_annotations is false.
Example load_example(const std::filesystem::path& dir, bool require_annotations = true);

std::vector<Example> load_split(const std::filesystem::path& split_dir,
                                bool require_annotations = true);

// Thinned boundary maps of every annotator, the benchmark ground truth.
std::vector<BinaryMap> boundary_maps(const Example& example);

}  // namespace oef
