#include "oef/dataset.hpp"

#include <algorithm>

#include "oef/errors.hpp"
#include "oef/groundtruth.hpp"
#include "oef/image_io.hpp"

namespace oef {

std::vector<std::filesystem::path> list_examples(const std::filesystem::path& split_dir) {
  if (!std::filesystem::is_directory(split_dir))
    throw DataError("not a directory: " + split_dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(split_dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "image.png"))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

Example load_example(const std::filesystem::path& dir, bool require_annotations) {
  Example ex;
  ex.id = dir.filename().string();
  ex.image = to_float(read_png_rgb(dir / "image.png"));
  for (int a = 0;; ++a) {
    const auto path = dir / (std::to_string(a) + ".png");
    if (!std::filesystem::exists(path)) break;
    SegmentationMap seg = to_segmentation(read_png_gray16(path));
    if (seg.width() != ex.image.width() || seg.height() != ex.image.height())
      throw DataError("segmentation size differs from image in " + dir.string());
    ex.segmentations.push_back(std::move(seg));
  }
  if (require_annotations && ex.segmentations.empty())
    throw DataError("no segmentations (0.png) in " + dir.string());
  return ex;
}

std::vector<Example> load_split(const std::filesystem::path& split_dir, bool require_annotations) {
  std::vector<Example> out;
  for (const auto& dir : list_examples(split_dir)) out.push_back(load_example(dir, require_annotations));
  if (out.empty()) throw DataError("no examples in " + split_dir.string());
  return out;
}

std::vector<BinaryMap> boundary_maps(const Example& example) {
  std::vector<BinaryMap> out;
  for (const auto& seg : example.segmentations) out.push_back(extract_boundaries(seg).mask);
  return out;
}

}  // namespace oef
