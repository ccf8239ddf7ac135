#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oef/image.hpp"
#include "oef/label_space.hpp"

namespace oef {

struct ChannelInfo {
  std::string name;
  int smoothing_radius = 0;
};

// Feature channels at half the input resolution. Each plane is stored with a
// reflected border of `pad` cells so patch reads never branch.
class ChannelStack {
 public:
  ChannelStack() = default;
  ChannelStack(int width, int height, std::vector<ChannelInfo> info, int pad);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_channels() const { return static_cast<int>(info_.size()); }
  int pad() const { return pad_; }
  int stride() const { return width_ + 2 * pad_; }
  const std::vector<ChannelInfo>& info() const { return info_; }

  // Unpadded cell value; x, y are reflected into range.
  float at(int channel, int x, int y) const {
    return plane(channel)[index(reflect_index(x, width_), reflect_index(y, height_))];
  }
  const float* plane(int channel) const {
    return data_.data() + static_cast<size_t>(channel) * plane_size();
  }
  float* plane(int channel) {
    return data_.data() + static_cast<size_t>(channel) * plane_size();
  }
  size_t index(int x, int y) const {
    return static_cast<size_t>(y + pad_) * stride() + (x + pad_);
  }

  // Copies an unpadded plane in and refreshes its border.
  void set_channel(int channel, const ImageF& values);
  ImageF channel(int channel) const;

 private:
  size_t plane_size() const {
    return static_cast<size_t>(stride()) * (height_ + 2 * pad_);
  }

  int width_ = 0;
  int height_ = 0;
  int pad_ = 0;
  std::vector<ChannelInfo> info_;
  std::vector<float> data_;
};

inline constexpr int kNumChannels = 13;

// Luminance + two chroma channels, gradient magnitude at smoothing radii {0, 2}
// and oriented gradient energy at 0/45/90/135 degrees for both radii, each
// 2x2 box-downsampled. `image` is RGB in [0, 1].
ChannelStack compute_channels(const ImageF& image, const LabelSpaceConfig& cfg);

// Separable triangle filter of radius r with reflected borders (r = 0 copies).
ImageF triangle_smooth(const ImageF& image, int radius);

// 2x2 box average to ceil(w/2) x ceil(h/2).
ImageF downsample2(const ImageF& image);

struct FeatureId {
  enum class Kind : std::uint8_t { kSingle = 0, kPairDiff = 1 };
  Kind kind = Kind::kSingle;
  std::uint8_t channel = 0;
  // Offsets from the patch center in channel cells.
  std::int8_t dx1 = 0, dy1 = 0, dx2 = 0, dy2 = 0;
  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

// Channel cell holding the patch center at image pixel `center`.
inline Pixel channel_cell(Pixel center) { return {center.x / 2, center.y / 2}; }

inline float read_feature_at(const ChannelStack& stack, size_t cell_index,
                             const FeatureId& f) {
  const float* plane = stack.plane(f.channel);
  const std::ptrdiff_t stride = stack.stride();
  const float v1 = plane[cell_index + f.dy1 * stride + f.dx1];
  if (f.kind == FeatureId::Kind::kSingle) return v1;
  return v1 - plane[cell_index + f.dy2 * stride + f.dx2];
}

// Center must lie inside the image the stack was computed from.
inline float read_feature(const ChannelStack& stack, Pixel center, const FeatureId& f) {
  const Pixel cell = channel_cell(center);
  return read_feature_at(stack, stack.index(cell.x, cell.y), f);
}

struct FeaturePoolConfig {
  int n_single = 1024;
  int n_pairdiff = 3072;
  std::uint64_t seed = 7;
  friend bool operator==(const FeaturePoolConfig&, const FeaturePoolConfig&) = default;
};

// Offsets uniform over the (p/2) x (p/2) cell window [-p/4, p/4), channels
// uniform. Singles first, then pair differences.
std::vector<FeatureId> enumerate_feature_pool(const LabelSpaceConfig& cfg, int n_channels,
                                              const FeaturePoolConfig& pool);

}  // namespace oef
