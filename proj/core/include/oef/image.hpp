#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace oef {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Dense row-major image with interleaved channels.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      throw std::invalid_argument("Image: invalid dimensions");
    }
    data_.assign(static_cast<size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  size_t pixel_count() const { return static_cast<size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y, int c = 0) {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  const T& operator()(int x, int y, int c = 0) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::span<T> row(int y) {
    return std::span<T>(data_).subspan(static_cast<size_t>(y) * width_ * channels_,
                                       static_cast<size_t>(width_) * channels_);
  }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(
        static_cast<size_t>(y) * width_ * channels_,
        static_cast<size_t>(width_) * channels_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using BinaryMap = Image<std::uint8_t>;
using SegmentationMap = Image<std::int32_t>;

// Mirror index into [0, n) without repeating the edge sample (…2 1 0 1 2…).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

ImageF to_float(const ImageU8& src);

// Bilinear resampling with pixel-center alignment. Applies to every channel.
ImageF resize_bilinear(const ImageF& src, int width, int height);

// Nearest-neighbor resampling, used for label maps.
SegmentationMap resize_nearest(const SegmentationMap& src, int width, int height);

ImageF flip_horizontal(const ImageF& src);

}  // namespace oef
