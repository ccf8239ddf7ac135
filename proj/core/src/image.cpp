#include "oef/image.hpp"

#include <algorithm>
#include <cmath>

namespace oef {

ImageF to_float(const ImageU8& src) {
  ImageF out(src.width(), src.height(), src.channels());
  auto in = src.data();
  auto dst = out.data();
  for (size_t i = 0; i < in.size(); ++i) dst[i] = in[i] / 255.0f;
  return out;
}

ImageF resize_bilinear(const ImageF& src, int width, int height) {
  if (width <= 0 || height <= 0 || src.empty()) {
    throw std::invalid_argument("resize_bilinear: empty source or target");
  }
  if (width == src.width() && height == src.height()) return src;
  ImageF out(width, height, src.channels());
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;

  struct Tap {
    int i0, i1;
    float w1;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> t(n_out);
    for (int i = 0; i < n_out; ++i) {
      double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, n_in - 1.0);
      int i0 = static_cast<int>(std::floor(s));
      int i1 = std::min(i0 + 1, n_in - 1);
      t[i] = {i0, i1, static_cast<float>(s - i0)};
    }
    return t;
  };
  const auto tx = taps(width, src.width(), sx);
  const auto ty = taps(height, src.height(), sy);
  const int nc = src.channels();
  for (int y = 0; y < height; ++y) {
    const Tap& v = ty[y];
    for (int x = 0; x < width; ++x) {
      const Tap& h = tx[x];
      for (int c = 0; c < nc; ++c) {
        float top = src(h.i0, v.i0, c) * (1 - h.w1) + src(h.i1, v.i0, c) * h.w1;
        float bot = src(h.i0, v.i1, c) * (1 - h.w1) + src(h.i1, v.i1, c) * h.w1;
        out(x, y, c) = top * (1 - v.w1) + bot * v.w1;
      }
    }
  }
  return out;
}

SegmentationMap resize_nearest(const SegmentationMap& src, int width, int height) {
  if (width <= 0 || height <= 0 || src.empty()) {
    throw std::invalid_argument("resize_nearest: empty source or target");
  }
  SegmentationMap out(width, height, src.channels());
  for (int y = 0; y < height; ++y) {
    int syi = std::min(src.height() - 1,
                       static_cast<int>((y + 0.5) * src.height() / height));
    for (int x = 0; x < width; ++x) {
      int sxi = std::min(src.width() - 1,
                         static_cast<int>((x + 0.5) * src.width() / width));
      for (int c = 0; c < src.channels(); ++c) out(x, y, c) = src(sxi, syi, c);
    }
  }
  return out;
}

ImageF flip_horizontal(const ImageF& src) {
  ImageF out(src.width(), src.height(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c)
        out(src.width() - 1 - x, y, c) = src(x, y, c);
  return out;
}

}  // namespace oef
