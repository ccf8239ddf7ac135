#include "oef/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace oef {

ChannelStack::ChannelStack(int width, int height, std::vector<ChannelInfo> info, int pad)
    : width_(width), height_(height), pad_(pad), info_(std::move(info)) {
  data_.assign(plane_size() * info_.size(), 0.0f);
}

void ChannelStack::set_channel(int channel, const ImageF& values) {
  if (values.width() != width_ || values.height() != height_ || values.channels() != 1) {
    throw std::invalid_argument("ChannelStack::set_channel: size mismatch");
  }
  float* p = plane(channel);
  for (int y = -pad_; y < height_ + pad_; ++y) {
    const int sy = reflect_index(y, height_);
    for (int x = -pad_; x < width_ + pad_; ++x)
      p[index(x, y)] = values(reflect_index(x, width_), sy);
  }
}

ImageF ChannelStack::channel(int channel) const {
  ImageF out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) out(x, y) = plane(channel)[index(x, y)];
  return out;
}

ImageF triangle_smooth(const ImageF& image, int radius) {
  if (radius <= 0) return image;
  std::vector<float> kernel(2 * radius + 1);
  const float norm = static_cast<float>((radius + 1) * (radius + 1));
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = (radius + 1 - std::abs(i)) / norm;
  const int w = image.width(), h = image.height(), nc = image.channels();
  ImageF tmp(w, h, nc), out(w, h, nc);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * image(reflect_index(x + i, w), y, c);
        tmp(x, y, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp(x, reflect_index(y + i, h), c);
        out(x, y, c) = acc;
      }
  return out;
}

ImageF downsample2(const ImageF& image) {
  const int w = image.width(), h = image.height(), nc = image.channels();
  ImageF out((w + 1) / 2, (h + 1) / 2, nc);
  for (int y = 0; y < out.height(); ++y) {
    const int y0 = 2 * y, y1 = std::min(2 * y + 1, h - 1);
    for (int x = 0; x < out.width(); ++x) {
      const int x0 = 2 * x, x1 = std::min(2 * x + 1, w - 1);
      for (int c = 0; c < nc; ++c)
        out(x, y, c) = 0.25f * (image(x0, y0, c) + image(x1, y0, c) + image(x0, y1, c) +
                                image(x1, y1, c));
    }
  }
  return out;
}

namespace {

struct Gradient {
  ImageF magnitude;
  ImageF orientation;  // [0, pi)
};

// Per pixel, the color channel with the largest gradient magnitude wins.
Gradient color_gradient(const ImageF& image) {
  const int w = image.width(), h = image.height();
  Gradient g{ImageF(w, h), ImageF(w, h)};
  for (int y = 0; y < h; ++y) {
    const int ym = reflect_index(y - 1, h), yp = reflect_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = reflect_index(x - 1, w), xp = reflect_index(x + 1, w);
      float best = -1, bgx = 0, bgy = 0;
      for (int c = 0; c < image.channels(); ++c) {
        const float gx = 0.5f * (image(xp, y, c) - image(xm, y, c));
        const float gy = 0.5f * (image(x, yp, c) - image(x, ym, c));
        const float m = gx * gx + gy * gy;
        if (m > best) {
          best = m;
          bgx = gx;
          bgy = gy;
        }
      }
      g.magnitude(x, y) = std::sqrt(best);
      float o = std::atan2(bgy, bgx);
      if (o < 0) o += std::numbers::pi_v<float>;
      if (o >= std::numbers::pi_v<float>) o -= std::numbers::pi_v<float>;
      g.orientation(x, y) = o;
    }
  }
  return g;
}

}  // namespace

ChannelStack compute_channels(const ImageF& image, const LabelSpaceConfig& cfg) {
  if (image.channels() != 3) throw std::invalid_argument("compute_channels: expected RGB");
  if (image.width() < cfg.patch_size || image.height() < cfg.patch_size) {
    throw std::invalid_argument("compute_channels: image smaller than the patch");
  }
  const int w = image.width(), h = image.height();
  const int cw = (w + 1) / 2, ch = (h + 1) / 2;
  std::vector<ChannelInfo> info = {{"luminance", 0}, {"chroma_rg", 0}, {"chroma_yb", 0}};
  constexpr std::array<int, 2> kRadii = {0, 2};
  constexpr std::array<const char*, 4> kOrientNames = {"0", "45", "90", "135"};
  for (int r : kRadii) info.push_back({"grad_mag_r" + std::to_string(r), r});
  for (int r : kRadii)
    for (const char* o : kOrientNames)
      info.push_back({std::string("grad_orient") + o + "_r" + std::to_string(r), r});
  // Half the cell window plus one so every feature offset lands in the border.
  ChannelStack stack(cw, ch, std::move(info), cfg.patch_size / 4 + 1);

  ImageF opponent(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float r = image(x, y, 0), g = image(x, y, 1), b = image(x, y, 2);
      opponent(x, y, 0) = (r + g + b) / 3.0f;
      opponent(x, y, 1) = 0.5f * (r - g);
      opponent(x, y, 2) = 0.25f * (r + g) - 0.5f * b;
    }
  const ImageF color_small = downsample2(opponent);
  for (int c = 0; c < 3; ++c) {
    ImageF plane(cw, ch);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) plane(x, y) = color_small(x, y, c);
    stack.set_channel(c, plane);
  }

  int next = 3;
  std::array<Gradient, 2> grads;
  for (size_t i = 0; i < kRadii.size(); ++i) grads[i] = color_gradient(triangle_smooth(image, kRadii[i]));
  for (size_t i = 0; i < kRadii.size(); ++i) stack.set_channel(next++, downsample2(grads[i].magnitude));
  constexpr float kBinWidth = std::numbers::pi_v<float> / 4;
  for (size_t i = 0; i < kRadii.size(); ++i) {
    for (int o = 0; o < 4; ++o) {
      const float center = o * kBinWidth;
      ImageF energy(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          float diff = std::abs(grads[i].orientation(x, y) - center);
          diff = std::min(diff, std::numbers::pi_v<float> - diff);
          const float weight = std::max(0.0f, 1.0f - diff / kBinWidth);
          energy(x, y) = grads[i].magnitude(x, y) * weight;
        }
      stack.set_channel(next++, downsample2(energy));
    }
  }
  return stack;
}

std::vector<FeatureId> enumerate_feature_pool(const LabelSpaceConfig& cfg, int n_channels,
                                              const FeaturePoolConfig& pool) {
  if (pool.n_single < 0 || pool.n_pairdiff < 0 || pool.n_single + pool.n_pairdiff < 1) {
    throw std::invalid_argument("enumerate_feature_pool: empty pool");
  }
  const int half = cfg.patch_size / 4;
  std::mt19937_64 rng(pool.seed);
  std::uniform_int_distribution<int> channel(0, n_channels - 1);
  std::uniform_int_distribution<int> offset(-half, half - 1);
  std::vector<FeatureId> out;
  out.reserve(pool.n_single + pool.n_pairdiff);
  for (int i = 0; i < pool.n_single; ++i) {
    FeatureId f;
    f.kind = FeatureId::Kind::kSingle;
    f.channel = static_cast<std::uint8_t>(channel(rng));
    f.dx1 = static_cast<std::int8_t>(offset(rng));
    f.dy1 = static_cast<std::int8_t>(offset(rng));
    out.push_back(f);
  }
  for (int i = 0; i < pool.n_pairdiff; ++i) {
    FeatureId f;
    f.kind = FeatureId::Kind::kPairDiff;
    f.channel = static_cast<std::uint8_t>(channel(rng));
    f.dx1 = static_cast<std::int8_t>(offset(rng));
    f.dy1 = static_cast<std::int8_t>(offset(rng));
    f.dx2 = static_cast<std::int8_t>(offset(rng));
    f.dy2 = static_cast<std::int8_t>(offset(rng));
    out.push_back(f);
  }
  return out;
}

}  // namespace oef
