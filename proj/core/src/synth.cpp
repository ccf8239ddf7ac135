#include "oef/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include "oef/errors.hpp"
#include "oef/groundtruth.hpp"
#include "oef/image_io.hpp"

namespace oef {
namespace {

using Color = std::array<double, 3>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Shape {
  bool ellipse = true;
  double cx = 0, cy = 0;
  double a = 1, b = 1, cos_phi = 1, sin_phi = 0;  // ellipse
  std::vector<std::array<double, 2>> vertices;     // polygon
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;

  bool contains(double x, double y) const {
    if (x < min_x || x > max_x || y < min_y || y > max_y) return false;
    if (ellipse) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * cos_phi + dy * sin_phi) / a;
      const double v = (-dx * sin_phi + dy * cos_phi) / b;
      return u * u + v * v <= 1.0;
    }
    bool inside = false;
    for (size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
      const auto& p = vertices[i];
      const auto& q = vertices[j];
      if ((p[1] > y) != (q[1] > y) && x < (q[0] - p[0]) * (y - p[1]) / (q[1] - p[1]) + p[0])
        inside = !inside;
    }
    return inside;
  }
};

struct Texture {
  double fx = 0, fy = 0, phase = 0, amplitude = 0;
  double at(double x, double y) const {
    return amplitude * std::sin(2 * std::numbers::pi * (fx * x + fy * y) + phase);
  }
};

Shape random_shape(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double size = std::min(cfg.width, cfg.height);
  Shape s;
  s.cx = unit(rng) * cfg.width;
  s.cy = unit(rng) * cfg.height;
  s.ellipse = unit(rng) < cfg.ellipse_fraction;
  double extent = 0;
  if (s.ellipse) {
    s.a = (0.1 + 0.25 * unit(rng)) * size;
    s.b = (0.1 + 0.25 * unit(rng)) * size;
    const double phi = unit(rng) * std::numbers::pi;
    s.cos_phi = std::cos(phi);
    s.sin_phi = std::sin(phi);
    extent = std::max(s.a, s.b);
  } else {
    const int n = 3 + static_cast<int>(unit(rng) * 5);
    const double radius = (0.15 + 0.25 * unit(rng)) * size;
    std::vector<double> angles(n);
    for (auto& a : angles) a = unit(rng) * 2 * std::numbers::pi;
    std::sort(angles.begin(), angles.end());
    for (double a : angles) {
      const double r = radius * (0.55 + 0.45 * unit(rng));
      s.vertices.push_back({s.cx + r * std::cos(a), s.cy + r * std::sin(a)});
    }
    extent = radius;
  }
  s.min_x = s.cx - extent - 1;
  s.max_x = s.cx + extent + 1;
  s.min_y = s.cy - extent - 1;
  s.max_y = s.cy + extent + 1;
  return s;
}

Color random_color(const std::vector<Color>& used, double min_dist, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> channel(20.0, 235.0);
  Color best{};
  double best_dist = -1;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Color c{channel(rng), channel(rng), channel(rng)};
    double nearest = 1e9;
    for (const auto& u : used) {
      const double d = std::hypot(c[0] - u[0], c[1] - u[1], c[2] - u[2]);
      nearest = std::min(nearest, d);
    }
    if (nearest >= min_dist) return c;
    if (nearest > best_dist) {
      best_dist = nearest;
      best = c;
    }
  }
  return best;
}

// Relabels 4-connected components smaller than min_area with the id most
// common along their outer border.
SegmentationMap merge_small_regions(const SegmentationMap& seg, int min_area) {
  const int w = seg.width(), h = seg.height();
  SegmentationMap out = seg;
  Image<int> comp(w, h, 1, -1);
  std::vector<Pixel> stack, members;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      if (comp(x0, y0) >= 0) continue;
      const int id = seg(x0, y0);
      members.clear();
      stack.assign(1, {x0, y0});
      comp(x0, y0) = 1;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        members.push_back(p);
        const Pixel nb[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
        for (Pixel q : nb)
          if (seg.contains(q.x, q.y) && comp(q.x, q.y) < 0 && seg(q.x, q.y) == id) {
            comp(q.x, q.y) = 1;
            stack.push_back(q);
          }
      }
      if (static_cast<int>(members.size()) >= min_area) continue;
      std::vector<std::pair<int, int>> votes;  // (id, count)
      for (Pixel p : members) {
        const Pixel nb[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
        for (Pixel q : nb) {
          if (!seg.contains(q.x, q.y) || seg(q.x, q.y) == id) continue;
          const int other = seg(q.x, q.y);
          auto it = std::find_if(votes.begin(), votes.end(),
                                 [&](const auto& v) { return v.first == other; });
          if (it == votes.end()) votes.push_back({other, 1});
          else ++it->second;
        }
      }
      if (votes.empty()) continue;
      const auto best = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
        return a.second < b.second || (a.second == b.second && a.first > b.first);
      });
      for (Pixel p : members) out(p.x, p.y) = best->first;
    }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (width < 16 || height < 16) throw ConfigError("synth: image must be at least 16x16");
  if (min_shapes < 1 || max_shapes < min_shapes) throw ConfigError("synth: bad shape count range");
  if (supersample < 1) throw ConfigError("synth: supersample must be >= 1");
  if (n_annotators < 1) throw ConfigError("synth: need at least one annotator");
  if (noise_sigma < 0 || texture_amplitude < 0) throw ConfigError("synth: negative noise");
}

SynthExample generate_scene(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_shapes =
      cfg.min_shapes + static_cast<int>(unit(rng) * (cfg.max_shapes - cfg.min_shapes + 1));

  std::vector<Shape> shapes;
  std::vector<Color> colors;
  std::vector<Texture> textures;
  auto add_region_style = [&] {
    colors.push_back(random_color(colors, cfg.min_color_distance, rng));
    Texture t;
    if (cfg.texture_amplitude > 0) {
      const double freq = 0.06 + 0.12 * unit(rng);
      const double dir = unit(rng) * std::numbers::pi;
      t = {freq * std::cos(dir), freq * std::sin(dir), unit(rng) * 2 * std::numbers::pi,
           cfg.texture_amplitude * unit(rng)};
    }
    textures.push_back(t);
  };
  add_region_style();  // background
  for (int i = 0; i < n_shapes; ++i) {
    shapes.push_back(random_shape(cfg, rng));
    add_region_style();
  }
  // Region r (0 = background) has id r + 1; later shapes occlude earlier ones.
  auto region_at = [&](double x, double y) {
    for (int i = n_shapes - 1; i >= 0; --i)
      if (shapes[i].contains(x, y)) return i + 1;
    return 0;
  };

  SynthExample ex;
  const int w = cfg.width, h = cfg.height, ss = cfg.supersample;
  SegmentationMap seg(w, h);
  ex.image = ImageU8(w, h, 3);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int r = region_at(x + 0.5, y + 0.5);
      seg(x, y) = r + 1;
      Color acc{0, 0, 0};
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double px = x + (sx + 0.5) / ss, py = y + (sy + 0.5) / ss;
          const int q = ss == 1 ? r : region_at(px, py);
          const double t = textures[q].at(px, py);
          for (int c = 0; c < 3; ++c) acc[c] += colors[q][c] + t;
        }
      for (int c = 0; c < 3; ++c) {
        const double v = acc[c] / (ss * ss) + (cfg.noise_sigma > 0 ? noise(rng) : 0.0);
        ex.image(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  ex.annotators.push_back(seg);
  const int min_area = static_cast<int>(std::ceil(cfg.merge_area_fraction * w * h));
  for (int a = 1; a < cfg.n_annotators; ++a) ex.annotators.push_back(merge_small_regions(seg, min_area));
  return ex;
}

void save_example(const std::filesystem::path& dir, const SynthExample& example) {
  std::filesystem::create_directories(dir);
  write_png(dir / "image.png", example.image);
  for (size_t a = 0; a < example.annotators.size(); ++a)
    write_png(dir / (std::to_string(a) + ".png"), from_segmentation(example.annotators[a]));
}

int write_synthetic_dataset(const std::filesystem::path& root, const SynthDatasetSpec& spec,
                            const SynthConfig& cfg) {
  cfg.validate();
  const std::pair<const char*, int> splits[] = {
      {"train", spec.n_train}, {"val", spec.n_val}, {"test", spec.n_test}};
  int written = 0;
  for (size_t s = 0; s < 3; ++s) {
    for (int i = 0; i < splits[s].second; ++i) {
      const std::uint64_t seed = splitmix64(spec.seed * 0x100000001b3ULL + s * 1000003ULL + i);
      char name[32];
      std::snprintf(name, sizeof name, "img_%04d", i);
      save_example(root / splits[s].first / name, generate_scene(cfg, seed));
      ++written;
    }
  }
  return written;
}

double boundary_density(const SynthExample& example) {
  double total = 0;
  for (const auto& seg : example.annotators) {
    const EdgePixelGraph g = extract_boundaries(seg);
    double on = 0;
    for (auto v : g.mask.data()) on += v != 0;
    total += on / static_cast<double>(seg.pixel_count());
  }
  return total / static_cast<double>(example.annotators.size());
}

}  // namespace oef
