#include "oef/morphology.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace oef {
namespace {

// Ring order: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<int, 8> kRingDx = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kRingDy = {-1, -1, 0, 1, 1, 1, 0, -1};

std::array<int, 8> ring(const BinaryMap& mask, int x, int y) {
  std::array<int, 8> v{};
  for (int i = 0; i < 8; ++i) {
    int nx = x + kRingDx[i], ny = y + kRingDy[i];
    v[i] = mask.contains(nx, ny) && mask(nx, ny) ? 1 : 0;
  }
  return v;
}

int transitions(const std::array<int, 8>& v) {
  int t = 0;
  for (int i = 0; i < 8; ++i) t += (v[i] == 0 && v[(i + 1) % 8] == 1);
  return t;
}

// Removing p keeps its foreground neighbors in one 8-connected piece.
bool is_simple(const BinaryMap& mask, int x, int y) {
  const auto p = ring(mask, x, y);
  // 8-connected components among the set ring neighbors.
  int set = 0;
  for (int v : p) set += v;
  if (set <= 1) return false;
  std::array<int, 8> label{};
  label.fill(-1);
  int components = 0;
  for (int i = 0; i < 8; ++i) {
    if (!p[i] || label[i] >= 0) continue;
    std::vector<int> stack = {i};
    label[i] = components;
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      for (int j = 0; j < 8; ++j) {
        if (!p[j] || label[j] >= 0) continue;
        int dx = kRingDx[a] - kRingDx[j], dy = kRingDy[a] - kRingDy[j];
        if (dx >= -1 && dx <= 1 && dy >= -1 && dy <= 1) {
          label[j] = components;
          stack.push_back(j);
        }
      }
    }
    ++components;
  }
  return components == 1;
}

}  // namespace

int branch_count(const BinaryMap& mask, int x, int y) {
  return transitions(ring(mask, x, y));
}

int neighbor_count(const BinaryMap& mask, int x, int y) {
  int n = 0;
  for (int v : ring(mask, x, y)) n += v;
  return n;
}

bool has_2x2_block(const BinaryMap& mask) {
  for (int y = 0; y + 1 < mask.height(); ++y)
    for (int x = 0; x + 1 < mask.width(); ++x)
      if (mask(x, y) && mask(x + 1, y) && mask(x, y + 1) && mask(x + 1, y + 1))
        return true;
  return false;
}

BinaryMap thin(BinaryMap mask) {
  for (auto& v : mask.data()) v = v ? 1 : 0;
  // Peel one side at a time. Border pixels facing the current direction are
  // collected first and then removed one by one while they stay simple, so
  // connectivity is never broken and two-pixel diagonal strokes survive.
  constexpr std::array<Pixel, 4> kSides = {Pixel{0, -1}, Pixel{0, 1}, Pixel{1, 0}, Pixel{-1, 0}};
  std::vector<Pixel> border;
  bool changed = true;
  while (changed) {
    changed = false;
    for (Pixel side : kSides) {
      border.clear();
      for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
          if (!mask(x, y)) continue;
          const int nx = x + side.x, ny = y + side.y;
          if (!mask.contains(nx, ny) || !mask(nx, ny)) border.push_back({x, y});
        }
      for (auto [x, y] : border)
        if (is_simple(mask, x, y)) {
          mask(x, y) = 0;
          changed = true;
        }
    }
  }
  // Guard against any 2x2 square that survives the peeling.
  changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y + 1 < mask.height(); ++y) {
      for (int x = 0; x + 1 < mask.width(); ++x) {
        if (!(mask(x, y) && mask(x + 1, y) && mask(x, y + 1) && mask(x + 1, y + 1)))
          continue;
        const std::array<Pixel, 4> quad = {
            Pixel{x, y}, Pixel{x + 1, y}, Pixel{x, y + 1}, Pixel{x + 1, y + 1}};
        bool removed = false;
        for (auto [qx, qy] : quad) {
          if (is_simple(mask, qx, qy)) {
            mask(qx, qy) = 0;
            removed = true;
            break;
          }
        }
        if (!removed) mask(x, y) = 0;
        changed = true;
      }
    }
  }
  return mask;
}

BinaryMap fill_pinholes(BinaryMap mask) {
  BinaryMap out = mask;
  for (int y = 1; y + 1 < mask.height(); ++y)
    for (int x = 1; x + 1 < mask.width(); ++x)
      if (!mask(x, y) && mask(x - 1, y) && mask(x + 1, y) && mask(x, y - 1) &&
          mask(x, y + 1))
        out(x, y) = 1;
  return out;
}

DistanceField distance_transform(const BinaryMap& mask) {
  const int w = mask.width(), h = mask.height();
  DistanceField out{ImageF(w, h, 1, std::numeric_limits<float>::infinity()),
                    Image<Pixel>(w, h, 1, Pixel{-1, -1})};
  if (w == 0 || h == 0) return out;
  constexpr double kInf = 1e30;

  // Column pass: nearest foreground row in the same column.
  Image<int> nearest_row(w, h, 1, -1);
  for (int x = 0; x < w; ++x) {
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (mask(x, y)) last = y;
      nearest_row(x, y) = last;
    }
    last = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (mask(x, y)) last = y;
      int up = nearest_row(x, y);
      if (last >= 0 && (up < 0 || last - y < y - up)) nearest_row(x, y) = last;
    }
  }

  // Row pass: lower envelope of parabolas f(q) + (x - q)^2.
  std::vector<double> f(w), z(w + 1);
  std::vector<int> v(w);
  for (int y = 0; y < h; ++y) {
    for (int q = 0; q < w; ++q) {
      int r = nearest_row(q, y);
      f[q] = r < 0 ? kInf : static_cast<double>(r - y) * (r - y);
    }
    int k = 0;
    int first = -1;
    for (int q = 0; q < w; ++q) {
      if (f[q] >= kInf) continue;
      if (first < 0) {
        first = q;
        v[0] = q;
        z[0] = -kInf;
        z[1] = kInf;
        continue;
      }
      double s;
      while (true) {
        int p = v[k];
        s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
        if (s <= z[k] && k > 0) {
          --k;
        } else {
          break;
        }
      }
      if (s <= z[k]) {
        v[k] = q;
        z[k + 1] = kInf;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
      }
    }
    if (first < 0) continue;
    k = 0;
    for (int x = 0; x < w; ++x) {
      while (z[k + 1] < x) ++k;
      int q = v[k];
      double d2 = f[q] + double(x - q) * (x - q);
      out.distance(x, y) = static_cast<float>(std::sqrt(d2));
      out.nearest(x, y) = Pixel{q, nearest_row(q, y)};
    }
  }
  return out;
}

}  // namespace oef
