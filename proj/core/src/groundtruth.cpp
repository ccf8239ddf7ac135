#include "oef/groundtruth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <unordered_set>

#include "oef/log.hpp"

namespace oef {
namespace {

// 4-neighbors first so that chains follow staircases pixel by pixel.
constexpr std::array<int, 8> kDx = {0, 1, 0, -1, 1, 1, -1, -1};
constexpr std::array<int, 8> kDy = {-1, 0, 1, 0, -1, 1, 1, -1};

bool adjacent(Pixel a, Pixel b) {
  return a != b && std::abs(a.x - b.x) <= 1 && std::abs(a.y - b.y) <= 1;
}

bool on(const BinaryMap& m, int x, int y) { return m.contains(x, y) && m(x, y); }

// Junction pixel 8-adjacent to p other than `except`, or {-1,-1}.
Pixel adjacent_junction(const BinaryMap& junctions, Pixel p, Pixel except) {
  for (int i = 0; i < 8; ++i) {
    Pixel n{p.x + kDx[i], p.y + kDy[i]};
    if (n != except && on(junctions, n.x, n.y)) return n;
  }
  return {-1, -1};
}

double wrap_orientation(double tx, double ty) {
  // Image y points down; orientation is measured with y up.
  return canonicalize({0.0, std::atan2(-ty, tx)}).theta;
}

// Least-squares polynomial of degree <= 2 in t; returns the linear coefficient.
double fit_slope(std::span<const double> t, std::span<const double> v, int degree) {
  const int n = degree + 1;
  std::array<std::array<double, 4>, 3> a{};
  for (size_t i = 0; i < t.size(); ++i) {
    std::array<double, 3> basis = {1.0, t[i], t[i] * t[i]};
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) a[r][c] += basis[r] * basis[c];
      a[r][3] += basis[r] * v[i];
    }
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    if (std::abs(a[col][col]) < 1e-12) return 0.0;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return a[1][3] / a[1][1];
}

}  // namespace

bool EdgePixelGraph::is_junction(Pixel p) const { return on(junction_mask, p.x, p.y); }

EdgePixelGraph link_edges(BinaryMap mask) {
  const int w = mask.width(), h = mask.height();
  for (auto& v : mask.data()) v = v ? 1 : 0;
  EdgePixelGraph g;
  g.junction_mask = BinaryMap(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y) && branch_count(mask, x, y) >= 3) {
        g.junction_mask(x, y) = 1;
        g.junctions.push_back({x, y});
      }

  BinaryMap visited(w, h);
  auto trace = [&](Pixel start, Pixel origin) {
    EdgeList list;
    Pixel cur = start;
    while (true) {
      visited(cur.x, cur.y) = 1;
      list.pixels.push_back(cur);
      if (adjacent_junction(g.junction_mask, cur, origin).x >= 0) break;
      Pixel next{-1, -1};
      for (int i = 0; i < 8; ++i) {
        int nx = cur.x + kDx[i], ny = cur.y + kDy[i];
        if (on(mask, nx, ny) && !g.junction_mask(nx, ny) && !visited(nx, ny)) {
          next = {nx, ny};
          break;
        }
      }
      if (next.x < 0) break;
      cur = next;
    }
    return list;
  };

  for (Pixel j : g.junctions) {
    for (int i = 0; i < 8; ++i) {
      int nx = j.x + kDx[i], ny = j.y + kDy[i];
      if (on(mask, nx, ny) && !g.junction_mask(nx, ny) && !visited(nx, ny))
        g.lists.push_back(trace({nx, ny}, j));
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y) && !g.junction_mask(x, y) && !visited(x, y) &&
          branch_count(mask, x, y) <= 1)
        g.lists.push_back(trace({x, y}, {-1, -1}));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y) && !g.junction_mask(x, y) && !visited(x, y)) {
        EdgeList list = trace({x, y}, {-1, -1});
        list.closed = list.pixels.size() >= 4 &&
                      adjacent(list.pixels.front(), list.pixels.back());
        g.lists.push_back(std::move(list));
      }

  for (Pixel j : g.junctions) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(g.lists.size()); ++i) {
      const auto& px = g.lists[i].pixels;
      if (g.lists[i].closed) continue;
      if (!adjacent(px.front(), j) && !adjacent(px.back(), j)) continue;
      if (best < 0 || px.size() > g.lists[best].pixels.size()) best = i;
    }
    if (best < 0) {
      g.lists.push_back({{j}, false});
      continue;
    }
    auto& px = g.lists[best].pixels;
    if (adjacent(px.back(), j)) {
      px.push_back(j);
    } else {
      px.insert(px.begin(), j);
    }
  }

  g.list_index = Image<std::int32_t>(w, h, 1, -1);
  g.list_position = Image<std::int32_t>(w, h, 1, -1);
  for (int i = 0; i < static_cast<int>(g.lists.size()); ++i) {
    const auto& px = g.lists[i].pixels;
    for (int k = 0; k < static_cast<int>(px.size()); ++k) {
      g.list_index(px[k].x, px[k].y) = i;
      g.list_position(px[k].x, px[k].y) = k;
    }
  }
  g.mask = std::move(mask);
  return g;
}

EdgePixelGraph extract_boundaries(const SegmentationMap& seg) {
  const int w = seg.width(), h = seg.height();
  BinaryMap mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x + 1 < w && seg(x + 1, y) != seg(x, y)) ||
          (y + 1 < h && seg(x, y + 1) != seg(x, y)))
        mask(x, y) = 1;
  return link_edges(thin(fill_pinholes(std::move(mask))));
}

EdgePixelGraph remove_spurs(const EdgePixelGraph& g, int min_len) {
  BinaryMap mask = g.mask;
  bool removed = false;
  auto touches_junction = [&](Pixel p) {
    return g.is_junction(p) || adjacent_junction(g.junction_mask, p, {-1, -1}).x >= 0;
  };
  for (const EdgeList& list : g.lists) {
    if (list.closed) continue;
    std::vector<Pixel> body;
    for (Pixel p : list.pixels)
      if (!g.is_junction(p)) body.push_back(p);
    if (body.empty() || static_cast<int>(body.size()) >= min_len) continue;
    const bool front_j = touches_junction(body.front());
    const bool back_j = touches_junction(body.back());
    if (front_j == back_j) continue;
    const Pixel free_end = front_j ? body.back() : body.front();
    if (body.size() > 1 && branch_count(g.mask, free_end.x, free_end.y) != 1) continue;
    for (Pixel p : body) mask(p.x, p.y) = 0;
    removed = true;
  }
  if (!removed) return g;
  return link_edges(std::move(mask));
}

double estimate_theta(const EdgePixelGraph& g, Pixel q, int window) {
  if (!g.mask.contains(q.x, q.y) || g.list_index(q.x, q.y) < 0) {
    throw std::invalid_argument("estimate_theta: pixel is not on the boundary");
  }
  const EdgeList& list = g.lists[g.list_index(q.x, q.y)];
  const auto& px = list.pixels;
  const int n = static_cast<int>(px.size());
  if (n < 3) {
    if (n == 1) return 0.0;
    return wrap_orientation(px.back().x - px.front().x, px.back().y - px.front().y);
  }
  const int pos = g.list_position(q.x, q.y);
  auto at = [&](int i) -> Pixel {
    if (list.closed) return px[((i % n) + n) % n];
    return px[i];
  };
  int lo = pos - window, hi = pos + window;
  if (list.closed) {
    if (2 * window + 1 > n) {
      lo = pos - (n - 1) / 2;
      hi = lo + n - 1;
    }
  } else {
    lo = std::max(lo, 0);
    hi = std::min(hi, n - 1);
  }
  std::vector<double> t, xs, ys;
  const int count = hi - lo + 1;
  t.resize(count);
  xs.resize(count);
  ys.resize(count);
  const int center = pos - lo;
  t[center] = 0.0;
  for (int i = center + 1; i < count; ++i) {
    Pixel a = at(lo + i - 1), b = at(lo + i);
    t[i] = t[i - 1] + std::hypot(b.x - a.x, b.y - a.y);
  }
  for (int i = center - 1; i >= 0; --i) {
    Pixel a = at(lo + i + 1), b = at(lo + i);
    t[i] = t[i + 1] - std::hypot(b.x - a.x, b.y - a.y);
  }
  for (int i = 0; i < count; ++i) {
    Pixel p = at(lo + i);
    xs[i] = p.x - q.x;
    ys[i] = p.y - q.y;
  }
  const int degree = std::min(2, count - 1);
  const double tx = fit_slope(t, xs, degree);
  const double ty = fit_slope(t, ys, degree);
  if (tx == 0.0 && ty == 0.0) {
    return wrap_orientation(px.back().x - px.front().x, px.back().y - px.front().y);
  }
  return wrap_orientation(tx, ty);
}

GroundTruth prepare_groundtruth(const SegmentationMap& seg, int spur_len,
                                int theta_window) {
  GroundTruth gt;
  gt.segments = seg;
  gt.graph = remove_spurs(extract_boundaries(seg), spur_len);
  gt.field = distance_transform(gt.graph.mask);
  gt.theta = ImageF(seg.width(), seg.height(), 1, std::numeric_limits<float>::quiet_NaN());
  for (int y = 0; y < seg.height(); ++y)
    for (int x = 0; x < seg.width(); ++x)
      if (gt.graph.mask(x, y))
        gt.theta(x, y) = static_cast<float>(estimate_theta(gt.graph, {x, y}, theta_window));
  return gt;
}

double signed_edge_distance(Pixel center, Pixel q, double theta) {
  const double dx = center.x - q.x, dy = center.y - q.y;
  return -std::sin(theta) * dx - std::cos(theta) * dy;
}

EdgeLabel label_patch(const GroundTruth& gt, Pixel center, const LabelSpaceConfig& cfg) {
  const float dist = gt.field.distance(center.x, center.y);
  if (!(dist < cfg.half_patch())) return kBackground;
  const Pixel q = gt.field.nearest(center.x, center.y);
  const double theta = gt.theta(q.x, q.y);
  return bin_params({signed_edge_distance(center, q, theta), theta}, cfg);
}

int count_segments(const SegmentationMap& seg, Pixel center, int patch_size, int cap) {
  const int half = patch_size / 2;
  std::array<std::int32_t, 8> seen{};
  int n = 0;
  cap = std::min(cap, static_cast<int>(seen.size()));
  for (int y = center.y - half; y < center.y + half; ++y) {
    const int yy = reflect_index(y, seg.height());
    for (int x = center.x - half; x < center.x + half; ++x) {
      const std::int32_t id = seg(reflect_index(x, seg.width()), yy);
      if (std::find(seen.begin(), seen.begin() + n, id) != seen.begin() + n) continue;
      seen[n++] = id;
      if (n >= cap) return n;
    }
  }
  return n;
}

LabeledPatchSet sample_training_set(std::span<const std::vector<GroundTruth>> groundtruths,
                                    const LabelSpaceConfig& cfg,
                                    const SamplingOptions& options) {
  cfg.validate();
  if (groundtruths.empty()) throw std::invalid_argument("sample_training_set: no images");
  for (const auto& image : groundtruths)
    if (image.empty())
      throw std::invalid_argument("sample_training_set: image without segmentation");

  const int num_classes = cfg.num_classes();
  const int half = cfg.patch_size / 2;
  std::vector<std::vector<LabeledPatch>> buckets(num_classes);
  LabeledPatchSet out;
  out.class_counts.assign(num_classes, 0);

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> pick_image(0, static_cast<int>(groundtruths.size()) - 1);
  std::unordered_set<std::uint64_t> used;
  const std::int64_t target = static_cast<std::int64_t>(options.n_per_class) * num_classes;
  const std::int64_t max_draws = target * options.max_draws_per_example;
  int full = 0;

  while (full < num_classes && out.draws < max_draws) {
    ++out.draws;
    const int image = pick_image(rng);
    const auto& annotations = groundtruths[image];
    const int annotator = std::uniform_int_distribution<int>(
        0, static_cast<int>(annotations.size()) - 1)(rng);
    const GroundTruth& gt = annotations[annotator];
    const int w = gt.segments.width(), h = gt.segments.height();
    if (w < cfg.patch_size || h < cfg.patch_size) continue;
    const int x = std::uniform_int_distribution<int>(half, w - half)(rng);
    const int y = std::uniform_int_distribution<int>(half, h - half)(rng);
    const std::uint64_t key = (static_cast<std::uint64_t>(image) << 40) ^
                              (static_cast<std::uint64_t>(annotator) << 32) ^
                              (static_cast<std::uint64_t>(y) << 16) ^
                              static_cast<std::uint64_t>(x);
    if (!used.insert(key).second) continue;
    const EdgeLabel label = label_patch(gt, {x, y}, cfg);
    if (label != kBackground) ++out.non_background_draws;
    if (count_segments(gt.segments, {x, y}, cfg.patch_size) > 2) {
      ++out.rejected_multi_segment;
      continue;
    }
    auto& bucket = buckets[label];
    if (static_cast<int>(bucket.size()) >= options.n_per_class) continue;
    bucket.push_back({image, x, y, annotator, label});
    if (static_cast<int>(bucket.size()) == options.n_per_class) ++full;
  }

  size_t balance = options.n_per_class;
  int empty = 0;
  for (const auto& bucket : buckets) {
    if (bucket.empty()) {
      ++empty;
      continue;
    }
    balance = std::min(balance, bucket.size());
  }
  if (full < num_classes) {
    warn("sample_training_set: only " + std::to_string(balance) +
         " examples achievable per class (requested " +
         std::to_string(options.n_per_class) + ", " + std::to_string(empty) +
         " classes empty); balancing to the minimum");
  }
  for (int k = 0; k < num_classes; ++k) {
    const auto& bucket = buckets[k];
    if (bucket.empty()) continue;
    out.patches.insert(out.patches.end(), bucket.begin(), bucket.begin() + balance);
    out.class_counts[k] = static_cast<std::int64_t>(balance);
  }
  return out;
}

}  // namespace oef
