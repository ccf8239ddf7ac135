#include "oef/bench.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <iterator>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "oef/morphology.hpp"
#include "oef/parallel.hpp"

namespace oef {
namespace {

// Hopcroft-Karp on a bipartite graph in CSR form (left nodes -> right nodes).
class BipartiteMatcher {
 public:
  BipartiteMatcher(int n_left, int n_right, std::vector<int> offsets, std::vector<int> adj)
      : n_left_(n_left), offsets_(std::move(offsets)), adj_(std::move(adj)),
        match_left_(n_left, -1), match_right_(n_right, -1), dist_(n_left) {}

  int solve() {
    int size = 0;
    while (bfs()) {
      for (int u = 0; u < n_left_; ++u)
        if (match_left_[u] < 0 && dfs(u)) ++size;
    }
    return size;
  }
  const std::vector<int>& match_right() const { return match_right_; }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max();

  bool bfs() {
    std::deque<int> queue;
    for (int u = 0; u < n_left_; ++u) {
      if (match_left_[u] < 0) {
        dist_[u] = 0;
        queue.push_back(u);
      } else {
        dist_[u] = kInf;
      }
    }
    bool found = false;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int e = offsets_[u]; e < offsets_[u + 1]; ++e) {
        const int w = match_right_[adj_[e]];
        if (w < 0) {
          found = true;
        } else if (dist_[w] == kInf) {
          dist_[w] = dist_[u] + 1;
          queue.push_back(w);
        }
      }
    }
    return found;
  }

  // Iterative augmenting-path search along the BFS layering.
  bool dfs(int root) {
    struct Frame {
      int u, e;
    };
    std::vector<Frame> stack{{root, offsets_[root]}};
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.e == offsets_[f.u + 1]) {
        dist_[f.u] = kInf;
        stack.pop_back();
        continue;
      }
      const int v = adj_[f.e++];
      const int w = match_right_[v];
      if (w < 0) {
        // Augment along the stack.
        int right = v;
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
          const int prev = match_left_[it->u];
          match_left_[it->u] = right;
          match_right_[right] = it->u;
          right = prev;
        }
        return true;
      }
      if (dist_[w] == dist_[f.u] + 1) stack.push_back({w, offsets_[w]});
    }
    return false;
  }

  int n_left_;
  std::vector<int> offsets_, adj_;
  std::vector<int> match_left_, match_right_, dist_;
};

std::vector<Pixel> pixels_of(const BinaryMap& m) {
  std::vector<Pixel> out;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) out.push_back({x, y});
  return out;
}

std::vector<Pixel> disc_offsets(double radius) {
  std::vector<Pixel> out;
  const int r = static_cast<int>(std::floor(radius));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
  std::stable_sort(out.begin(), out.end(), [](Pixel a, Pixel b) {
    return a.x * a.x + a.y * a.y < b.x * b.x + b.y * b.y;
  });
  return out;
}

// Matches detected pixels against the concatenation of the given maps.
int max_matching(const std::vector<Pixel>& det, std::span<const BinaryMap* const> gts,
                 const std::vector<Pixel>& disc) {
  if (det.empty()) return 0;
  const int w = gts[0]->width(), h = gts[0]->height();
  std::vector<Image<int>> index;
  int n_right = 0;
  for (const BinaryMap* g : gts) {
    Image<int> idx(w, h, 1, -1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((*g)(x, y)) idx(x, y) = n_right++;
    index.push_back(std::move(idx));
  }
  if (n_right == 0) return 0;
  std::vector<int> offsets{0}, adj;
  for (Pixel p : det) {
    for (const auto& idx : index)
      for (Pixel d : disc) {
        const int x = p.x + d.x, y = p.y + d.y;
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        if (idx(x, y) >= 0) adj.push_back(idx(x, y));
      }
    offsets.push_back(static_cast<int>(adj.size()));
  }
  BipartiteMatcher m(static_cast<int>(det.size()), n_right, std::move(offsets), std::move(adj));
  return m.solve();
}

long long count_on(const BinaryMap& m) {
  long long n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

}  // namespace

void MatchConfig::validate() const {
  if (!(max_dist_fraction > 0)) throw std::invalid_argument("match: distance fraction must be > 0");
  if (n_thresholds < 1) throw std::invalid_argument("match: need at least one threshold");
  if (refine_thresholds < 0) throw std::invalid_argument("match: refine_thresholds must be >= 0");
}

double f_measure(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

double MatchCounts::precision() const {
  return detected > 0 ? static_cast<double>(matched_detected) / detected : 1.0;
}
double MatchCounts::recall() const {
  return gt_total > 0 ? static_cast<double>(matched_gt) / gt_total : 1.0;
}
double MatchCounts::f_measure() const { return oef::f_measure(precision(), recall()); }

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
  detected += o.detected;
  matched_detected += o.matched_detected;
  gt_total += o.gt_total;
  matched_gt += o.matched_gt;
  return *this;
}

double match_radius(int width, int height, const MatchConfig& cfg) {
  return cfg.max_dist_fraction * std::hypot(static_cast<double>(width), static_cast<double>(height));
}

MatchCounts match_boundaries(const BinaryMap& detected, std::span<const BinaryMap> groundtruths,
                             const MatchConfig& cfg) {
  cfg.validate();
  for (const auto& g : groundtruths)
    if (g.width() != detected.width() || g.height() != detected.height())
      throw std::invalid_argument("match_boundaries: map sizes differ");
  const std::vector<Pixel> det = pixels_of(detected);
  const std::vector<Pixel> disc = disc_offsets(match_radius(detected.width(), detected.height(), cfg));
  MatchCounts out;
  out.detected = static_cast<long long>(det.size());
  std::vector<const BinaryMap*> all;
  for (const auto& g : groundtruths) {
    out.gt_total += count_on(g);
    const BinaryMap* one[] = {&g};
    out.matched_gt += max_matching(det, one, disc);
    all.push_back(&g);
  }
  if (!all.empty()) out.matched_detected = max_matching(det, all, disc);
  return out;
}

namespace {

// Sorted distinct pooled values without the global minimum.
std::vector<float> candidate_values(std::span<const ImageF> detections) {
  std::vector<float> values;
  for (const auto& d : detections) {
    auto s = d.data();
    values.insert(values.end(), s.begin(), s.end());
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (!values.empty()) values.erase(values.begin());  // the minimum would select every pixel
  return values;
}

// Up to n entries of the ascending range [first, last), evenly spaced in rank
// and including both ends, in decreasing order.
std::vector<float> rank_spaced(const float* first, const float* last, int n) {
  std::vector<float> out;
  const size_t m = static_cast<size_t>(last - first);
  if (m == 0 || n < 1) return out;
  if (m <= static_cast<size_t>(n)) {
    out.assign(std::make_reverse_iterator(last), std::make_reverse_iterator(first));
    return out;
  }
  for (int i = n - 1; i >= 0; --i) {
    const size_t r = n > 1 ? static_cast<size_t>(i) * (m - 1) / static_cast<size_t>(n - 1) : m - 1;
    const float t = first[r];
    if (out.empty() || out.back() > t) out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<float> sweep_thresholds(std::span<const ImageF> detections, int n) {
  const std::vector<float> values = candidate_values(detections);
  return rank_spaced(values.data(), values.data() + values.size(), n);
}

double average_precision(std::span<const PRPoint> points, bool left_extend) {
  std::vector<std::pair<double, double>> rp;
  for (const auto& p : points) rp.emplace_back(p.recall, p.precision);
  std::stable_sort(rp.begin(), rp.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  if (rp.empty()) return 0.0;
  if (left_extend && rp.front().first > 0) rp.insert(rp.begin(), {0.0, rp.front().second});
  double area = 0;
  for (size_t i = 1; i < rp.size(); ++i)
    area += (rp[i].first - rp[i - 1].first) * 0.5 * (rp[i].second + rp[i - 1].second);
  return area;
}

PRCurve evaluate(std::span<const ImageF> detections,
                 std::span<const std::vector<BinaryMap>> groundtruths, const MatchConfig& cfg) {
  cfg.validate();
  if (detections.empty()) throw std::invalid_argument("evaluate: no images");
  if (detections.size() != groundtruths.size())
    throw std::invalid_argument("evaluate: detection and ground-truth sets differ in size");
  for (size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].channels() != 1) throw std::invalid_argument("evaluate: maps must be single-channel");
    for (const auto& g : groundtruths[i])
      if (g.width() != detections[i].width() || g.height() != detections[i].height())
        throw std::invalid_argument("evaluate: image " + std::to_string(i) + " size mismatch");
  }
  const std::vector<float> values = candidate_values(detections);
  std::vector<float> thresholds = rank_spaced(values.data(), values.data() + values.size(),
                                              cfg.n_thresholds);
  const size_t n_img = detections.size();

  // Counts of every image at each threshold of a decreasing list.
  auto sweep = [&](const std::vector<float>& ts) {
    std::vector<std::vector<MatchCounts>> counts(n_img, std::vector<MatchCounts>(ts.size()));
    parallel_for(0, static_cast<int>(n_img), cfg.threads, [&](int i) {
      const ImageF& det = detections[i];
      long long prev_raw = -1;
      MatchCounts prev;
      BinaryMap bin(det.width(), det.height());
      for (size_t t = 0; t < ts.size(); ++t) {
        long long raw = 0;
        for (int y = 0; y < det.height(); ++y)
          for (int x = 0; x < det.width(); ++x) {
            const bool on = det(x, y) >= ts[t];
            bin(x, y) = on;
            raw += on;
          }
        // Thresholds decrease, so equal counts mean the same detected set.
        if (raw != prev_raw) {
          prev = match_boundaries(cfg.thin_detections ? thin(bin) : bin, groundtruths[i], cfg);
          prev_raw = raw;
        }
        counts[i][t] = prev;
      }
    });
    return counts;
  };
  auto aggregate = [&](const std::vector<std::vector<MatchCounts>>& counts, size_t t) {
    MatchCounts total;
    for (size_t i = 0; i < n_img; ++i) total += counts[i][t];
    return total;
  };

  PRCurve curve;
  curve.per_image = sweep(thresholds);

  // The coarse sweep is spaced over all candidate values, most of which are
  // weak responses far below the operating point. A second sweep fills the
  // gap between the coarse neighbors of the best threshold.
  if (cfg.refine_thresholds > 0 && thresholds.size() > 1) {
    size_t b = 0;
    double best_f = -1;
    for (size_t t = 0; t < thresholds.size(); ++t) {
      const double f = aggregate(curve.per_image, t).f_measure();
      if (f > best_f) {
        best_f = f;
        b = t;
      }
    }
    const float* lo = b + 1 < thresholds.size()
                          ? std::upper_bound(values.data(), values.data() + values.size(), thresholds[b + 1])
                          : values.data();
    const float* hi = b > 0 ? std::lower_bound(values.data(), values.data() + values.size(), thresholds[b - 1])
                            : values.data() + values.size();
    std::vector<float> extra = rank_spaced(lo, hi, cfg.refine_thresholds);
    std::erase(extra, thresholds[b]);
    if (!extra.empty()) {
      const auto extra_counts = sweep(extra);
      std::vector<float> merged;
      std::vector<std::vector<MatchCounts>> merged_counts(n_img);
      size_t a = 0, e = 0;
      while (a < thresholds.size() || e < extra.size()) {
        const bool take_extra = a == thresholds.size() || (e < extra.size() && extra[e] > thresholds[a]);
        merged.push_back(take_extra ? extra[e] : thresholds[a]);
        for (size_t i = 0; i < n_img; ++i)
          merged_counts[i].push_back(take_extra ? extra_counts[i][e] : curve.per_image[i][a]);
        take_extra ? ++e : ++a;
      }
      thresholds = std::move(merged);
      curve.per_image = std::move(merged_counts);
    }
  }
  const size_t n_t = thresholds.size();
  if (n_t == 0) {
    curve.per_image.assign(n_img, {});
    for (size_t i = 0; i < n_img; ++i) {
      MatchCounts c;
      for (const auto& g : groundtruths[i]) c.gt_total += count_on(g);
      curve.per_image[i].push_back(c);
    }
  }

  if (n_t == 0) {
    // Nothing can be detected: a single empty-detection point.
    MatchCounts total;
    for (const auto& v : curve.per_image) total += v[0];
    curve.points.push_back({0.0, total.precision(), total.recall(), total.f_measure()});
    curve.ods = curve.ois = curve.points[0].f;
    curve.best_precision = curve.points[0].precision;
    curve.best_recall = curve.points[0].recall;
    curve.ap = average_precision(curve.points, cfg.left_extend);
    return curve;
  }

  size_t best_t = 0;
  for (size_t t = 0; t < n_t; ++t) {
    const MatchCounts total = aggregate(curve.per_image, t);
    curve.points.push_back({thresholds[t], total.precision(), total.recall(), total.f_measure()});
    if (curve.points[t].f > curve.points[best_t].f) best_t = t;
  }
  curve.ods = curve.points[best_t].f;
  curve.ods_threshold = curve.points[best_t].threshold;
  curve.best_precision = curve.points[best_t].precision;
  curve.best_recall = curve.points[best_t].recall;

  // OIS: per-image thresholds chosen to maximize the aggregate F. Starting
  // from the better of (ODS threshold everywhere, each image's own best) and
  // improving one image at a time keeps OIS >= ODS.
  auto aggregate_f = [&](const std::vector<size_t>& choice) {
    MatchCounts total;
    for (size_t i = 0; i < n_img; ++i) total += curve.per_image[i][choice[i]];
    return total.f_measure();
  };
  std::vector<size_t> choice(n_img, best_t), own(n_img, 0);
  for (size_t i = 0; i < n_img; ++i)
    for (size_t t = 1; t < n_t; ++t)
      if (curve.per_image[i][t].f_measure() > curve.per_image[i][own[i]].f_measure()) own[i] = t;
  double best = aggregate_f(choice);
  if (aggregate_f(own) > best) {
    choice = own;
    best = aggregate_f(own);
  }
  MatchCounts total;
  for (size_t i = 0; i < n_img; ++i) total += curve.per_image[i][choice[i]];
  for (int pass = 0; pass < 20; ++pass) {
    bool improved = false;
    for (size_t i = 0; i < n_img; ++i) {
      MatchCounts rest = total;
      const MatchCounts& cur = curve.per_image[i][choice[i]];
      rest.detected -= cur.detected;
      rest.matched_detected -= cur.matched_detected;
      rest.gt_total -= cur.gt_total;
      rest.matched_gt -= cur.matched_gt;
      for (size_t t = 0; t < n_t; ++t) {
        MatchCounts trial = rest;
        trial += curve.per_image[i][t];
        if (trial.f_measure() > best + 1e-15) {
          best = trial.f_measure();
          choice[i] = t;
          total = trial;
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  curve.ois = best;
  curve.ap = average_precision(curve.points, cfg.left_extend);
  return curve;
}

float MonotoneTransform::operator()(float v) const {
  if (in.empty()) return v;
  if (v <= in.front()) return out.front() + (v - in.front());
  if (v >= in.back()) return out.back() + (v - in.back());
  const auto it = std::lower_bound(in.begin(), in.end(), v);
  const size_t j = static_cast<size_t>(it - in.begin());
  if (*it == v) return out[j];
  const double f = (static_cast<double>(v) - in[j - 1]) / (static_cast<double>(in[j]) - in[j - 1]);
  return static_cast<float>(out[j - 1] + f * (static_cast<double>(out[j]) - out[j - 1]));
}

HistogramNormalization histogram_normalize(std::span<const ImageF> maps,
                                           std::span<const ImageF> reference) {
  if (maps.empty() || reference.empty())
    throw std::invalid_argument("histogram_normalize: empty map set");
  std::vector<float> ref;
  for (const auto& r : reference) {
    auto s = r.data();
    ref.insert(ref.end(), s.begin(), s.end());
  }
  std::sort(ref.begin(), ref.end());

  std::vector<float> knots;
  for (const auto& m : maps) {
    auto s = m.data();
    knots.insert(knots.end(), s.begin(), s.end());
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  HistogramNormalization result;
  const bool ref_constant = ref.empty() || ref.front() == ref.back();
  std::vector<double> sum(knots.size(), 0.0);
  int used = 0;
  if (!ref_constant) {
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(ref.size() - 1);
      const size_t lo = static_cast<size_t>(std::floor(pos));
      const size_t hi = std::min(lo + 1, ref.size() - 1);
      return ref[lo] + (pos - lo) * (static_cast<double>(ref[hi]) - ref[lo]);
    };
    std::vector<float> sorted;
    for (const auto& m : maps) {
      auto s = m.data();
      sorted.assign(s.begin(), s.end());
      std::sort(sorted.begin(), sorted.end());
      if (sorted.empty() || sorted.front() == sorted.back()) continue;
      ++used;
      // Mid-rank empirical CDF at every knot, by merging the sorted arrays.
      size_t less = 0;
      const double n = static_cast<double>(sorted.size());
      for (size_t j = 0; j < knots.size(); ++j) {
        while (less < sorted.size() && sorted[less] < knots[j]) ++less;
        size_t eq = less;
        while (eq < sorted.size() && sorted[eq] == knots[j]) ++eq;
        sum[j] += quantile((static_cast<double>(less) + 0.5 * (eq - less)) / n);
      }
    }
  }
  result.transform.in = knots;
  result.transform.out.resize(knots.size());
  for (size_t j = 0; j < knots.size(); ++j) {
    float v = used > 0 ? static_cast<float>(sum[j] / used) : knots[j];
    if (j > 0 && !(v > result.transform.out[j - 1]))
      v = std::nextafter(result.transform.out[j - 1], std::numeric_limits<float>::infinity());
    result.transform.out[j] = v;
  }
  for (const auto& m : maps) {
    ImageF t = m;
    for (auto& v : t.data()) v = result.transform(v);
    result.maps.push_back(std::move(t));
  }
  return result;
}

std::vector<double> value_histogram(std::span<const ImageF> maps, int bins, float lo, float hi) {
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("value_histogram: bad range");
  std::vector<double> h(bins, 0.0);
  double n = 0;
  for (const auto& m : maps)
    for (float v : m.data()) {
      const int b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
      h[b] += 1;
      n += 1;
    }
  if (n > 0)
    for (auto& v : h) v /= n;
  return h;
}

void write_pr_table(const PRCurve& curve, std::ostream& out) {
  out << "# threshold recall precision f\n" << std::setprecision(9);
  for (const auto& p : curve.points)
    out << p.threshold << ' ' << p.recall << ' ' << p.precision << ' ' << p.f << '\n';
}

void write_summary(const PRCurve& curve, std::ostream& out) {
  out << std::setprecision(6) << "ODS " << curve.ods << "\nOIS " << curve.ois << "\nAP "
      << curve.ap << "\nODS_threshold " << curve.ods_threshold << "\nODS_precision "
      << curve.best_precision << "\nODS_recall " << curve.best_recall << "\nimages "
      << curve.per_image.size() << "\nthresholds " << curve.points.size() << '\n';
}

ImageU8 render_pr_plot(const PRCurve& curve, int size) {
  ImageU8 img(size, size, 3, 255);
  const int margin = size / 10, span = size - 2 * margin;
  auto to_px = [&](double r, double p) {
    return Pixel{margin + static_cast<int>(std::lround(r * span)),
                 size - 1 - margin - static_cast<int>(std::lround(p * span))};
  };
  auto put = [&](Pixel q, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (!img.contains(q.x, q.y)) return;
    img(q.x, q.y, 0) = r;
    img(q.x, q.y, 1) = g;
    img(q.x, q.y, 2) = b;
  };
  auto line = [&](Pixel a, Pixel b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
    const int n = std::max(std::abs(b.x - a.x), std::abs(b.y - a.y));
    for (int i = 0; i <= n; ++i) {
      const double t = n ? static_cast<double>(i) / n : 0.0;
      put({static_cast<int>(std::lround(a.x + t * (b.x - a.x))),
           static_cast<int>(std::lround(a.y + t * (b.y - a.y)))},
          r, g, bl);
    }
  };
  for (int level = 1; level <= 9; ++level) {
    const double f = level / 10.0;
    for (int i = 0; i <= 4 * span; ++i) {
      const double r = static_cast<double>(i) / (4 * span);
      if (2 * r - f <= 0) continue;
      const double p = f * r / (2 * r - f);
      if (p <= 1) put(to_px(r, p), 200, 230, 200);
    }
  }
  line(to_px(0, 0), to_px(1, 0), 0, 0, 0);
  line(to_px(0, 0), to_px(0, 1), 0, 0, 0);
  line(to_px(1, 0), to_px(1, 1), 160, 160, 160);
  line(to_px(0, 1), to_px(1, 1), 160, 160, 160);
  for (size_t i = 1; i < curve.points.size(); ++i)
    line(to_px(curve.points[i - 1].recall, curve.points[i - 1].precision),
         to_px(curve.points[i].recall, curve.points[i].precision), 220, 30, 30);
  const Pixel best = to_px(curve.best_recall, curve.best_precision);
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) put({best.x + dx, best.y + dy}, 20, 120, 20);
  return img;
}

}  // namespace oef
