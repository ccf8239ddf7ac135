#include "oef/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "oef/errors.hpp"
#include "oef/features.hpp"
#include "oef/log.hpp"
#include "oef/morphology.hpp"
#include "oef/parallel.hpp"

namespace oef {
namespace {

double snap(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

float bilinear_clamped(const ImageF& img, float x, float y) {
  x = std::clamp(x, 0.0f, static_cast<float>(img.width() - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(img.height() - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const float fx = x - x0, fy = y - y0;
  return (img(x0, y0) * (1 - fx) + img(x1, y0) * fx) * (1 - fy) +
         (img(x0, y1) * (1 - fx) + img(x1, y1) * fx) * fy;
}

void check_alignment(const ScoreVolume& scores, const ImageF& image, const EdgeMaskTable& table) {
  if (scores.width() != image.width() || scores.height() != image.height()) {
    throw std::invalid_argument("composite: scores and image sizes differ");
  }
  if (scores.channels() != table.config().num_classes()) {
    throw std::invalid_argument("composite: score vectors do not match the label space");
  }
}

// Scatters weight * mask for every (center, label) the visitor yields, split
// into row bands with one accumulator per band, reduced in band order.
template <typename Visit>
OrientedEdgeMap scatter(int width, int height, int orientations, int threads, Visit&& visit) {
  OrientedEdgeMap out{ImageF(width, height, orientations), 1.0};
  threads = std::max(1, std::min(threads, height));
  if (threads == 1) {
    visit(0, height, out.strength);
    return out;
  }
  std::vector<ImageF> partial(threads);
  parallel_chunks(0, height, threads, [&](int chunk, int y0, int y1) {
    partial[chunk] = ImageF(width, height, orientations);
    visit(y0, y1, partial[chunk]);
  });
  auto dst = out.strength.data();
  for (const auto& p : partial) {
    if (p.empty()) continue;
    auto src = p.data();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

}  // namespace

EdgeMaskTable::EdgeMaskTable(const LabelSpaceConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const int num = cfg.num_classes();
  straight_.resize(num);
  sin_.assign(num, 0.0);
  cos_.assign(num, 0.0);
  d_.assign(num, 0.0);
  major_.assign(num, Pixel{0, 1});
  const int half = cfg.patch_size / 2;
  for (EdgeLabel k = 1; k < num; ++k) {
    const EdgeParams p = decode(k, cfg);
    sin_[k] = snap(std::sin(p.theta));
    cos_[k] = snap(std::cos(p.theta));
    d_[k] = p.d;
    // Diagonals step along x, like the east-neighbor test that marks their
    // ground-truth pixels.
    major_[k] = std::abs(cos_[k]) > std::abs(sin_[k]) + 1e-12 ? Pixel{0, 1} : Pixel{1, 0};
    const double h = 0.5 * std::max(std::abs(sin_[k]), std::abs(cos_[k]));
    for (int uy = -half; uy < half; ++uy)
      for (int ux = -half; ux < half; ++ux) {
        const double s = signed_distance(k, {ux, uy});
        if (s > -h && s <= h) straight_[k].push_back({ux, uy});
      }
  }
}

double EdgeMaskTable::signed_distance(EdgeLabel k, Pixel u) const {
  // sin and cos of diagonal angles differ in the last bit; snap the residue
  // so pixels on the line land on the s <= 0 side consistently.
  const double s = -sin_[k] * u.x - cos_[k] * u.y + d_[k];
  return std::abs(s) < 1e-9 ? 0.0 : s;
}

void sharpen_offsets(const ImageF& image, Pixel center, EdgeLabel k, int sh,
                     const EdgeMaskTable& table, SharpenScratch& scratch,
                     std::vector<Pixel>& out) {
  out.clear();
  if (sh <= 0) {
    const auto& m = table.straight(k);
    out.assign(m.begin(), m.end());
    return;
  }
  const int p = table.config().patch_size;
  const int half = p / 2;
  // Extended window [-half-1, half] so transition pairs at the patch border exist.
  const int ext = p + 2;
  const int nc = image.channels();
  scratch.side.assign(static_cast<size_t>(ext) * ext, 0);
  scratch.color.resize(static_cast<size_t>(p) * p * nc);
  auto eidx = [&](int ux, int uy) { return (uy + half + 1) * ext + (ux + half + 1); };

  // Ground-truth boundary pixels are the pixels whose next neighbor along +x
  // or +y lies in another segment, and the straight masks follow that
  // convention. Side A therefore holds the pixels up to and including the
  // mask along the major step e, side B the pixels after it.
  const Pixel e = table.major_step(k);
  const double delta = table.signed_distance(k, e) - table.signed_distance(k, {0, 0});
  const double hm = 0.5 * std::abs(delta);
  auto straight_side_a = [&](double s) { return delta < 0 ? s > -hm : s <= hm; };

  std::vector<double> mean_a(nc, 0.0), mean_b(nc, 0.0);
  int na = 0, nb = 0;
  for (int uy = -half; uy < half; ++uy) {
    const int yy = reflect_index(center.y + uy, image.height());
    for (int ux = -half; ux < half; ++ux) {
      const int xx = reflect_index(center.x + ux, image.width());
      float* c = &scratch.color[((uy + half) * p + (ux + half)) * nc];
      const bool a = straight_side_a(table.signed_distance(k, {ux, uy}));
      for (int ch = 0; ch < nc; ++ch) {
        c[ch] = image(xx, yy, ch);
        (a ? mean_a : mean_b)[ch] += c[ch];
      }
      (a ? na : nb)++;
    }
  }
  if (na == 0 || nb == 0) {
    const auto& m = table.straight(k);
    out.assign(m.begin(), m.end());
    return;
  }
  for (int ch = 0; ch < nc; ++ch) {
    mean_a[ch] /= na;
    mean_b[ch] /= nb;
  }
  for (int uy = -half - 1; uy <= half; ++uy)
    for (int ux = -half - 1; ux <= half; ++ux) {
      const double s = table.signed_distance(k, {ux, uy});
      std::uint8_t side = straight_side_a(s) ? 1 : 0;
      if (ux >= -half && ux < half && uy >= -half && uy < half && std::abs(s) <= sh) {
        const float* c = &scratch.color[((uy + half) * p + (ux + half)) * nc];
        double da = 0, db = 0;
        for (int ch = 0; ch < nc; ++ch) {
          da += (c[ch] - mean_a[ch]) * (c[ch] - mean_a[ch]);
          db += (c[ch] - mean_b[ch]) * (c[ch] - mean_b[ch]);
        }
        if (da < db) side = 1;
        else if (db < da) side = 0;
      }
      scratch.side[eidx(ux, uy)] = side;
    }

  // One pixel per transition along e: the one before the change, as in the
  // ground truth.
  for (int uy = -half; uy < half; ++uy)
    for (int ux = -half; ux < half; ++ux)
      if (scratch.side[eidx(ux, uy)] != scratch.side[eidx(ux + e.x, uy + e.y)])
        out.push_back({ux, uy});
}

BinaryMap sharpen_mask(const ImageF& image, Pixel center, EdgeLabel k, int sh,
                       const EdgeMaskTable& table) {
  SharpenScratch scratch;
  std::vector<Pixel> offsets;
  sharpen_offsets(image, center, k, sh, table, scratch, offsets);
  const int p = table.config().patch_size;
  BinaryMap mask(p, p);
  for (Pixel u : offsets) mask(u.x + p / 2, u.y + p / 2) = 1;
  return mask;
}

OrientedEdgeMap composite(const ScoreVolume& scores, const ImageF& image, int sh,
                          const EdgeMaskTable& table, const CompositeOptions& options) {
  check_alignment(scores, image, table);
  const LabelSpaceConfig& cfg = table.config();
  const int w = image.width(), h = image.height(), nk = cfg.num_classes();
  return scatter(w, h, cfg.n_orient_bins, options.threads, [&](int y0, int y1, ImageF& e) {
    SharpenScratch scratch;
    std::vector<Pixel> offsets;
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x) {
        const float* wv = &scores(x, y, 0);
        for (EdgeLabel k = 1; k < nk; ++k) {
          const float weight = wv[k];
          if (!(weight > options.score_threshold)) continue;
          const int o = table.orientation_of(k);
          const std::vector<Pixel>* mask = &table.straight(k);
          if (sh > 0) {
            sharpen_offsets(image, {x, y}, k, sh, table, scratch, offsets);
            mask = &offsets;
          }
          for (Pixel u : *mask) {
            const int xx = x + u.x, yy = y + u.y;
            if (xx >= 0 && yy >= 0 && xx < w && yy < h) e(xx, yy, o) += weight;
          }
        }
      }
  });
}

ImageF collapse_scores(const ScoreVolume& scores, const EdgeMaskTable& table) {
  const LabelSpaceConfig& cfg = table.config();
  const int w = scores.width(), h = scores.height();
  ImageF out(w, h, cfg.n_orient_bins);
  for (int j = 0; j < cfg.n_orient_bins; ++j) {
    const double theta = orient_bin_center(j, cfg);
    const double s = snap(std::sin(theta)), c = snap(std::cos(theta));
    for (int i = 0; i < cfg.n_dist_bins; ++i) {
      const EdgeLabel k = encode({i, j}, cfg);
      const double d = dist_bin_center(i, cfg);
      const int ox = static_cast<int>(std::lround(d * s));
      const int oy = static_cast<int>(std::lround(d * c));
      for (int y = 0; y < h; ++y) {
        const int yy = y + oy;
        if (yy < 0 || yy >= h) continue;
        for (int x = 0; x < w; ++x) {
          const int xx = x + ox;
          if (xx < 0 || xx >= w) continue;
          out(xx, yy, j) += scores(x, y, k);
        }
      }
    }
  }
  return out;
}

OrientedEdgeMap composite_collapsed(const ScoreVolume& scores, const ImageF& image, int sh,
                                    const EdgeMaskTable& table,
                                    const CompositeOptions& options) {
  check_alignment(scores, image, table);
  const LabelSpaceConfig& cfg = table.config();
  const int w = image.width(), h = image.height(), m = cfg.n_orient_bins;
  const ImageF collapsed = collapse_scores(scores, table);
  const int center_bin = (cfg.n_dist_bins - 1) / 2;
  return scatter(w, h, m, options.threads, [&](int y0, int y1, ImageF& e) {
    SharpenScratch scratch;
    std::vector<Pixel> offsets;
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x)
        for (int j = 0; j < m; ++j) {
          const float weight = collapsed(x, y, j);
          if (!(weight > options.score_threshold)) continue;
          const EdgeLabel k = encode({center_bin, j}, cfg);
          const std::vector<Pixel>* mask = &table.straight(k);
          if (sh > 0) {
            sharpen_offsets(image, {x, y}, k, sh, table, scratch, offsets);
            mask = &offsets;
          }
          for (Pixel u : *mask) {
            const int xx = x + u.x, yy = y + u.y;
            if (xx >= 0 && yy >= 0 && xx < w && yy < h) e(xx, yy, j) += weight;
          }
        }
  });
}

void PyramidConfig::validate() const {
  if (scales.empty()) throw ConfigError("pyramid: no scales");
  if (sharpen.size() != scales.size() || beta.size() != scales.size()) {
    throw ConfigError("pyramid: need one sharpen level and one beta per scale");
  }
  for (size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0)) throw ConfigError("pyramid: scales must be positive");
    if (i > 0 && !(scales[i] > scales[i - 1])) throw ConfigError("pyramid: scales must be sorted");
    if (sharpen[i] < 0 || sharpen[i] > 2) throw ConfigError("pyramid: sharpen must be 0, 1 or 2");
    if (!(beta[i] > 0)) throw ConfigError("pyramid: beta must be positive");
  }
}

ScaleScores score_scale(const ImageF& image, const Forest& forest, double scale,
                        FusionMode mode, int threads) {
  ScaleScores out;
  out.scale = scale;
  const int w = std::max(1, static_cast<int>(std::lround(image.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height() * scale)));
  const int p = forest.config.labels.patch_size;
  if (w < p || h < p) return out;
  out.image = resize_bilinear(image, w, h);
  const ChannelStack stack = compute_channels(out.image, forest.config.labels);
  out.scores = predict_image(forest, stack, w, h, mode, threads);
  return out;
}

ImageF resize_oriented(const ImageF& strength, int width, int height, const EdgeMaskTable& table,
                       bool align) {
  if (!align) return resize_bilinear(strength, width, height);
  if (width <= 0 || height <= 0 || strength.empty()) {
    throw std::invalid_argument("resize_oriented: empty source or target");
  }
  const LabelSpaceConfig& cfg = table.config();
  if (strength.channels() != cfg.n_orient_bins) {
    throw std::invalid_argument("resize_oriented: channel count differs from orientation bins");
  }
  const int sw = strength.width(), sh = strength.height();
  const double fx = static_cast<double>(width) / sw, fy = static_cast<double>(height) / sh;
  ImageF out(width, height, cfg.n_orient_bins);
  for (int j = 0; j < cfg.n_orient_bins; ++j) {
    const Pixel e = table.major_step(labels_for_orientation(j, cfg).front());
    // Downsampled maps need at most a quarter pixel; shifting them would turn
    // the two-tap average into point sampling and break thin ridges.
    const double tx = 0.5 * std::max(fx - 1.0, 0.0) * e.x;
    const double ty = 0.5 * std::max(fy - 1.0, 0.0) * e.y;
    for (int y = 0; y < height; ++y) {
      const double v = std::clamp((y - ty + 0.5) / fy - 0.5, 0.0, sh - 1.0);
      const int y0 = static_cast<int>(v), y1 = std::min(y0 + 1, sh - 1);
      const float ay = static_cast<float>(v - y0);
      for (int x = 0; x < width; ++x) {
        const double u = std::clamp((x - tx + 0.5) / fx - 0.5, 0.0, sw - 1.0);
        const int x0 = static_cast<int>(u), x1 = std::min(x0 + 1, sw - 1);
        const float ax = static_cast<float>(u - x0);
        const float top = strength(x0, y0, j) + ax * (strength(x1, y0, j) - strength(x0, y0, j));
        const float bottom = strength(x0, y1, j) + ax * (strength(x1, y1, j) - strength(x0, y1, j));
        out(x, y, j) = top + ay * (bottom - top);
      }
    }
  }
  return out;
}

OrientedEdgeMap fuse_scale(const ScaleScores& scaled, const EdgeMaskTable& table,
                           const CalibrationModel& calibration, int sh, bool collapsed,
                           int width, int height, const CompositeOptions& options, bool align) {
  ScoreVolume scores = scaled.scores;
  if (calibration.mode != CalibrationMode::kNone) {
    const int nc = scores.channels();
    auto data = scores.data();
    for (size_t i = 0; i < scores.pixel_count(); ++i)
      apply_calibration(calibration, data.subspan(i * nc, nc));
  }
  OrientedEdgeMap e = collapsed ? composite_collapsed(scores, scaled.image, sh, table, options)
                                : composite(scores, scaled.image, sh, table, options);
  if (e.width() != width || e.height() != height)
    e.strength = resize_oriented(e.strength, width, height, table, align);
  e.scale = scaled.scale;
  return e;
}

OrientedEdgeMap average_maps(const std::vector<OrientedEdgeMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("average_maps: nothing to average");
  OrientedEdgeMap out{ImageF(maps[0].width(), maps[0].height(), maps[0].orientations()), 0.0};
  auto dst = out.strength.data();
  for (const auto& m : maps) {
    auto src = m.strength.data();
    if (src.size() != dst.size()) throw std::invalid_argument("average_maps: size mismatch");
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const float inv = 1.0f / static_cast<float>(maps.size());
  for (auto& v : dst) v *= inv;
  return out;
}

OrientedEdgeMap detect_multiscale(const ImageF& image, const Forest& forest,
                                  const PyramidConfig& pyramid, const DetectOptions& options) {
  pyramid.validate();
  const EdgeMaskTable table(forest.config.labels);
  std::vector<OrientedEdgeMap> maps;
  for (size_t i = 0; i < pyramid.scales.size(); ++i) {
    const ScaleScores scaled =
        score_scale(image, forest, pyramid.scales[i], options.mode, options.threads);
    if (scaled.scores.empty()) {
      warn("detect_multiscale: image too small at scale " + std::to_string(pyramid.scales[i]) +
           "; skipping");
      continue;
    }
    maps.push_back(fuse_scale(scaled, table, {options.calibration, pyramid.beta[i]},
                              pyramid.sharpen[i], options.collapsed, image.width(),
                              image.height(), {options.score_threshold, options.threads},
                              options.align_scales));
  }
  if (maps.empty()) throw DataError("detect_multiscale: image too small for every scale");
  return average_maps(maps);
}

ImageF max_strength(const OrientedEdgeMap& e) {
  ImageF out(e.width(), e.height());
  for (int y = 0; y < e.height(); ++y)
    for (int x = 0; x < e.width(); ++x) {
      float best = 0;
      for (int j = 0; j < e.orientations(); ++j) best = std::max(best, e.strength(x, y, j));
      out(x, y) = best;
    }
  return out;
}

ImageF nms(const OrientedEdgeMap& e) {
  const int w = e.width(), h = e.height(), m = e.orientations();
  ImageF strength(w, h);
  Image<int> orient(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float best = e.strength(x, y, 0);
      int arg = 0;
      for (int j = 1; j < m; ++j)
        if (e.strength(x, y, j) > best) {
          best = e.strength(x, y, j);
          arg = j;
        }
      strength(x, y) = best;
      orient(x, y) = arg;
    }
  std::vector<float> nx(m), ny(m);
  for (int j = 0; j < m; ++j) {
    const double theta = std::numbers::pi / 2 - j * std::numbers::pi / m;
    nx[j] = static_cast<float>(snap(std::sin(theta)));
    ny[j] = static_cast<float>(snap(std::cos(theta)));
  }
  ImageF out(w, h);
  BinaryMap support(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float s = strength(x, y);
      if (!(s > 0)) continue;
      const int j = orient(x, y);
      const float a = bilinear_clamped(strength, x + nx[j], y + ny[j]);
      const float b = bilinear_clamped(strength, x - nx[j], y - ny[j]);
      if (s < a || s < b) continue;
      out(x, y) = s;
      support(x, y) = 1;
    }
  const BinaryMap thinned = thin(support);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!thinned(x, y)) out(x, y) = 0;
  return out;
}

}  // namespace oef
