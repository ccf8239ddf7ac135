#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oef/bench.hpp"
#include "oef/morphology.hpp"
#include "test_util.hpp"

namespace oef {
namespace {

using oef::testing::mask_from;

std::vector<Pixel> on_pixels(const BinaryMap& m) {
  std::vector<Pixel> out;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) out.push_back({x, y});
  return out;
}

// Exhaustive maximum matching: try every partner (or none) for each left
// node in turn. Exponential, only for tiny inputs.
int brute_matching(const std::vector<Pixel>& left, const std::vector<Pixel>& right,
                   double radius, size_t i, std::vector<bool>& used) {
  if (i == left.size()) return 0;
  int best = brute_matching(left, right, radius, i + 1, used);
  for (size_t j = 0; j < right.size(); ++j) {
    if (used[j]) continue;
    const double dx = left[i].x - right[j].x, dy = left[i].y - right[j].y;
    if (dx * dx + dy * dy > radius * radius) continue;
    used[j] = true;
    best = std::max(best, 1 + brute_matching(left, right, radius, i + 1, used));
    used[j] = false;
  }
  return best;
}

int brute(const std::vector<Pixel>& left, const std::vector<Pixel>& right, double radius) {
  std::vector<bool> used(right.size(), false);
  return brute_matching(left, right, radius, 0, used);
}

BinaryMap random_sparse(int w, int h, int count, std::mt19937_64& rng) {
  BinaryMap m(w, h);
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  for (int i = 0; i < count; ++i) m(ux(rng), uy(rng)) = 1;
  return m;
}

TEST(Match, EqualsExhaustiveOracleOnSmallCases) {
  std::mt19937_64 rng(2024);
  MatchConfig cfg;
  int cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int w = 3 + static_cast<int>(rng() % 8), h = 3 + static_cast<int>(rng() % 8);
    cfg.max_dist_fraction = 0.05 + 0.25 * (rng() % 100) / 100.0;
    const BinaryMap det = random_sparse(w, h, 1 + static_cast<int>(rng() % 6), rng);
    std::vector<BinaryMap> gts;
    const int n_ann = 1 + static_cast<int>(rng() % 3);
    for (int a = 0; a < n_ann; ++a) gts.push_back(random_sparse(w, h, 1 + static_cast<int>(rng() % 5), rng));

    const double radius = match_radius(w, h, cfg);
    const MatchCounts got = match_boundaries(det, gts, cfg);
    const auto d = on_pixels(det);
    long long matched_gt = 0, gt_total = 0;
    std::vector<Pixel> pooled;
    for (const auto& g : gts) {
      const auto gp = on_pixels(g);
      gt_total += static_cast<long long>(gp.size());
      matched_gt += brute(gp, d, radius);
      pooled.insert(pooled.end(), gp.begin(), gp.end());
    }
    ASSERT_EQ(got.detected, static_cast<long long>(d.size()));
    ASSERT_EQ(got.gt_total, gt_total);
    ASSERT_EQ(got.matched_gt, matched_gt) << "trial " << trial;
    ASSERT_EQ(got.matched_detected, brute(d, pooled, radius)) << "trial " << trial;
    ++cases;
  }
  EXPECT_EQ(cases, 300);
}

TEST(Match, GreedyTrapIsSolvedOptimally) {
  // Detected a can reach g1 and g2, b only g1: greedy a->g1 loses b.
  BinaryMap det(10, 10), gt(10, 10);
  det(3, 5) = 1;  // a
  det(1, 5) = 1;  // b
  gt(2, 5) = 1;   // g1
  gt(4, 5) = 1;   // g2
  MatchConfig cfg;
  cfg.max_dist_fraction = 1.0 / std::hypot(10.0, 10.0);  // radius 1
  const std::vector<BinaryMap> gts{gt};
  const MatchCounts c = match_boundaries(det, gts, cfg);
  EXPECT_EQ(c.matched_detected, 2);
  EXPECT_EQ(c.matched_gt, 2);
}

TEST(Match, IdenticalMapsArePerfect) {
  BinaryMap m = mask_from({
      "..........",
      "..#####...",
      "......#...",
      "......#...",
      ".......##.",
  });
  const std::vector<BinaryMap> gts{m, m};
  const MatchCounts c = match_boundaries(m, gts);
  EXPECT_DOUBLE_EQ(c.precision(), 1.0);
  EXPECT_DOUBLE_EQ(c.recall(), 1.0);
  EXPECT_DOUBLE_EQ(c.f_measure(), 1.0);
}

TEST(Match, EmptyDetectionHasPrecisionOneRecallZero) {
  BinaryMap gt(8, 8);
  gt(3, 3) = 1;
  const std::vector<BinaryMap> gts{gt};
  const MatchCounts c = match_boundaries(BinaryMap(8, 8), gts);
  EXPECT_DOUBLE_EQ(c.precision(), 1.0);
  EXPECT_DOUBLE_EQ(c.recall(), 0.0);
  EXPECT_EQ(c.false_negatives(), 1);
}

TEST(Match, DetectionCountsOnceAcrossAnnotators) {
  BinaryMap m(6, 6);
  m(2, 2) = 1;
  const std::vector<BinaryMap> gts{m, m, m};
  const MatchCounts c = match_boundaries(m, gts);
  EXPECT_EQ(c.detected, 1);
  EXPECT_EQ(c.matched_detected, 1);
  EXPECT_EQ(c.gt_total, 3);
  EXPECT_EQ(c.matched_gt, 3);
}

TEST(Match, RadiusScalesWithDiagonal) {
  EXPECT_NEAR(match_radius(300, 400, MatchConfig{}), 0.0075 * 500, 1e-12);
  MatchConfig bad;
  bad.max_dist_fraction = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(FMeasure, HarmonicMean) {
  EXPECT_DOUBLE_EQ(f_measure(0.5, 1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f_measure(0.0, 0.0), 0.0);
}

struct Suite {
  std::vector<ImageF> detections;
  std::vector<std::vector<BinaryMap>> gts;
};

// Rectangles outlines as ground truth; the detector is the truth map with
// graded strength plus optional noise.
Suite make_suite(int n, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Suite s;
  for (int i = 0; i < n; ++i) {
    const int w = 60, h = 50;
    BinaryMap gt(w, h);
    const int x0 = 5 + static_cast<int>(rng() % 10), y0 = 5 + static_cast<int>(rng() % 10);
    const int x1 = x0 + 20 + static_cast<int>(rng() % 20), y1 = y0 + 15 + static_cast<int>(rng() % 15);
    for (int x = x0; x <= x1; ++x) gt(x, y0) = gt(x, y1) = 1;
    for (int y = y0; y <= y1; ++y) gt(x0, y) = gt(x1, y) = 1;
    gt = thin(gt);  // benchmark ground truth is thinned
    ImageF det(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double base = gt(x, y) ? 0.5 + 0.5 * u(rng) : 0.0;
        det(x, y) = static_cast<float>(base + noise * u(rng));
      }
    s.detections.push_back(det);
    s.gts.push_back({gt});
  }
  return s;
}

TEST(Evaluate, PerfectDetector) {
  Suite s = make_suite(5, 0.0, 1);
  MatchConfig cfg;
  const PRCurve c = evaluate(s.detections, s.gts, cfg);
  EXPECT_DOUBLE_EQ(c.ods, 1.0);
  EXPECT_DOUBLE_EQ(c.ois, 1.0);
  cfg.left_extend = true;
  EXPECT_DOUBLE_EQ(evaluate(s.detections, s.gts, cfg).ap, 1.0);
}

TEST(Evaluate, BinaryPerfectDetectorHasFullApOnlyWithLeftExtension) {
  Suite s = make_suite(3, 0.0, 2);
  for (auto& d : s.detections)
    for (float& v : d.data()) v = v > 0 ? 1.0f : 0.0f;
  MatchConfig cfg;
  const PRCurve plain = evaluate(s.detections, s.gts, cfg);
  ASSERT_EQ(plain.points.size(), 1u);
  EXPECT_DOUBLE_EQ(plain.ods, 1.0);
  EXPECT_DOUBLE_EQ(plain.ap, 0.0);
  cfg.left_extend = true;
  EXPECT_DOUBLE_EQ(evaluate(s.detections, s.gts, cfg).ap, 1.0);
}

TEST(Evaluate, RandomNoisePrecisionIsBoundaryDensity) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Suite s = make_suite(6, 0.0, 3);
  long long on = 0, total = 0;
  for (size_t i = 0; i < s.detections.size(); ++i) {
    for (float& v : s.detections[i].data()) v = u(rng);
    for (auto b : s.gts[i][0].data()) on += b;
    total += static_cast<long long>(s.gts[i][0].pixel_count());
  }
  MatchConfig cfg;
  cfg.thin_detections = false;  // keep every noise pixel a candidate
  const PRCurve c = evaluate(s.detections, s.gts, cfg);
  const double density = static_cast<double>(on) / total;
  // The radius is below one pixel here, so matches need an exact hit.
  ASSERT_LT(match_radius(60, 50, cfg), 1.0);
  for (const auto& p : c.points) {
    if (p.recall < 0.4) continue;  // small counts are too noisy
    EXPECT_NEAR(p.precision, density, 0.25 * density) << p.threshold;
  }
}

TEST(Evaluate, CurveInvariants) {
  const Suite s = make_suite(8, 0.6, 4);
  // Recall only grows with the detected set when the thresholded maps are
  // used as they are; thinning a dense noise map can remove matched pixels.
  MatchConfig cfg;
  cfg.thin_detections = false;
  const PRCurve c = evaluate(s.detections, s.gts, cfg);
  ASSERT_FALSE(c.points.empty());
  for (size_t t = 0; t < c.points.size(); ++t) {
    const auto& p = c.points[t];
    EXPECT_GE(p.precision, 0.0);
    EXPECT_LE(p.precision, 1.0);
    EXPECT_GE(p.recall, 0.0);
    EXPECT_LE(p.recall, 1.0);
    EXPECT_NEAR(p.f, f_measure(p.precision, p.recall), 1e-12);
    EXPECT_GE(c.ods, p.f);
    if (t > 0) {
      EXPECT_LT(p.threshold, c.points[t - 1].threshold);
      EXPECT_GE(p.recall, c.points[t - 1].recall);
    }
  }
  EXPECT_GE(c.ois, c.ods);
  EXPECT_GT(c.ap, 0.0);
  EXPECT_LE(c.ap, 1.0);
}

TEST(Evaluate, OisNeverBelowOdsOnManyRandomSuites) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const Suite s = make_suite(4, 0.3 + 0.1 * static_cast<double>(seed % 5), seed);
    MatchConfig cfg;
    cfg.n_thresholds = 20;
    const PRCurve c = evaluate(s.detections, s.gts, cfg);
    EXPECT_GE(c.ois, c.ods) << seed;
  }
}

size_t distinct_values(const std::vector<ImageF>& maps) {
  std::vector<float> v;
  for (const auto& m : maps) v.insert(v.end(), m.data().begin(), m.data().end());
  std::sort(v.begin(), v.end());
  return static_cast<size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

TEST(Evaluate, InvariantUnderStrictlyIncreasingMaps) {
  Suite s = make_suite(6, 0.7, 5);
  // Quantize so the float images of the maps below stay distinct; a map that
  // merges two values after rounding is no longer strictly increasing.
  for (auto& d : s.detections)
    for (float& v : d.data()) v = std::round(v * 4096.0f) / 4096.0f;
  const PRCurve base = evaluate(s.detections, s.gts);
  const size_t distinct = distinct_values(s.detections);
  for (auto f : {+[](float v) { return v * v * v; },
                 +[](float v) { return std::exp(3.0f * v); },
                 +[](float v) { return std::sqrt(v) * 10.0f - 4.0f; }}) {
    std::vector<ImageF> mapped = s.detections;
    for (auto& d : mapped)
      for (float& v : d.data()) v = f(v);
    ASSERT_EQ(distinct_values(mapped), distinct);
    const PRCurve c = evaluate(mapped, s.gts);
    EXPECT_NEAR(c.ods, base.ods, 1e-9);
    EXPECT_NEAR(c.ois, base.ois, 1e-9);
    EXPECT_NEAR(c.ap, base.ap, 1e-9);
  }
}

TEST(Evaluate, ThreadedMatchesSerial) {
  const Suite s = make_suite(5, 0.5, 6);
  MatchConfig cfg;
  const PRCurve a = evaluate(s.detections, s.gts, cfg);
  cfg.threads = 3;
  const PRCurve b = evaluate(s.detections, s.gts, cfg);
  EXPECT_EQ(a.ods, b.ods);
  EXPECT_EQ(a.ois, b.ois);
  EXPECT_EQ(a.ap, b.ap);
}

TEST(Evaluate, RejectsMismatchedSets) {
  const Suite s = make_suite(2, 0.1, 7);
  std::vector<std::vector<BinaryMap>> fewer(s.gts.begin(), s.gts.begin() + 1);
  EXPECT_THROW(evaluate(s.detections, fewer), std::invalid_argument);
  std::vector<std::vector<BinaryMap>> wrong = s.gts;
  wrong[1][0] = BinaryMap(5, 5);
  EXPECT_THROW(evaluate(s.detections, wrong), std::invalid_argument);
  EXPECT_THROW(evaluate({}, {}), std::invalid_argument);
}

TEST(Thresholds, DistinctDecreasingAndExcludeMinimum) {
  ImageF a(4, 1);
  a(0, 0) = 0.0f;
  a(1, 0) = 0.5f;
  a(2, 0) = 0.5f;
  a(3, 0) = 0.9f;
  const std::vector<ImageF> maps{a};
  const auto t = sweep_thresholds(maps, 99);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_FLOAT_EQ(t[0], 0.9f);
  EXPECT_FLOAT_EQ(t[1], 0.5f);
  ImageF big(1000, 1);
  for (int i = 0; i < 1000; ++i) big(i, 0) = static_cast<float>(i);
  const std::vector<ImageF> many{big};
  const auto u = sweep_thresholds(many, 99);
  EXPECT_EQ(u.size(), 99u);
  for (size_t i = 1; i < u.size(); ++i) EXPECT_LT(u[i], u[i - 1]);
}

// 400 isolated weak responses far from an 80-pixel ground-truth line whose
// own responses sit above all of them. Thresholding at the weakest line value
// detects exactly the line (F = 1). Five coarse thresholds, spaced in rank
// over all 480 values, jump from one line pixel straight into the noise.
TEST(Evaluate, RefinementResolvesTheOperatingPoint) {
  ImageF det(100, 100);
  BinaryMap gt(100, 100);
  for (int x = 10; x < 90; ++x) {
    gt(x, 10) = 1;
    det(x, 10) = 2.0f + 0.001f * x;
  }
  int k = 1;
  for (int y = 52; y < 92; y += 2)
    for (int x = 10; x < 50; x += 2) det(x, y) = 0.002f * k++;
  const std::vector<ImageF> dets{det};
  const std::vector<std::vector<BinaryMap>> gts{{gt}};

  MatchConfig coarse;
  coarse.n_thresholds = 5;
  coarse.refine_thresholds = 0;
  const PRCurve c = evaluate(dets, gts, coarse);
  EXPECT_EQ(c.points.size(), 5u);
  // Best coarse threshold: noise rank 359, so 80 line + 41 noise pixels at
  // full recall, F = 2 * 80 / (80 + 121).
  EXPECT_NEAR(c.ods, 160.0 / 201.0, 1e-12);

  MatchConfig refined = coarse;
  refined.refine_thresholds = 99;
  const PRCurve r = evaluate(dets, gts, refined);
  EXPECT_GT(r.points.size(), c.points.size());
  for (size_t t = 1; t < r.points.size(); ++t)
    EXPECT_LT(r.points[t].threshold, r.points[t - 1].threshold);
  // The refined grid steps about 2.4 ranks, so it lands within 3 line pixels
  // of the optimum.
  EXPECT_GE(r.ods, 2.0 * 77 / (77 + 80) + 1e-12);
  EXPECT_GE(r.ois, r.ods);
  // Every coarse point survives unchanged.
  for (const auto& p : c.points) {
    const auto it = std::find_if(r.points.begin(), r.points.end(),
                                 [&](const PRPoint& q) { return q.threshold == p.threshold; });
    ASSERT_NE(it, r.points.end());
    EXPECT_EQ(it->precision, p.precision);
    EXPECT_EQ(it->recall, p.recall);
  }
}

TEST(Evaluate, RejectsNegativeRefinement) {
  MatchConfig cfg;
  cfg.refine_thresholds = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(AveragePrecision, TrapezoidsOverObservedRecall) {
  const std::vector<PRPoint> pts = {{0.9, 1.0, 0.2, 0}, {0.5, 0.8, 0.6, 0}, {0.1, 0.4, 1.0, 0}};
  EXPECT_NEAR(average_precision(pts, false), 0.4 * 0.9 + 0.4 * 0.6, 1e-12);
  EXPECT_NEAR(average_precision(pts, true), 0.2 + 0.4 * 0.9 + 0.4 * 0.6, 1e-12);
}

std::vector<ImageF> sample_maps(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<float> g(2.0f, 0.15f);
  std::vector<ImageF> out;
  for (int i = 0; i < n; ++i) {
    ImageF m(50, 40);
    for (float& v : m.data()) v = std::min(1.0f, g(rng));
    out.push_back(m);
  }
  return out;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

TEST(HistogramNormalize, SelfReferenceIsNearIdentity) {
  const auto maps = sample_maps(4, 1);
  const auto r = histogram_normalize(maps, maps);
  for (size_t i = 0; i < maps.size(); ++i)
    for (size_t j = 0; j < maps[i].data().size(); j += 37)
      EXPECT_NEAR(r.maps[i].data()[j], maps[i].data()[j], 0.02);
}

TEST(HistogramNormalize, DistortedInputsMatchReferenceHistogram) {
  const auto reference = sample_maps(6, 2);
  auto maps = sample_maps(6, 3);
  for (auto& m : maps)
    for (float& v : m.data()) v = std::pow(v, 3.0f) * 5.0f + 0.1f * v;
  const auto r = histogram_normalize(maps, reference);
  const auto hr = value_histogram(reference, 20, 0.0f, 1.0f);
  const auto hn = value_histogram(r.maps, 20, 0.0f, 1.0f);
  EXPECT_LE(l1(hr, hn), 0.02);
}

TEST(HistogramNormalize, TransformIsStrictlyIncreasingAndPreservesOds) {
  const Suite s = make_suite(5, 0.5, 8);
  const auto reference = sample_maps(3, 4);
  const auto r = histogram_normalize(s.detections, reference);
  for (size_t j = 1; j < r.transform.out.size(); ++j)
    EXPECT_GT(r.transform.out[j], r.transform.out[j - 1]);
  const PRCurve before = evaluate(s.detections, s.gts);
  const PRCurve after = evaluate(r.maps, s.gts);
  EXPECT_NEAR(before.ods, after.ods, 1e-9);
  EXPECT_NEAR(before.ap, after.ap, 1e-9);
}

TEST(HistogramNormalize, ConstantMapsGiveIdentity) {
  const std::vector<ImageF> maps{ImageF(10, 10, 1, 0.3f), ImageF(10, 10, 1, 0.7f)};
  const std::vector<ImageF> constant_ref{ImageF(5, 5, 1, 0.5f)};
  for (const auto& ref : {std::vector<ImageF>(maps), constant_ref}) {
    const auto r = histogram_normalize(maps, ref);
    EXPECT_FLOAT_EQ(r.transform(0.3f), 0.3f);
    EXPECT_FLOAT_EQ(r.transform(0.7f), 0.7f);
  }
  EXPECT_THROW(histogram_normalize({}, maps), std::invalid_argument);
}

TEST(Report, TableSummaryAndPlot) {
  const Suite s = make_suite(3, 0.4, 9);
  const PRCurve c = evaluate(s.detections, s.gts);
  std::ostringstream table, summary;
  write_pr_table(c, table);
  write_summary(c, summary);
  const std::string text = table.str();
  EXPECT_EQ(static_cast<size_t>(std::count(text.begin(), text.end(), '\n')), c.points.size() + 1);
  EXPECT_NE(summary.str().find("ODS"), std::string::npos);
  const ImageU8 plot = render_pr_plot(c, 200);
  EXPECT_EQ(plot.width(), 200);
  EXPECT_EQ(plot.channels(), 3);
}

}  // namespace
}  // namespace oef
