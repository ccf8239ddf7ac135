#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oef/groundtruth.hpp"
#include "oef/synth.hpp"
#include "test_util.hpp"

namespace oef {
namespace {

using testing::count_on;
using testing::half_plane;
using testing::make_seg;
using testing::orientation_error_deg;

const LabelSpaceConfig kCfg;

void expect_graph_invariants(const EdgePixelGraph& g) {
  EXPECT_FALSE(has_2x2_block(g.mask));
  size_t listed = 0;
  for (size_t i = 0; i < g.lists.size(); ++i)
    for (size_t j = 0; j < g.lists[i].pixels.size(); ++j) {
      const Pixel p = g.lists[i].pixels[j];
      ASSERT_TRUE(g.mask(p.x, p.y));
      EXPECT_EQ(g.list_index(p.x, p.y), static_cast<int>(i));
      EXPECT_EQ(g.list_position(p.x, p.y), static_cast<int>(j));
      ++listed;
    }
  EXPECT_EQ(listed, static_cast<size_t>(count_on(g.mask))) << "every pixel in exactly one list";
}

TEST(ExtractBoundaries, VerticalSplitIsOneStraightList) {
  const auto seg = make_seg(12, 12, [](int x, int) { return x < 5 ? 1 : 2; });
  const EdgePixelGraph g = extract_boundaries(seg);
  expect_graph_invariants(g);
  ASSERT_EQ(g.lists.size(), 1u);
  EXPECT_TRUE(g.junctions.empty());
  EXPECT_EQ(g.lists[0].pixels.size(), 12u);
  for (Pixel p : g.lists[0].pixels) EXPECT_EQ(p.x, 4);
}

TEST(ExtractBoundaries, TJunctionHasThreeListsOneJunction) {
  const auto seg = make_seg(9, 9, [](int x, int y) { return y < 4 ? 1 : (x < 4 ? 2 : 3); });
  const EdgePixelGraph g = extract_boundaries(seg);
  expect_graph_invariants(g);
  EXPECT_EQ(g.lists.size(), 3u);
  ASSERT_EQ(g.junctions.size(), 1u);
  // Brute-force neighbor count: the junction is the only pixel with three
  // boundary neighbors.
  int three = 0;
  Pixel where{-1, -1};
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      if (g.mask(x, y) && neighbor_count(g.mask, x, y) >= 3) {
        ++three;
        where = {x, y};
      }
  EXPECT_EQ(three, 1);
  EXPECT_EQ(g.junctions[0], where);
}

TEST(ExtractBoundaries, UniformAndDegenerateMapsAreEmpty) {
  const auto uniform = make_seg(10, 7, [](int, int) { return 4; });
  const EdgePixelGraph g = extract_boundaries(uniform);
  EXPECT_EQ(count_on(g.mask), 0);
  EXPECT_TRUE(g.lists.empty());
  const EdgePixelGraph one = extract_boundaries(SegmentationMap(1, 1, 1, 3));
  EXPECT_TRUE(one.lists.empty());
  EXPECT_EQ(count_on(one.mask), 0);
}

TEST(ExtractBoundaries, SyntheticScenesSatisfyInvariants) {
  SynthConfig cfg;
  cfg.width = 120;
  cfg.height = 90;
  for (int seed = 0; seed < 5; ++seed) {
    const SynthExample ex = generate_scene(cfg, seed);
    for (const auto& seg : ex.annotators) {
      const EdgePixelGraph g = remove_spurs(extract_boundaries(seg), 7);
      expect_graph_invariants(g);
      // Away from junctions every pixel has at most two list neighbors.
      for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
          if (g.mask(x, y) && !g.is_junction({x, y})) {
            EXPECT_LE(branch_count(g.mask, x, y), 2);
          }
    }
  }
}

BinaryMap line_with_spur(int spur) {
  BinaryMap m(40, 20);
  for (int x = 2; x < 38; ++x) m(x, 5) = 1;
  for (int i = 1; i <= spur; ++i) m(20, 5 + i) = 1;
  return m;
}

TEST(RemoveSpurs, ShortSpurRemoved) {
  const EdgePixelGraph g = remove_spurs(link_edges(line_with_spur(4)), 7);
  for (int i = 1; i <= 4; ++i) EXPECT_EQ(g.mask(20, 5 + i), 0);
  EXPECT_EQ(count_on(g.mask), 36);
  EXPECT_EQ(g.lists.size(), 1u);
  EXPECT_TRUE(g.junctions.empty());
}

TEST(RemoveSpurs, SevenPixelSpurRetained) {
  const EdgePixelGraph g = remove_spurs(link_edges(line_with_spur(7)), 7);
  EXPECT_EQ(count_on(g.mask), 36 + 7);
  EXPECT_EQ(g.junctions.size(), 1u);
}

TEST(RemoveSpurs, ClosedLoopUnchanged) {
  const auto seg = make_seg(30, 30, [](int x, int y) {
    return (x >= 8 && x < 22 && y >= 6 && y < 20) ? 2 : 1;
  });
  const EdgePixelGraph g = extract_boundaries(seg);
  const EdgePixelGraph r = remove_spurs(g, 7);
  EXPECT_TRUE(std::equal(g.mask.data().begin(), g.mask.data().end(), r.mask.data().begin()));
  ASSERT_EQ(r.lists.size(), 1u);
  EXPECT_TRUE(r.lists[0].closed);
}

// Rasterized straight boundaries at every orientation bin center. The line
// passes through no pixel center, so rounding never decides a side.
TEST(EstimateTheta, BinCenterLinesWithinThreeDegrees) {
  for (int j = 0; j < kCfg.n_orient_bins; ++j) {
    const double theta = orient_bin_center(j, kCfg);
    const auto seg = half_plane(64, 64, theta, 31.7, 32.1);
    const EdgePixelGraph g = extract_boundaries(seg);
    int checked = 0;
    for (int y = 12; y < 52; ++y)
      for (int x = 12; x < 52; ++x)
        if (g.mask(x, y)) {
          EXPECT_LE(orientation_error_deg(estimate_theta(g, {x, y}, 6), theta), 3.0)
              << "bin " << j << " at " << x << "," << y;
          ++checked;
        }
    EXPECT_GT(checked, 20);
  }
}

TEST(EstimateTheta, HorizontalLineWithinOneDegree) {
  const auto seg = make_seg(40, 20, [](int, int y) { return y < 9 ? 1 : 2; });
  const EdgePixelGraph g = extract_boundaries(seg);
  for (int x = 8; x < 32; ++x) EXPECT_LE(orientation_error_deg(estimate_theta(g, {x, 8}, 6), 0.0), 1.0);
}

TEST(EstimateTheta, CircleWithinFourDegrees) {
  for (double radius : {40.0, 55.0}) {
    const int size = static_cast<int>(2 * radius + 30);
    const double c = size / 2.0;
    const auto seg = make_seg(size, size, [&](int x, int y) {
      return std::hypot(x + 0.5 - c, y + 0.5 - c) < radius ? 2 : 1;
    });
    const EdgePixelGraph g = extract_boundaries(seg);
    int checked = 0;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        if (!g.mask(x, y)) continue;
        // Tangent is perpendicular to the radius; convert to y-up angles.
        const double rx = x + 0.5 - c, ry_up = -(y + 0.5 - c);
        const double tangent = std::atan2(rx, -ry_up);
        EXPECT_LE(orientation_error_deg(estimate_theta(g, {x, y}, 6), tangent), 4.0)
            << "r=" << radius << " at " << x << "," << y;
        ++checked;
      }
    EXPECT_GT(checked, 200);
  }
}

TEST(EstimateTheta, ShortListUsesChord) {
  BinaryMap m(10, 10);
  m(3, 3) = m(4, 3) = 1;
  const EdgePixelGraph g = link_edges(m);
  EXPECT_LE(orientation_error_deg(estimate_theta(g, {3, 3}, 6), 0.0), 1e-9);
}

TEST(LabelPatch, FarFromEdgeIsBackground) {
  const auto seg = make_seg(60, 40, [](int x, int) { return x < 20 ? 1 : 2; });
  const GroundTruth gt = prepare_groundtruth(seg);
  EXPECT_EQ(label_patch(gt, {29, 20}, kCfg), kBackground);  // 10 px from x = 19
  EXPECT_EQ(label_patch(gt, {27, 20}, kCfg), kBackground);  // exactly p/2
  EXPECT_NE(label_patch(gt, {26, 20}, kCfg), kBackground);
}

TEST(LabelPatch, CenterOnVerticalEdge) {
  const auto seg = make_seg(60, 40, [](int x, int) { return x < 21 ? 1 : 2; });
  const GroundTruth gt = prepare_groundtruth(seg);
  EXPECT_EQ(decode_bins(label_patch(gt, {20, 20}, kCfg), kCfg), (LabelBins{7, 0}));
}

TEST(LabelPatch, OppositeSidesGiveOppositeDistanceSigns) {
  const auto seg = make_seg(60, 40, [](int x, int) { return x < 21 ? 1 : 2; });
  const GroundTruth gt = prepare_groundtruth(seg);
  const Pixel q{20, 20};
  for (int offset : {-3, 3}) {
    const Pixel c{q.x + offset, q.y};
    const LabelBins b = decode_bins(label_patch(gt, c, kCfg), kCfg);
    const double theta = orient_bin_center(b.orient_bin, kCfg);
    // Cross product of the tangent and the offset, both with y up.
    const double cross = std::cos(theta) * -(c.y - q.y) - std::sin(theta) * (c.x - q.x);
    EXPECT_EQ(std::abs(b.dist_bin - 7), 3);
    EXPECT_EQ(b.dist_bin > 7, cross > 0) << "offset " << offset;
  }
  EXPECT_NE(label_patch(gt, {17, 20}, kCfg), label_patch(gt, {23, 20}, kCfg));
}

TEST(LabelPatch, TranslationEquivariant) {
  SynthConfig cfg;
  cfg.width = 100;
  cfg.height = 80;
  const SynthExample ex = generate_scene(cfg, 11);
  const auto& seg = ex.annotators[0];
  const int sx = 5, sy = 3;
  const auto shifted = make_seg(seg.width() + sx, seg.height() + sy, [&](int x, int y) {
    return seg(std::max(0, x - sx), std::max(0, y - sy));
  });
  const GroundTruth a = prepare_groundtruth(seg), b = prepare_groundtruth(shifted);
  int nonzero = 0;
  for (int y = 30; y < 50; ++y)
    for (int x = 30; x < 70; ++x) {
      const EdgeLabel k = label_patch(a, {x, y}, kCfg);
      EXPECT_EQ(k, label_patch(b, {x + sx, y + sy}, kCfg)) << x << "," << y;
      nonzero += k != kBackground;
    }
  EXPECT_GT(nonzero, 0);
}

TEST(SignedEdgeDistance, LeftOfEdgeIsPositive) {
  // Vertical edge pointing up: the left side has smaller x.
  EXPECT_NEAR(signed_edge_distance({7, 10}, {10, 10}, std::numbers::pi / 2), 3.0, 1e-12);
  EXPECT_NEAR(signed_edge_distance({13, 10}, {10, 10}, std::numbers::pi / 2), -3.0, 1e-12);
  // Horizontal edge pointing right: the left side is above (smaller image y).
  EXPECT_NEAR(signed_edge_distance({10, 8}, {10, 10}, 0.0), 2.0, 1e-12);
}

TEST(CountSegments, ThreeIdsDetected) {
  const auto seg = make_seg(32, 32, [](int x, int y) { return y < 16 ? 1 : (x < 16 ? 2 : 3); });
  EXPECT_EQ(count_segments(seg, {16, 16}, 16), 3);
  EXPECT_EQ(count_segments(seg, {16, 6}, 16), 1);
  EXPECT_EQ(count_segments(seg, {6, 16}, 16), 2);
}

std::vector<std::vector<GroundTruth>> synthetic_groundtruths(int n, int w, int h) {
  SynthConfig cfg;
  cfg.width = w;
  cfg.height = h;
  std::vector<std::vector<GroundTruth>> out;
  for (int i = 0; i < n; ++i) {
    const SynthExample ex = generate_scene(cfg, 100 + i);
    std::vector<GroundTruth> per;
    for (const auto& seg : ex.annotators) per.push_back(prepare_groundtruth(seg));
    out.push_back(std::move(per));
  }
  return out;
}

TEST(SampleTrainingSet, BalancedHundredPerClass) {
  const auto gts = synthetic_groundtruths(30, 160, 120);
  const LabeledPatchSet set = sample_training_set(gts, kCfg, {100, 1, 60});
  ASSERT_EQ(set.class_counts.size(), 121u);
  for (int k = 0; k < 121; ++k) EXPECT_EQ(set.class_counts[k], 100) << "class " << k;
  EXPECT_EQ(set.patches.size(), 12100u);
  for (const auto& p : set.patches) {
    const GroundTruth& gt = gts[p.image][p.annotator];
    EXPECT_EQ(label_patch(gt, {p.x, p.y}, kCfg), p.label);
    EXPECT_LE(count_segments(gt.segments, {p.x, p.y}, kCfg.patch_size), 2);
  }
  EXPECT_GT(set.rejected_multi_segment, 0);
}

TEST(SampleTrainingSet, SameSeedSameSet) {
  const auto gts = synthetic_groundtruths(6, 120, 90);
  const auto a = sample_training_set(gts, kCfg, {10, 9, 60});
  const auto b = sample_training_set(gts, kCfg, {10, 9, 60});
  EXPECT_EQ(a.patches, b.patches);
  const auto c = sample_training_set(gts, kCfg, {10, 10, 60});
  EXPECT_NE(a.patches, c.patches);
}

TEST(SampleTrainingSet, ShortfallBalancesToMinimumAndWarns) {
  // One vertical edge: only orientation bin 0 and background can be filled.
  std::vector<std::vector<GroundTruth>> gts(1);
  gts[0].push_back(prepare_groundtruth(make_seg(64, 48, [](int x, int) { return x < 30 ? 1 : 2; })));
  testing::WarningCapture capture;
  const LabeledPatchSet set = sample_training_set(gts, kCfg, {500, 2, 20});
  EXPECT_FALSE(capture.messages.empty());
  std::int64_t common = -1;
  for (auto c : set.class_counts) {
    if (c == 0) continue;
    if (common < 0) common = c;
    EXPECT_EQ(c, common);
  }
  EXPECT_GT(common, 0);
  EXPECT_LT(common, 500);
  EXPECT_GT(set.class_counts[0], 0);
}

TEST(SampleTrainingSet, HalfPlaneNeverRejectsForSegments) {
  std::vector<std::vector<GroundTruth>> gts(1);
  gts[0].push_back(prepare_groundtruth(half_plane(80, 60, 0.4, 40, 30)));
  testing::WarningCapture capture;
  const LabeledPatchSet set = sample_training_set(gts, kCfg, {5, 3, 20});
  EXPECT_EQ(set.rejected_multi_segment, 0);
}

}  // namespace
}  // namespace oef
