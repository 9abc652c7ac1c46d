#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lanegen/error.hpp"
#include "lanegen/eval.hpp"

using namespace lanegen;

namespace {

GroundTruthLane gt_lane(double y, double x0 = -20, double x1 = 20) {
  return synthesize_dividers(resample(Polyline({{x0, y}, {x1, y}}), 20), 3.5);
}

/// The lane moved sideways by `dy`, so every polyline sits exactly `dy`
/// from its ground-truth counterpart.
PredictedLane shifted(const GroundTruthLane& g, double dy, double confidence) {
  PredictedLane p;
  for (std::size_t i = 0; i < g.centerline.size(); ++i) {
    p.centerline.push_back(g.centerline[i] + Point2{0, dy});
    p.left.push_back(g.left[i] + Point2{0, dy});
    p.right.push_back(g.right[i] + Point2{0, dy});
  }
  p.confidence = confidence;
  return p;
}

}  // namespace

TEST(Chamfer, DensifiedParallelLines) {
  const GroundTruthLane g = gt_lane(0);
  const PredictedLane p = shifted(g, 0.3, 1.0);
  std::vector<Point2> gc(g.centerline.points().begin(), g.centerline.points().end());
  EXPECT_NEAR(polyline_chamfer(p.centerline, gc), 0.3, 1e-12);
}

TEST(AveragePrecision, OnePerfectPrediction) {
  const GroundTruthLane g = gt_lane(0);
  const APResult r = evaluate({shifted(g, 0, 0.9)}, {g});
  EXPECT_DOUBLE_EQ(r.ap_c, 1.0);
  EXPECT_DOUBLE_EQ(r.ap_ld, 1.0);
  EXPECT_DOUBLE_EQ(r.ap, 1.0);
}

TEST(AveragePrecision, FalsePositiveAfterFullRecall) {
  const GroundTruthLane g = gt_lane(0);
  const APResult r = evaluate({shifted(g, 0.3, 0.9), shifted(g, 25, 0.2)}, {g});
  for (double v : r.ap_tau) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(AveragePrecision, RecallCapsAtHalf) {
  const GroundTruthLane a = gt_lane(0), b = gt_lane(10);
  const APResult r = evaluate({shifted(a, 0, 0.9)}, {a, b});
  for (double v : r.ap_tau) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(AveragePrecision, InterleavedFalsePositive) {
  // Confidence order TP, FP, TP against 2 GT:
  //   (recall, precision) = (0.5, 1), (0.5, 0.5), (1, 2/3).
  // Interpolated area: 0.5 * 1 + 0.5 * 2/3 = 5/6.
  const GroundTruthLane a = gt_lane(0), b = gt_lane(12);
  const APResult r = evaluate({shifted(a, 0, 0.9), shifted(a, -25, 0.8), shifted(b, 0, 0.7)}, {a, b});
  EXPECT_NEAR(r.ap_c, 5.0 / 6.0, 1e-9);
  EXPECT_NEAR(r.ap_ld, 5.0 / 6.0, 1e-9);
}

TEST(AveragePrecision, LeadingFalsePositive) {
  // FP, TP, TP, FP against 3 GT:
  //   (0, 0), (1/3, 1/2), (2/3, 2/3), (2/3, 1/2).
  // Envelope is 2/3 up to recall 2/3: area 4/9.
  const GroundTruthLane a = gt_lane(0), b = gt_lane(12), c = gt_lane(-12);
  const APResult r = evaluate(
      {shifted(a, 25, 0.9), shifted(a, 0, 0.8), shifted(b, 0, 0.7), shifted(b, 40, 0.6)}, {a, b, c});
  EXPECT_NEAR(r.ap_c, 4.0 / 9.0, 1e-9);
}

TEST(AveragePrecision, ThresholdDependentMatch) {
  // 0.75 m off: FP at 0.5 m, TP at 1.0 and 1.5 m. AP = (0 + 1 + 1) / 3.
  const GroundTruthLane g = gt_lane(0);
  const APResult r = evaluate({shifted(g, 0.75, 0.9)}, {g});
  EXPECT_DOUBLE_EQ(r.ap_c_tau[0], 0.0);
  EXPECT_DOUBLE_EQ(r.ap_c_tau[1], 1.0);
  EXPECT_DOUBLE_EQ(r.ap_c_tau[2], 1.0);
  EXPECT_NEAR(r.ap_c, 2.0 / 3.0, 1e-9);
}

TEST(AveragePrecision, DividersAreSeparateInstances) {
  // The left divider of lane a coincides with the right divider of lane b
  // (3.5 m apart). A prediction of a alone recovers 2 of the 4 dividers.
  const GroundTruthLane a = gt_lane(0), b = gt_lane(3.5);
  const APResult r = evaluate({shifted(a, 0, 0.9)}, {a, b});
  EXPECT_NEAR(r.ap_ld, 0.5, 1e-9);
  EXPECT_NEAR(r.ap_c, 0.5, 1e-9);
}

TEST(AveragePrecision, GreedyMatchAndRecords) {
  // Both predictions are closest to GT 0. The more confident one takes it;
  // the other has only GT 1 left, 5 m away, and becomes a false positive.
  const std::vector<std::vector<double>> dist{{0.2, 5.0}, {0.1, 0.9}};
  const auto rec = greedy_match({0.5, 0.9}, dist, 1.0);
  ASSERT_EQ(rec.size(), 2u);
  for (const EvalRecord& e : rec) {
    if (e.confidence == 0.9) {
      EXPECT_TRUE(e.true_positive);
      EXPECT_EQ(e.matched_gt, 0);
    } else {
      EXPECT_FALSE(e.true_positive);
    }
  }
  EXPECT_DOUBLE_EQ(average_precision(rec, 2), 0.5);
  // With GT 1 in reach the second prediction takes it.
  EXPECT_DOUBLE_EQ(average_precision(greedy_match({0.5, 0.9}, {{0.2, 0.8}, {0.1, 0.9}}, 1.0), 2), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({}, 3), 0.0);
}

TEST(Evaluate, DatasetLevelPooling) {
  const GroundTruthLane a = gt_lane(0), b = gt_lane(12);
  const TileEval t1{0, {shifted(a, 0, 0.9), shifted(a, -25, 0.8)}, {a}};
  const TileEval t2{1, {shifted(b, 0.6, 0.7)}, {b}};
  const std::vector<double> th{0.5, 1.0, 1.5};
  const APResult one = evaluate_tiles({t1, t2}, th);
  const APResult twice = evaluate_tiles({t1, t2, t1, t2}, th);
  const APResult shuffled = evaluate_tiles({t2, t1}, th);
  EXPECT_NEAR(one.ap, twice.ap, 1e-12);
  EXPECT_EQ(one.ap_tau, shuffled.ap_tau);
  EXPECT_EQ(one.ap, shuffled.ap);
}

TEST(Evaluate, EmptyCases) {
  const GroundTruthLane g = gt_lane(0);
  const APResult r = evaluate({shifted(g, 0, 0.9)}, {});
  EXPECT_EQ(r.ap, 0.0);
  EXPECT_TRUE(r.empty_ground_truth);
  try {
    evaluate({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoInstances);
  }
}

TEST(Evaluate, MonotoneInThresholdAndRankInvariant) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> conf(0.01, 0.99), off(-2.5, 2.5), y(-25, 25);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GroundTruthLane> gts;
    const int ng = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < ng; ++i) gts.push_back(gt_lane(y(rng)));
    std::vector<PredictedLane> preds;
    const int np = static_cast<int>(rng() % 8);
    for (int i = 0; i < np; ++i) preds.push_back(shifted(gts[rng() % gts.size()], off(rng), conf(rng)));
    const APResult r = evaluate(preds, gts);
    EXPECT_LE(r.ap_tau[0], r.ap_tau[1] + 1e-12);
    EXPECT_LE(r.ap_tau[1], r.ap_tau[2] + 1e-12);
    EXPECT_LE(r.ap_c_tau[0], r.ap_c_tau[1] + 1e-12);
    EXPECT_LE(r.ap_ld_tau[1], r.ap_ld_tau[2] + 1e-12);
    EXPECT_NEAR(r.ap, 0.5 * (r.ap_c + r.ap_ld), 1e-12);

    std::vector<PredictedLane> squashed = preds;
    for (PredictedLane& p : squashed) p.confidence = std::pow(p.confidence, 3.0) * 0.5;
    const APResult s = evaluate(squashed, gts);
    EXPECT_EQ(s.ap_tau, r.ap_tau);
  }
}

TEST(Results, FileFields) {
  const GroundTruthLane g = gt_lane(0);
  std::vector<TileBreakdown> per;
  const APResult r = evaluate_tiles({{7, {shifted(g, 0.75, 0.9)}, {g}}}, {0.5, 1.0, 1.5}, &per);
  const std::string text = results_to_string(r, per);
  EXPECT_NE(text.find("AP=66.6667"), std::string::npos) << text;
  EXPECT_NE(text.find("AP_c="), std::string::npos);
  EXPECT_NE(text.find("AP_ld="), std::string::npos);
  EXPECT_NE(text.find("AP@0.50=0.0000"), std::string::npos);
  EXPECT_NE(text.find("AP@1.50=100.0000"), std::string::npos);
  ASSERT_EQ(per.size(), 1u);
  EXPECT_EQ(per[0].tile_id, 7);
}
