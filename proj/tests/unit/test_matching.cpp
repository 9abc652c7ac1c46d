#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lanegen/error.hpp"
#include "lanegen/matching.hpp"

using namespace lanegen;

namespace {

double brute_force(const CostMatrix& c) {
  std::vector<int> perm(static_cast<std::size_t>(c.n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, assignment_cost(c, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// M points per lane, every coordinate set to `v`.
std::vector<double> flat_lane(int m, double v) { return std::vector<double>(static_cast<std::size_t>(m) * 6, v); }

}  // namespace

TEST(Hungarian, TwoByTwo) {
  CostMatrix c(2);
  c(0, 0) = 1;
  c(0, 1) = 2;
  c(1, 0) = 2;
  c(1, 1) = 1;
  const std::vector<int> a = hungarian(c);
  EXPECT_EQ(a, (std::vector<int>{0, 1}));
  EXPECT_EQ(assignment_cost(c, a), 2.0);
}

TEST(Hungarian, DiagonalFavoringIsIdentity) {
  CostMatrix c(5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) c(i, j) = i == j ? 0.0 : 1.0 + i + j;
  }
  EXPECT_EQ(hungarian(c), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0, 10);
  std::uniform_int_distribution<int> small(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 7;
    CostMatrix c(n);
    // Every third matrix uses small integers so ties are common.
    for (double& v : c.values) v = trial % 3 == 0 ? small(rng) : u(rng);
    const std::vector<int> a = hungarian(c);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    EXPECT_EQ(assignment_cost(c, a), brute_force(c)) << "trial " << trial;
  }
}

TEST(Hungarian, RejectsNaN) {
  CostMatrix c(2);
  c(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    hungarian(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadCost);
  }
}

TEST(FocalCost, ClosedForm) {
  // alpha (1 - p)^gamma (-log p) at p = 0.5: 0.25 * 0.25 * ln 2.
  EXPECT_NEAR(focal_object_cost(0.5, 0.25, 2.0), 0.0625 * std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_empty_cost(0.5, 0.25, 2.0), 0.1875 * std::log(2.0), 1e-15);
}

TEST(MatchCost, HandComputedTwoByTwo) {
  // M = 2. Prediction 0 sits at 0 in every coordinate, prediction 1 at 1;
  // target 0 at 0, target 1 at 2. Mean |diff| over the 12 values:
  //   (p0, t0) = 0, (p0, t1) = 2, (p1, t0) = 1, (p1, t1) = 1.
  // Both predictions have p = 0.5, adding the object cost
  //   k = 0.25 * 0.25 * ln 2 = 0.0433216988...
  std::vector<double> pts = flat_lane(2, 0.0);
  const std::vector<double> p1 = flat_lane(2, 1.0);
  pts.insert(pts.end(), p1.begin(), p1.end());
  const std::vector<double> probs{0.5, 0.5};
  const std::vector<std::vector<double>> targets{flat_lane(2, 0.0), flat_lane(2, 2.0)};
  const CostMatrix c = match_cost(pts, probs, 2, targets, MatchWeights{});
  const double k = 0.0625 * std::log(2.0);
  EXPECT_NEAR(c(0, 0), 0.0 + k, 1e-12);
  EXPECT_NEAR(c(0, 1), 2.0 + k, 1e-12);
  EXPECT_NEAR(c(1, 0), 1.0 + k, 1e-12);
  EXPECT_NEAR(c(1, 1), 1.0 + k, 1e-12);
  const Assignment a = match(pts, probs, 2, targets, MatchWeights{});
  EXPECT_EQ(a.slot, (std::vector<int>{0, 1}));
  EXPECT_NEAR(a.cost, 1.0 + 2 * k, 1e-12);
}

TEST(MatchCost, ExactConfidentPredictionIsStrictlyCheapest) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 5);
  const int m = 4;
  std::vector<std::vector<double>> targets(3, std::vector<double>(m * 6));
  for (auto& t : targets) {
    for (double& v : t) v = n(rng);
  }
  std::vector<double> pts;
  for (int p = 0; p < 3; ++p) {
    for (int i = 0; i < m * 6; ++i) pts.push_back(n(rng));
  }
  // Prediction 1 equals target 2 and is confident.
  std::copy(targets[2].begin(), targets[2].end(), pts.begin() + m * 6);
  const std::vector<double> probs{0.3, 0.99, 0.3};
  const CostMatrix c = match_cost(pts, probs, m, targets, MatchWeights{});
  for (int r = 0; r < 3; ++r) {
    if (r != 1) EXPECT_LT(c(1, 2), c(r, 2));
  }
  for (int col = 0; col < 3; ++col) {
    if (col != 2) EXPECT_LT(c(1, 2), c(1, col));
  }
  EXPECT_EQ(match(pts, probs, m, targets, MatchWeights{}).slot[1], 2);
}

TEST(MatchCost, IdenticalTargetsTie) {
  const std::vector<std::vector<double>> targets{flat_lane(2, 1.0), flat_lane(2, 1.0)};
  std::vector<double> pts = flat_lane(2, 0.0);
  const std::vector<double> p1 = flat_lane(2, 3.0);
  pts.insert(pts.end(), p1.begin(), p1.end());
  const std::vector<double> probs{0.4, 0.6};
  const CostMatrix c = match_cost(pts, probs, 2, targets, MatchWeights{});
  EXPECT_DOUBLE_EQ(assignment_cost(c, std::vector<int>{0, 1}), assignment_cost(c, std::vector<int>{1, 0}));
}

TEST(MatchCost, MorePredictionsThanTargets) {
  const std::vector<std::vector<double>> targets{flat_lane(2, 1.0)};
  std::vector<double> pts;
  for (double v : {5.0, 1.0, -3.0}) {
    const auto l = flat_lane(2, v);
    pts.insert(pts.end(), l.begin(), l.end());
  }
  const Assignment a = match(pts, std::vector<double>{0.5, 0.5, 0.5}, 2, targets, MatchWeights{});
  EXPECT_EQ(a.matched_count(), 1);
  EXPECT_TRUE(a.matched(1));
  EXPECT_EQ(a.pairs(), (std::vector<std::pair<int, int>>{{1, 0}}));
}
