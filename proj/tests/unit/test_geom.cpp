#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lanegen/error.hpp"
#include "lanegen/geom.hpp"

using namespace lanegen;

namespace {

void expect_point(Point2 p, double x, double y, double tol = 1e-12) {
  EXPECT_NEAR(p.x, x, tol);
  EXPECT_NEAR(p.y, y, tol);
}

}  // namespace

TEST(Polyline, RejectsFewerThanTwoDistinctPoints) {
  EXPECT_THROW(Polyline({{1, 1}}), Error);
  EXPECT_THROW(Polyline({{1, 1}, {1, 1}}), Error);
  const Polyline p({{0, 0}, {0, 0}, {1, 0}});
  EXPECT_EQ(p.size(), 2u);
}

TEST(Resample, StraightSegmentTwentyPoints) {
  const Polyline r = resample(Polyline({{0, 0}, {10, 0}}), 20);
  ASSERT_EQ(r.size(), 20u);
  for (std::size_t i = 0; i < r.size(); ++i) expect_point(r[i], 10.0 * i / 19.0, 0.0, 1e-12);
}

TEST(Resample, TwoPointsIsIdentity) {
  const Polyline p({{1, 2}, {4, 6}});
  EXPECT_EQ(resample(p, 2), p);
}

TEST(Resample, LShapeFivePoints) {
  // Length 8, so samples at arclength 0, 2, 4, 6, 8:
  // (0,0) (2,0) (4,0) (4,2) (4,4).
  const Polyline r = resample(Polyline({{0, 0}, {4, 0}, {4, 4}}), 5);
  ASSERT_EQ(r.size(), 5u);
  expect_point(r[0], 0, 0);
  expect_point(r[1], 2, 0);
  expect_point(r[2], 4, 0);
  expect_point(r[3], 4, 2);
  expect_point(r[4], 4, 4);
}

TEST(Resample, IdempotentOnUniformPolylines) {
  // Points at equal angles on a circle have equal chord lengths, so the
  // polyline is already uniform in its own arclength.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> radius(2, 50), step(0.01, 0.3), phase(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const double r = radius(rng), d = step(rng), a0 = phase(rng);
    std::vector<Point2> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({r * std::cos(a0 + i * d), r * std::sin(a0 + i * d)});
    const Polyline p(pts);
    const Polyline again = resample(p, 20);
    ASSERT_EQ(again.size(), 20u);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LT(distance(p[i], again[i]), 1e-9);
  }
}

TEST(Chamfer, HandValues) {
  const std::vector<Point2> a{{0, 0}, {1, 0}};
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  const std::vector<Point2> p{{0, 0}}, q{{3, 4}};
  EXPECT_DOUBLE_EQ(chamfer_distance(p, q), 5.0);
  const std::vector<Point2> b{{0, 1}, {1, 1}};
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), 1.0);
}

TEST(Chamfer, SymmetricAndNonNegative) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> a(4), b(6);
    for (auto& p : a) p = {u(rng), u(rng)};
    for (auto& p : b) p = {u(rng), u(rng)};
    const double ab = chamfer_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_DOUBLE_EQ(ab, chamfer_distance(b, a));
  }
}

TEST(RigidTransform, HandCases) {
  const Polyline p({{1, 0}, {2, 5}});
  EXPECT_EQ(apply_transform(RigidTransform2::identity(), p), p);
  expect_point(RigidTransform2{std::numbers::pi, {}}.apply({1, 0}), -1, 0, 1e-15);
  // Rotating (2,0) by 90 degrees gives (0,2); adding (1,1) gives (1,3).
  expect_point(RigidTransform2{std::numbers::pi / 2, {1, 1}}.apply({2, 0}), 1, 3, 1e-15);
}

TEST(RigidTransform, PreservesDistancesAndComposes) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50), ang(-4, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform2 a{ang(rng), {u(rng), u(rng)}}, b{ang(rng), {u(rng), u(rng)}};
    const Point2 p{u(rng), u(rng)}, q{u(rng), u(rng)};
    EXPECT_NEAR(distance(a.apply(p), a.apply(q)), distance(p, q), 1e-9);
    const Point2 composed = (a * b).apply(p);
    const Point2 nested = a.apply(b.apply(p));
    EXPECT_NEAR(composed.x, nested.x, 1e-9);
    EXPECT_NEAR(composed.y, nested.y, 1e-9);
    const Point2 back = a.inverse().apply(a.apply(p));
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
  }
}

TEST(Geometry, ProjectionAndSubPolyline) {
  const Polyline line({{0, 0}, {10, 0}, {10, 10}});
  const Projection pr = project(line, {12, 5});
  EXPECT_DOUBLE_EQ(pr.arclength, 15.0);
  EXPECT_DOUBLE_EQ(pr.distance, 2.0);
  const Projection ext = project(line, {-3, 1}, true);
  EXPECT_DOUBLE_EQ(ext.arclength, -3.0);
  const Polyline sub = sub_polyline(line, 5, 15);
  expect_point(sub.front(), 5, 0);
  expect_point(sub.back(), 10, 5);
  EXPECT_DOUBLE_EQ(sub.length(), 10.0);
}

TEST(Geometry, ClipParameters) {
  const std::vector<Point2> pts{{-10, 0}, {10, 0}};
  const auto pieces = clip_parameters(pts, Box2::centered({0, 0}, 10, 10));
  ASSERT_EQ(pieces.size(), 1u);
  ASSERT_EQ(pieces[0].size(), 2u);
  EXPECT_NEAR(pieces[0][0], 0.25, 1e-12);
  EXPECT_NEAR(pieces[0][1], 0.75, 1e-12);
}
