#include <gtest/gtest.h>

#include <numbers>

#include "lanegen/error.hpp"
#include "lanegen/scene.hpp"
#include "lanegen/tiling.hpp"

using namespace lanegen;

namespace {

Trajectory straight_trajectory(Point2 a, Point2 b, double step = 1.0) {
  Trajectory t;
  const double len = distance(a, b);
  const int n = static_cast<int>(len / step) + 1;
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    t.points.push_back({lerp(a, b, f), 0.1 * i, 10.0});
  }
  return t;
}

/// Two eastbound roads at y = 15 and y = 75 spanning x in [0, 120].
Scene two_road_scene() {
  Scene s;
  s.map.add_node(1, {0, 15});
  s.map.add_node(2, {120, 15});
  s.map.add_node(3, {0, 75});
  s.map.add_node(4, {120, 75});
  s.map.add_edge(1, 2, {}, 3.5);
  s.map.add_edge(3, 4, {}, 3.5);
  return s;
}

Tile one_lane_tile(Point2 a, Point2 b) {
  Tile t;
  t.gt_lanes.push_back(synthesize_dividers(resample(Polyline({a, b}), 20), 3.5));
  return t;
}

void expect_tiles_near(const Tile& a, const Tile& b, double tol) {
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  ASSERT_EQ(a.gt_lanes.size(), b.gt_lanes.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    ASSERT_EQ(a.trajectories[i].points.size(), b.trajectories[i].points.size());
    for (std::size_t k = 0; k < a.trajectories[i].points.size(); ++k) {
      EXPECT_LT(distance(a.trajectories[i].points[k].position, b.trajectories[i].points[k].position), tol);
    }
  }
  for (std::size_t i = 0; i < a.gt_lanes.size(); ++i) {
    for (std::size_t k = 0; k < a.gt_lanes[i].centerline.size(); ++k) {
      EXPECT_LT(distance(a.gt_lanes[i].centerline[k], b.gt_lanes[i].centerline[k]), tol);
      EXPECT_LT(distance(a.gt_lanes[i].left[k], b.gt_lanes[i].left[k]), tol);
      EXPECT_LT(distance(a.gt_lanes[i].right[k], b.gt_lanes[i].right[k]), tol);
    }
  }
}

}  // namespace

TEST(GridTiles, SceneOf120MetersGivesAtMostFourTiles) {
  Scene s = two_road_scene();
  s.trajectories.push_back(straight_trajectory({0, 15}, {120, 15}));
  s.trajectories.push_back(straight_trajectory({0, 75}, {120, 75}));
  const TilingConfig cfg;
  const std::vector<Tile> tiles = grid_tiles(s, cfg);
  EXPECT_LE(tiles.size(), 4u);
  EXPECT_GE(tiles.size(), 1u);
  for (const Tile& t : tiles) {
    EXPECT_EQ(t.width, 60.0);
    EXPECT_EQ(t.height, 60.0);
  }
}

TEST(GridTiles, EmptySceneGivesNoTiles) {
  EXPECT_TRUE(grid_tiles(Scene{}, TilingConfig{}).empty());
}

TEST(BuildTiles, OnlyTheQuadrantWithTrajectoriesSurvives) {
  Scene s = two_road_scene();
  s.trajectories.push_back(straight_trajectory({5, 15}, {55, 15}));
  TileSetOptions opts;
  opts.split = SplitTag::Val;
  const std::vector<Tile> tiles = build_tiles(s, TilingConfig{}, opts);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0].center, (Point2{30, 30}));
}

TEST(OverlapTiles, Counts) {
  Scene s = two_road_scene();
  s.trajectories.push_back(straight_trajectory({0, 15}, {120, 15}));
  const TilingConfig cfg;
  EXPECT_TRUE(sample_overlapping_tiles(s, 0, 15, 1, cfg).empty());

  const std::vector<Tile> grid = grid_tiles(s, cfg);
  const std::vector<Tile> extra = sample_overlapping_tiles(s, 10, 15, 1, cfg);
  ASSERT_EQ(extra.size(), 10u);
  for (const Tile& t : extra) {
    double best = 1e9;
    for (const Tile& g : grid) best = std::min(best, distance(t.center, g.center));
    EXPECT_LE(best, 15.0 + 1e-9);
  }

  const std::vector<Tile> same = sample_overlapping_tiles(s, 3, 0, 1, cfg);
  for (const Tile& t : same) {
    bool found = false;
    for (const Tile& g : grid) found = found || g.center == t.center;
    EXPECT_TRUE(found);
  }
}

TEST(AggregateAndFilter, RemovesMisalignedTrajectories) {
  Tile t = one_lane_tile({-20, 0}, {20, 0});
  t.trajectories.push_back(straight_trajectory({-20, 0.2}, {20, 0.2}));
  t.trajectories.push_back(straight_trajectory({-20, 10}, {20, 10}));
  const Tile f = aggregate_and_filter(t, TilingConfig{});
  ASSERT_EQ(f.trajectories.size(), 1u);
  EXPECT_NEAR(f.trajectories[0].points[0].position.y, 0.2, 1e-12);
  EXPECT_EQ(f.gt_lanes.size(), 1u);
}

TEST(AggregateAndFilter, AlignedDataUnchanged) {
  Tile t = one_lane_tile({-20, 0}, {20, 0});
  t.trajectories.push_back(straight_trajectory({-20, 0}, {20, 0}));
  const Tile f = aggregate_and_filter(t, TilingConfig{});
  EXPECT_TRUE(f == t);
}

TEST(AggregateAndFilter, RemovesUnsupportedLanes) {
  Tile t = one_lane_tile({-20, 0}, {20, 0});
  t.gt_lanes.push_back(synthesize_dividers(resample(Polyline({{-20, 20}, {20, 20}}), 20), 3.5));
  t.trajectories.push_back(straight_trajectory({-20, 0}, {20, 0}));
  const Tile f = aggregate_and_filter(t, TilingConfig{});
  ASSERT_EQ(f.gt_lanes.size(), 1u);
  EXPECT_EQ(f.gt_lanes[0].centerline.front().y, 0.0);
}

TEST(AggregateAndFilter, NothingAlignedThrowsEmptyTile) {
  Tile t = one_lane_tile({-20, 0}, {20, 0});
  t.trajectories.push_back(straight_trajectory({-20, 10}, {20, 10}));
  try {
    aggregate_and_filter(t, TilingConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTile);
  }
}

TEST(PruneEndpoints, TrimsOvershoot) {
  // Lane from x = -20 to x = 10; the trajectory runs on to x = 15.
  Tile t = one_lane_tile({-20, 0}, {10, 0});
  t.trajectories.push_back(straight_trajectory({-20, 0}, {15, 0}));
  const Tile p = prune_endpoints(t, TilingConfig{});
  ASSERT_EQ(p.trajectories.size(), 1u);
  const double end = p.trajectories[0].points.back().position.x;
  EXPECT_GE(end, 10.0 - 2.0);
  EXPECT_LE(end, 10.0 + 2.0);
  EXPECT_EQ(p.gt_lanes, t.gt_lanes);
}

TEST(PruneEndpoints, AlignedUnchanged) {
  Tile t = one_lane_tile({-20, 0}, {10, 0});
  t.trajectories.push_back(straight_trajectory({-20, 0}, {10, 0}));
  EXPECT_TRUE(prune_endpoints(t, TilingConfig{}) == t);
}

TEST(PruneEndpoints, OutsideSpanDropped) {
  Tile t = one_lane_tile({-20, 0}, {10, 0});
  t.trajectories.push_back(straight_trajectory({15, 0}, {25, 0}));
  EXPECT_TRUE(prune_endpoints(t, TilingConfig{}).trajectories.empty());
}

TEST(BuildTiles, TrajectoriesStayWithinAlignmentThreshold) {
  const Scene s = generate_scene(Layout::Grid, 6, 0.3, 4);
  const TilingConfig cfg;
  for (const Tile& t : build_tiles(s, cfg, TileSetOptions{})) {
    for (const Trajectory& tr : t.trajectories) {
      const auto support = best_support(tr, t.gt_lanes, cfg);
      ASSERT_TRUE(support.has_value());
      EXPECT_LE(support->distance, cfg.tau_align);
    }
  }
}

TEST(Augment, AllMissesIsIdentity) {
  Tile t = one_lane_tile({-20, 0}, {20, 0});
  t.trajectories.push_back(straight_trajectory({-20, 0.3}, {20, 0.3}));
  const AugmentConfig aug;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 200 && checked < 3; ++seed) {
    AugmentRecord rec;
    Tile out;
    try {
      out = augment(t, seed, aug, TilingConfig{}, &rec);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyTile);
      continue;
    }
    if (rec.any()) continue;
    EXPECT_TRUE(out == t);
    ++checked;
  }
  EXPECT_EQ(checked, 3);
}

TEST(Augment, HorizontalFlip) {
  Tile t = one_lane_tile({-20, 5}, {20, 5});
  t.trajectories.push_back(straight_trajectory({-20, 5}, {20, 5}));
  const Tile f = flip_tile(t, true);
  // x -> -x: the eastbound lane at y = 5 becomes westbound; its left
  // divider (north side, y = 6.75) stays north but is now on the right.
  const GroundTruthLane& lane = f.gt_lanes[0];
  EXPECT_EQ(lane.centerline.front(), (Point2{20, 5}));
  EXPECT_EQ(lane.centerline.back(), (Point2{-20, 5}));
  EXPECT_NEAR(lane.left.front().y, 5 - 1.75, 1e-12);
  EXPECT_NEAR(lane.right.front().y, 5 + 1.75, 1e-12);
  EXPECT_TRUE(is_valid_lane(lane));
  EXPECT_EQ(f.trajectories[0].points.front().position, (Point2{20, 5}));
  for (std::size_t i = 0; i < lane.centerline.size(); ++i) {
    EXPECT_NEAR(lane.left[i].y + lane.right[i].y, 2 * lane.centerline[i].y, 1e-12);
  }
}

TEST(Augment, RotateByPiTwiceIsIdentity) {
  Tile t = one_lane_tile({-20, 3}, {18, -7});
  t.trajectories.push_back(straight_trajectory({-20, 3}, {18, -7}));
  expect_tiles_near(rotate_tile(rotate_tile(t, std::numbers::pi), std::numbers::pi), t, 1e-9);
}

TEST(Augment, ReproducibleAndSymmetric) {
  const Scene s = generate_scene(Layout::Curve, 8, 0.3, 2);
  const std::vector<Tile> tiles = build_tiles(s, TilingConfig{}, TileSetOptions{});
  ASSERT_FALSE(tiles.empty());
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Tile a, b;
    try {
      a = augment(tiles[0], seed, AugmentConfig{}, TilingConfig{});
      b = augment(tiles[0], seed, AugmentConfig{}, TilingConfig{});
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyTile);
      continue;
    }
    EXPECT_TRUE(a == b);
    for (const GroundTruthLane& l : a.gt_lanes) {
      for (std::size_t i = 0; i < l.centerline.size(); ++i) {
        EXPECT_NEAR(l.left[i].x + l.right[i].x, 2 * l.centerline[i].x, 1e-9);
        EXPECT_NEAR(l.left[i].y + l.right[i].y, 2 * l.centerline[i].y, 1e-9);
      }
    }
  }
}
