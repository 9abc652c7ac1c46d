#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "lanegen/config.hpp"
#include "lanegen/error.hpp"
#include "lanegen/pipeline.hpp"
#include "lanegen/scene.hpp"
#include "lanegen/scene_io.hpp"

using namespace lanegen;

namespace fs = std::filesystem;

TEST(Synth, SameSeedIsBitwiseIdentical) {
  for (Layout l : {Layout::Straight, Layout::Curve, Layout::Merge, Layout::Intersection, Layout::Grid}) {
    const Scene a = generate_scene(l, 4, 0.3, 99);
    const Scene b = generate_scene(l, 4, 0.3, 99);
    EXPECT_TRUE(a == b) << to_string(l);
    EXPECT_EQ(scene_to_string(a), scene_to_string(b));
  }
  EXPECT_FALSE(generate_scene(Layout::Curve, 4, 0.3, 1) == generate_scene(Layout::Curve, 4, 0.3, 2));
}

TEST(Synth, ZeroNoiseTrajectoriesLieOnCenterlines) {
  for (Layout l : {Layout::Straight, Layout::Curve, Layout::Merge, Layout::Grid}) {
    const Scene s = generate_scene(l, 1, 0.0, 5);
    ASSERT_FALSE(s.trajectories.empty());
    for (const Trajectory& t : s.trajectories) {
      for (const TrajectoryPoint& p : t.points) {
        double best = std::numeric_limits<double>::infinity();
        // Edges rather than paths: the grid has cycles.
        for (const MapEdge& e : s.map.edges()) best = std::min(best, project(e.geometry, p.position).distance);
        EXPECT_LT(best, 1e-9) << to_string(l);
      }
    }
  }
}

TEST(Synth, TrajectoriesAreValid) {
  const Scene s = generate_scene(Layout::Intersection, 6, 0.3, 3);
  for (const Trajectory& t : s.trajectories) EXPECT_NO_THROW(t.validate());
}

TEST(Synth, UnknownLayout) {
  try {
    parse_layout("roundabout");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLayout);
  }
}

TEST(Synth, InternalPresetMatchesTileStatistics) {
  // Reference per-tile statistics for the internal-like preset: about 16
  // trajectories and 3 lanes per tile on average, checked to +/-30% over at
  // least 100 tiles.
  const Config cfg = Config::paper();
  std::vector<Scene> scenes;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SceneParams p = density_preset("internal", Layout::Grid);
    p.seed = seed;
    scenes.push_back(generate_scene(p));
  }
  const std::vector<Tile> tiles = tiles_from_scenes(scenes, cfg, SplitTag::Val, 0);
  ASSERT_GE(tiles.size(), 100u);
  double traj = 0, lanes = 0;
  for (const Tile& t : tiles) {
    traj += static_cast<double>(t.trajectories.size());
    lanes += static_cast<double>(t.gt_lanes.size());
  }
  traj /= static_cast<double>(tiles.size());
  lanes /= static_cast<double>(tiles.size());
  EXPECT_GE(traj, 16 * 0.7);
  EXPECT_LE(traj, 16 * 1.3);
  EXPECT_GE(lanes, 3 * 0.7);
  EXPECT_LE(lanes, 3 * 1.3);
}

TEST(SceneIo, RoundTrip) {
  const Scene s = generate_scene(Layout::Merge, 3, 0.3, 17);
  const fs::path path = fs::temp_directory_path() / "lanegen_roundtrip.lgs";
  export_scene(s, path);
  EXPECT_TRUE(import_scene(path) == s);
  fs::remove(path);
}

TEST(SceneIo, MissingVersionIsMalformed) {
  try {
    import_scene(fs::path(LANEGEN_FIXTURE_DIR) / "missing_version.lgs");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedScene);
  }
}

TEST(SceneIo, HandWrittenFixture) {
  const Scene s = import_scene(fs::path(LANEGEN_FIXTURE_DIR) / "one_edge_scene.lgs");
  ASSERT_EQ(s.map.edges().size(), 1u);
  ASSERT_EQ(s.trajectories.size(), 1u);
  EXPECT_EQ(s.map.edges()[0].geometry.size(), 3u);
  EXPECT_EQ(s.map.edges()[0].lane_width, 3.5);
  EXPECT_EQ(s.trajectories[0].points.size(), 3u);
  EXPECT_EQ(s.trajectories[0].points[1].position, (Point2{5.5, 0.0}));
  EXPECT_EQ(s.trajectories[0].source, TrajectorySource::Ego);
  EXPECT_EQ(s.rng_seed, 42u);
}

TEST(SceneIo, SyntaxErrorIsMalformed) {
  try {
    scene_from_string("{\"format_version\": 1, ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedScene);
  }
}
