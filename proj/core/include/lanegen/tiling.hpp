#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lanegen/geom.hpp"
#include "lanegen/map_graph.hpp"
#include "lanegen/scene.hpp"

namespace lanegen {

enum class SplitTag { Train, Val };

std::string_view to_string(SplitTag s);
SplitTag parse_split_tag(std::string_view s);

/// A square map region in its own frame (origin at the tile center).
/// Trajectories, lanes and patch masks are stored in that local frame.
struct Tile {
  int id = 0;
  Point2 center{};  ///< global
  double width = 60.0;
  double height = 60.0;
  /// Ground-truth centerlines are kept this far inside the tile so their
  /// dividers stay within the tile plus the 1 m tolerance.
  double gt_inset = 0.0;
  std::vector<Trajectory> trajectories;
  std::vector<GroundTruthLane> gt_lanes;
  SplitTag split = SplitTag::Train;
  /// Image regions zeroed by the rasterizer (local meters).
  std::vector<Box2> patch_masks;

  Box2 bounds() const { return Box2::centered({0.0, 0.0}, width, height); }
  Box2 gt_bounds() const { return bounds().inflated(-gt_inset); }
  RigidTransform2 to_local() const { return {0.0, -center}; }

  friend bool operator==(const Tile&, const Tile&) = default;
};

struct TilingConfig {
  double extent = 60.0;
  int points_per_lane = 20;
  double tau_align = 2.0;
  double delta_prune = 2.0;
  double default_lane_width = 3.5;
  double min_lane_length = 3.0;
  /// Allowed overhang of divider points beyond the tile.
  double gt_margin = 1.0;
  /// Point spacing used when comparing trajectories with lanes.
  double support_spacing = 0.5;
};

/// Regular grid of square cells anchored at multiples of the extent.
/// Cell index = row * nx + col; a point on a shared edge belongs to the
/// lower-index cell.
struct TileGrid {
  Point2 origin{};
  double extent = 60.0;
  int nx = 0;
  int ny = 0;

  static TileGrid covering(const Box2& box, double extent);
  int cell_count() const { return nx * ny; }
  Point2 cell_center(int index) const;
  /// -1 when outside the grid.
  int cell_of(Point2 p) const;
};

Box2 scene_bounds(const Scene& scene);

/// Clips the map and trajectories to the square at `center` and expresses
/// them in the tile frame. No filtering beyond clipping.
Tile make_tile(const Scene& scene, Point2 center, const TilingConfig& cfg, int id = 0);

/// Non-overlapping grid tiles; tiles without trajectories or lanes are dropped.
std::vector<Tile> grid_tiles(const Scene& scene, const TilingConfig& cfg);

/// Extra tiles jittered uniformly (disk of `jitter_radius`) around valid
/// grid tile centers. Deterministic per seed.
std::vector<Tile> sample_overlapping_tiles(const Scene& scene, int n_extra, double jitter_radius,
                                           std::uint64_t seed, const TilingConfig& cfg);

std::vector<Trajectory> clip_trajectory(const Trajectory& t, const Box2& box);
/// Lane pieces whose centerline lies inside `box`, each resampled to the
/// lane's point count. A lane already inside is returned unchanged.
std::vector<GroundTruthLane> clip_lane(const GroundTruthLane& lane, const Box2& box, double min_length);

/// Chamfer distance between a trajectory and the part of the lane
/// centerline it spans. Infinite when the trajectory runs against the lane
/// direction or covers (almost) nothing of it.
double support_distance(const Trajectory& t, const GroundTruthLane& lane, double spacing);

struct Support {
  int lane = -1;
  double distance = 0.0;
};

/// Best-aligned lane for a trajectory, if any is within tau_align.
std::optional<Support> best_support(const Trajectory& t, std::span<const GroundTruthLane> lanes,
                                    const TilingConfig& cfg);

/// Clips to the tile, removes trajectories no lane supports within
/// tau_align and lanes no trajectory supports. Throws EmptyTile.
Tile aggregate_and_filter(const Tile& tile, const TilingConfig& cfg);

/// Trims trajectories that run more than delta_prune past the start or end
/// of their supporting lane; trajectories left with < 2 points are dropped.
Tile prune_endpoints(const Tile& tile, const TilingConfig& cfg);

struct TileSetOptions {
  SplitTag split = SplitTag::Train;
  /// Extra jittered tiles per valid grid tile (training split only).
  int overlap_per_tile = 2;
  double jitter_radius = 15.0;
  std::uint64_t seed = 0;
};

/// grid (+ overlap) -> aggregate_and_filter -> prune_endpoints, dropping
/// tiles that end up empty. Tile ids are assigned sequentially.
std::vector<Tile> build_tiles(const Scene& scene, const TilingConfig& cfg, const TileSetOptions& opts);

// --- augmentation ----------------------------------------------------------

struct AugmentConfig {
  double probability = 0.3;
  double noise_sigma = 0.2;
  double shift_range = 3.0;
  double group_drop_probability = 0.5;
  int max_patches = 3;
  double patch_min = 2.0;
  double patch_max = 8.0;
};

/// Which augmentations fired for a sample.
struct AugmentRecord {
  bool rotate = false;
  bool flip_horizontal = false;
  bool flip_vertical = false;
  bool drop_groups = false;
  bool noise = false;
  bool shift = false;
  bool mask = false;
  double angle = 0.0;
  Point2 offset{};

  bool any() const { return rotate || flip_horizontal || flip_vertical || drop_groups || noise || shift || mask; }
};

/// Rotation about the tile origin; no clipping.
Tile rotate_tile(const Tile& tile, double angle);
/// Horizontal: x -> -x, vertical: y -> -y. Point order is kept and the
/// left/right dividers swap sides.
Tile flip_tile(const Tile& tile, bool horizontal);
Tile translate_tile(const Tile& tile, Point2 offset);

/// Training-time augmentation; every method fires independently with
/// `probability`. Throws EmptyTile if the result has no lanes left.
Tile augment(const Tile& tile, std::uint64_t seed, const AugmentConfig& aug, const TilingConfig& cfg,
             AugmentRecord* record = nullptr);

}  // namespace lanegen
