#include <algorithm>
#include <numbers>
#include <random>

#include "lanegen/error.hpp"
#include "lanegen/tiling.hpp"

namespace lanegen {

namespace {

template <typename F>
Polyline map_points(const Polyline& p, F&& f) {
  std::vector<Point2> out;
  out.reserve(p.size());
  for (const Point2& q : p.points()) out.push_back(f(q));
  return Polyline(std::move(out));
}

template <typename F>
Tile map_geometry(const Tile& tile, F&& f, bool swap_sides) {
  Tile out = tile;
  for (Trajectory& t : out.trajectories) {
    for (TrajectoryPoint& p : t.points) p.position = f(p.position);
  }
  for (GroundTruthLane& lane : out.gt_lanes) {
    Polyline c = map_points(lane.centerline, f);
    Polyline l = map_points(lane.left, f);
    Polyline r = map_points(lane.right, f);
    lane = swap_sides ? GroundTruthLane{std::move(c), std::move(r), std::move(l)}
                      : GroundTruthLane{std::move(c), std::move(l), std::move(r)};
  }
  return out;
}

}  // namespace

Tile rotate_tile(const Tile& tile, double angle) {
  const RigidTransform2 rot{angle, {}};
  return map_geometry(tile, [&](Point2 p) { return rot.apply(p); }, false);
}

Tile flip_tile(const Tile& tile, bool horizontal) {
  if (horizontal) return map_geometry(tile, [](Point2 p) { return Point2{-p.x, p.y}; }, true);
  return map_geometry(tile, [](Point2 p) { return Point2{p.x, -p.y}; }, true);
}

Tile translate_tile(const Tile& tile, Point2 offset) {
  return map_geometry(tile, [&](Point2 p) { return p + offset; }, false);
}

Tile augment(const Tile& tile, std::uint64_t seed, const AugmentConfig& aug, const TilingConfig& cfg,
             AugmentRecord* record) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentRecord rec;
  // Decisions are drawn first and in a fixed order so that a seed fully
  // determines which methods fire.
  rec.rotate = unit(rng) < aug.probability;
  rec.flip_horizontal = unit(rng) < aug.probability;
  rec.flip_vertical = unit(rng) < aug.probability;
  rec.drop_groups = unit(rng) < aug.probability;
  rec.noise = unit(rng) < aug.probability;
  rec.shift = unit(rng) < aug.probability;
  rec.mask = unit(rng) < aug.probability;
  if (record) *record = rec;
  if (!rec.any()) return tile;

  Tile out = tile;
  bool moved = false;
  if (rec.rotate) {
    rec.angle = 2 * std::numbers::pi * unit(rng);
    out = rotate_tile(out, rec.angle);
    moved = true;
  }
  if (rec.flip_horizontal) out = flip_tile(out, true);
  if (rec.flip_vertical) out = flip_tile(out, false);
  if (rec.shift) {
    std::uniform_real_distribution<double> shift(-aug.shift_range, aug.shift_range);
    rec.offset = {shift(rng), shift(rng)};
    out = translate_tile(out, rec.offset);
    moved = true;
  }
  if (moved) out = aggregate_and_filter(out, cfg);

  if (rec.drop_groups) {
    std::vector<int> group(out.trajectories.size(), -1);
    for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
      if (auto s = best_support(out.trajectories[i], out.gt_lanes, cfg)) group[i] = s->lane;
    }
    std::bernoulli_distribution drop(aug.group_drop_probability);
    std::vector<bool> dropped(out.gt_lanes.size());
    for (std::size_t k = 0; k < dropped.size(); ++k) dropped[k] = drop(rng);
    std::vector<Trajectory> kept;
    for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
      if (group[i] >= 0 && dropped[static_cast<std::size_t>(group[i])]) continue;
      kept.push_back(std::move(out.trajectories[i]));
    }
    out.trajectories = std::move(kept);
    if (out.trajectories.empty()) {
      throw Error(ErrorCode::EmptyTile, "trajectory dropout removed every trajectory");
    }
    out = aggregate_and_filter(out, cfg);
  }

  if (rec.noise) {
    std::normal_distribution<double> gauss(0.0, aug.noise_sigma);
    for (Trajectory& t : out.trajectories) {
      for (TrajectoryPoint& p : t.points) {
        p.position.x += gauss(rng);
        p.position.y += gauss(rng);
      }
    }
  }

  if (rec.mask) {
    const int count = std::uniform_int_distribution<int>(1, std::max(1, aug.max_patches))(rng);
    const Box2 b = out.bounds();
    for (int i = 0; i < count; ++i) {
      const double w = aug.patch_min + (aug.patch_max - aug.patch_min) * unit(rng);
      const double h = aug.patch_min + (aug.patch_max - aug.patch_min) * unit(rng);
      const Point2 c{b.min.x + b.width() * unit(rng), b.min.y + b.height() * unit(rng)};
      out.patch_masks.push_back(Box2::centered(c, w, h));
    }
  }
  if (record) *record = rec;
  return out;
}

}  // namespace lanegen
