#include "lanegen/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "lanegen/error.hpp"

namespace lanegen {

std::string_view to_string(SplitTag s) { return s == SplitTag::Train ? "train" : "val"; }

SplitTag parse_split_tag(std::string_view s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  throw Error(ErrorCode::InvalidArgument, "unknown split tag '" + std::string(s) + "'");
}

TileGrid TileGrid::covering(const Box2& box, double extent) {
  if (!(extent > 0.0)) throw Error(ErrorCode::InvalidArgument, "tile extent must be positive");
  TileGrid g;
  g.extent = extent;
  g.origin = {std::floor(box.min.x / extent) * extent, std::floor(box.min.y / extent) * extent};
  g.nx = std::max(1, static_cast<int>(std::ceil((box.max.x - g.origin.x) / extent)));
  g.ny = std::max(1, static_cast<int>(std::ceil((box.max.y - g.origin.y) / extent)));
  return g;
}

Point2 TileGrid::cell_center(int index) const {
  const int col = index % nx;
  const int row = index / nx;
  return {origin.x + (col + 0.5) * extent, origin.y + (row + 0.5) * extent};
}

int TileGrid::cell_of(Point2 p) const {
  auto axis = [this](double v, double o, int n) {
    const double rel = (v - o) / extent;
    if (rel < 0.0 || rel > n) return -1;
    return std::max(0, static_cast<int>(std::ceil(rel)) - 1);
  };
  const int col = axis(p.x, origin.x, nx);
  const int row = axis(p.y, origin.y, ny);
  if (col < 0 || row < 0) return -1;
  return row * nx + col;
}

Box2 scene_bounds(const Scene& scene) {
  Box2 b = scene.map.bounds();
  for (const Trajectory& t : scene.trajectories) {
    for (const TrajectoryPoint& p : t.points) {
      b.min.x = std::min(b.min.x, p.position.x);
      b.min.y = std::min(b.min.y, p.position.y);
      b.max.x = std::max(b.max.x, p.position.x);
      b.max.y = std::max(b.max.y, p.position.y);
    }
  }
  return b;
}

std::vector<Trajectory> clip_trajectory(const Trajectory& t, const Box2& box) {
  std::vector<Trajectory> out;
  const std::vector<Point2> pos = t.positions();
  for (const std::vector<double>& piece : clip_parameters(pos, box)) {
    Trajectory part;
    part.source = t.source;
    for (double u : piece) {
      const auto i = std::min(static_cast<std::size_t>(std::floor(u)), t.points.size() - 1);
      const double f = u - static_cast<double>(i);
      TrajectoryPoint p;
      if (f == 0.0 || i + 1 >= t.points.size()) {
        p = t.points[i];
      } else {
        const TrajectoryPoint& a = t.points[i];
        const TrajectoryPoint& b = t.points[i + 1];
        p.position = lerp(a.position, b.position, f);
        p.time = a.time + (b.time - a.time) * f;
        p.speed = a.speed + (b.speed - a.speed) * f;
      }
      part.points.push_back(p);
    }
    if (part.points.size() >= 2) out.push_back(std::move(part));
  }
  return out;
}

namespace {

GroundTruthLane transform_lane(const RigidTransform2& t, const GroundTruthLane& lane) {
  return {apply_transform(t, lane.centerline), apply_transform(t, lane.left), apply_transform(t, lane.right)};
}

Trajectory transform_trajectory(const RigidTransform2& t, const Trajectory& traj) {
  Trajectory out = traj;
  for (TrajectoryPoint& p : out.points) p.position = t.apply(p.position);
  return out;
}

double max_lane_width(const MapGraph& g, double fallback) {
  double w = 0.0;
  for (const MapEdge& e : g.edges()) {
    if (e.lane_width) w = std::max(w, *e.lane_width);
  }
  return w > 0.0 ? w : fallback;
}

bool bbox_overlaps(const Trajectory& t, const Box2& box) {
  for (const TrajectoryPoint& p : t.points) {
    if (box.contains(p.position)) return true;
  }
  // Segments may still cross the box without a vertex inside.
  Box2 b{t.points.front().position, t.points.front().position};
  for (const TrajectoryPoint& p : t.points) {
    b.min.x = std::min(b.min.x, p.position.x);
    b.min.y = std::min(b.min.y, p.position.y);
    b.max.x = std::max(b.max.x, p.position.x);
    b.max.y = std::max(b.max.y, p.position.y);
  }
  return !(b.max.x < box.min.x || b.min.x > box.max.x || b.max.y < box.min.y || b.min.y > box.max.y);
}

}  // namespace

Tile make_tile(const Scene& scene, Point2 center, const TilingConfig& cfg, int id) {
  Tile tile;
  tile.id = id;
  tile.center = center;
  tile.width = cfg.extent;
  tile.height = cfg.extent;
  tile.gt_inset = std::max(0.0, max_lane_width(scene.map, cfg.default_lane_width) / 2 - cfg.gt_margin);
  const RigidTransform2 local = tile.to_local();
  const Box2 box = Box2::centered(center, cfg.extent, cfg.extent);

  try {
    const MapGraph clipped = clip_to_box(scene.map, box.inflated(-tile.gt_inset));
    for (const GroundTruthLane& lane :
         lanes_from_graph(clipped, cfg.points_per_lane, cfg.default_lane_width, cfg.min_lane_length)) {
      tile.gt_lanes.push_back(transform_lane(local, lane));
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CyclicTileGraph) throw;
    tile.gt_lanes.clear();
  }
  for (const Trajectory& t : scene.trajectories) {
    if (!bbox_overlaps(t, box)) continue;
    for (const Trajectory& piece : clip_trajectory(t, box)) {
      tile.trajectories.push_back(transform_trajectory(local, piece));
    }
  }
  return tile;
}

std::vector<Tile> grid_tiles(const Scene& scene, const TilingConfig& cfg) {
  std::vector<Tile> tiles;
  if (scene.map.empty() && scene.trajectories.empty()) return tiles;
  const TileGrid grid = TileGrid::covering(scene_bounds(scene), cfg.extent);
  for (int i = 0; i < grid.cell_count(); ++i) {
    Tile t = make_tile(scene, grid.cell_center(i), cfg, i);
    if (t.trajectories.empty() || t.gt_lanes.empty()) continue;
    tiles.push_back(std::move(t));
  }
  return tiles;
}

std::vector<Tile> sample_overlapping_tiles(const Scene& scene, int n_extra, double jitter_radius,
                                           std::uint64_t seed, const TilingConfig& cfg) {
  std::vector<Tile> out;
  if (n_extra <= 0) return out;
  const std::vector<Tile> base = grid_tiles(scene, cfg);
  if (base.empty()) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
  const int first_id = TileGrid::covering(scene_bounds(scene), cfg.extent).cell_count();
  const int max_attempts = 50 * n_extra;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n_extra; ++attempt) {
    const Tile& anchor = base[pick(rng)];
    const double r = jitter_radius * std::sqrt(unit(rng));
    const double a = 2 * std::numbers::pi * unit(rng);
    const Point2 c = anchor.center + Point2{r * std::cos(a), r * std::sin(a)};
    Tile t = make_tile(scene, c, cfg, first_id + static_cast<int>(out.size()));
    if (t.trajectories.empty() || t.gt_lanes.empty()) continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<GroundTruthLane> clip_lane(const GroundTruthLane& lane, const Box2& box, double min_length) {
  const auto c = lane.centerline.points();
  const auto last = static_cast<double>(c.size() - 1);
  std::vector<GroundTruthLane> out;
  for (const std::vector<double>& piece : clip_parameters(c, box)) {
    if (piece.front() == 0.0 && piece.back() == last) {
      out.push_back(lane);
      continue;
    }
    // Arclength along the clipped piece, in index space.
    std::vector<double> s{0.0};
    for (std::size_t k = 1; k < piece.size(); ++k) {
      s.push_back(s.back() + distance(point_at_parameter(c, piece[k - 1]), point_at_parameter(c, piece[k])));
    }
    if (s.back() < min_length) continue;
    const std::size_t m = c.size();
    std::vector<Point2> cc(m);
    std::vector<Point2> ll(m);
    std::vector<Point2> rr(m);
    std::size_t k = 1;
    for (std::size_t i = 0; i < m; ++i) {
      const double target = s.back() * static_cast<double>(i) / static_cast<double>(m - 1);
      while (k + 1 < s.size() && s[k] < target) ++k;
      const double len = s[k] - s[k - 1];
      const double f = len > 0.0 ? std::clamp((target - s[k - 1]) / len, 0.0, 1.0) : 0.0;
      const double u = piece[k - 1] + (piece[k] - piece[k - 1]) * f;
      cc[i] = point_at_parameter(c, u);
      ll[i] = point_at_parameter(lane.left.points(), u);
      rr[i] = point_at_parameter(lane.right.points(), u);
    }
    try {
      out.push_back({Polyline(std::move(cc)), Polyline(std::move(ll)), Polyline(std::move(rr))});
      if (out.back().left.size() != m || out.back().right.size() != m || out.back().centerline.size() != m) {
        out.pop_back();
      }
    } catch (const Error&) {
    }
  }
  return out;
}

double support_distance(const Trajectory& t, const GroundTruthLane& lane, double spacing) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<Point2> dense;
  try {
    dense = densify(Polyline(t.positions()), spacing);
  } catch (const Error&) {
    return inf;
  }
  const Polyline& center = lane.centerline;
  double s0 = inf;
  double s1 = -inf;
  for (const Point2& p : dense) {
    const double s = project(center, p).arclength;
    s0 = std::min(s0, s);
    s1 = std::max(s1, s);
  }
  const double first = project(center, dense.front()).arclength;
  const double last = project(center, dense.back()).arclength;
  if (last - first < spacing || s1 - s0 < spacing) return inf;
  try {
    const Polyline span = sub_polyline(center, s0, s1);
    return chamfer_distance(dense, densify(span, spacing));
  } catch (const Error&) {
    return inf;
  }
}

std::optional<Support> best_support(const Trajectory& t, std::span<const GroundTruthLane> lanes,
                                    const TilingConfig& cfg) {
  std::optional<Support> best;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const double d = support_distance(t, lanes[i], cfg.support_spacing);
    if (d <= cfg.tau_align && (!best || d < best->distance)) best = Support{static_cast<int>(i), d};
  }
  return best;
}

Tile aggregate_and_filter(const Tile& tile, const TilingConfig& cfg) {
  Tile out = tile;
  out.trajectories.clear();
  out.gt_lanes.clear();

  std::vector<GroundTruthLane> lanes;
  for (const GroundTruthLane& lane : tile.gt_lanes) {
    for (GroundTruthLane& piece : clip_lane(lane, tile.gt_bounds(), cfg.min_lane_length)) {
      lanes.push_back(std::move(piece));
    }
  }
  std::vector<Trajectory> trajs;
  for (const Trajectory& t : tile.trajectories) {
    for (Trajectory& piece : clip_trajectory(t, tile.bounds())) trajs.push_back(std::move(piece));
  }

  std::vector<bool> supported(lanes.size(), false);
  for (Trajectory& t : trajs) {
    if (auto s = best_support(t, lanes, cfg)) {
      supported[static_cast<std::size_t>(s->lane)] = true;
      out.trajectories.push_back(std::move(t));
    }
  }
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (supported[i]) out.gt_lanes.push_back(std::move(lanes[i]));
  }
  if (out.trajectories.empty() || out.gt_lanes.empty()) {
    throw Error(ErrorCode::EmptyTile, "tile " + std::to_string(tile.id) + " has no aligned data");
  }
  return out;
}

namespace {

TrajectoryPoint interpolate(const TrajectoryPoint& a, const TrajectoryPoint& b, double f) {
  return {lerp(a.position, b.position, f), a.time + (b.time - a.time) * f, a.speed + (b.speed - a.speed) * f};
}

/// Trims against [lo, hi] in lane arclength; empty when nothing remains.
std::vector<TrajectoryPoint> trim(const Trajectory& t, const Polyline& center, double delta) {
  const double length = center.length();
  std::vector<double> s;
  s.reserve(t.points.size());
  for (const TrajectoryPoint& p : t.points) s.push_back(project(center, p.position, true).arclength);

  std::size_t first = 0;
  while (first < s.size() && s[first] < -delta) ++first;
  std::size_t last = s.size();
  while (last > first && s[last - 1] > length + delta) --last;
  if (first >= last) return {};

  std::vector<TrajectoryPoint> out;
  if (first > 0 && s[first] > 0.0) {
    const double f = (0.0 - s[first - 1]) / (s[first] - s[first - 1]);
    if (f > 0.0 && f < 1.0) out.push_back(interpolate(t.points[first - 1], t.points[first], f));
  }
  out.insert(out.end(), t.points.begin() + static_cast<std::ptrdiff_t>(first),
             t.points.begin() + static_cast<std::ptrdiff_t>(last));
  if (last < s.size() && s[last - 1] < length) {
    const double f = (length - s[last - 1]) / (s[last] - s[last - 1]);
    if (f > 0.0 && f < 1.0) out.push_back(interpolate(t.points[last - 1], t.points[last], f));
  }
  return out;
}

}  // namespace

Tile prune_endpoints(const Tile& tile, const TilingConfig& cfg) {
  Tile out = tile;
  out.trajectories.clear();
  for (const Trajectory& t : tile.trajectories) {
    int lane = -1;
    if (const auto support = best_support(t, tile.gt_lanes, cfg)) {
      lane = support->lane;
    } else {
      // A trajectory past either end of its lane has no support inside the
      // lane's span; fall back to the lane it continues along.
      double best = cfg.tau_align;
      for (std::size_t i = 0; i < tile.gt_lanes.size(); ++i) {
        double sum = 0.0;
        for (const TrajectoryPoint& p : t.points) sum += project(tile.gt_lanes[i].centerline, p.position, true).distance;
        const double mean = sum / static_cast<double>(t.points.size());
        if (mean <= best) {
          best = mean;
          lane = static_cast<int>(i);
        }
      }
    }
    if (lane < 0) {
      out.trajectories.push_back(t);
      continue;
    }
    const Polyline& center = tile.gt_lanes[static_cast<std::size_t>(lane)].centerline;
    Trajectory trimmed;
    trimmed.source = t.source;
    trimmed.points = trim(t, center, cfg.delta_prune);
    if (trimmed.points.size() < 2) continue;
    out.trajectories.push_back(std::move(trimmed));
  }
  return out;
}

std::vector<Tile> build_tiles(const Scene& scene, const TilingConfig& cfg, const TileSetOptions& opts) {
  std::vector<Tile> raw = grid_tiles(scene, cfg);
  if (opts.split == SplitTag::Train && opts.overlap_per_tile > 0) {
    const int n_extra = opts.overlap_per_tile * static_cast<int>(raw.size());
    std::vector<Tile> extra = sample_overlapping_tiles(scene, n_extra, opts.jitter_radius, opts.seed, cfg);
    raw.insert(raw.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
  }
  std::vector<Tile> out;
  for (const Tile& t : raw) {
    try {
      Tile filtered = prune_endpoints(aggregate_and_filter(t, cfg), cfg);
      if (filtered.trajectories.empty()) continue;
      filtered.split = opts.split;
      filtered.id = static_cast<int>(out.size());
      out.push_back(std::move(filtered));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyTile) throw;
    }
  }
  return out;
}

}  // namespace lanegen
