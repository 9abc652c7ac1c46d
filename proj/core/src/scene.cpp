#include "lanegen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "lanegen/error.hpp"

namespace lanegen {

std::string_view to_string(TrajectorySource s) {
  return s == TrajectorySource::Ego ? "ego" : "tracked";
}

TrajectorySource parse_trajectory_source(std::string_view s) {
  if (s == "ego") return TrajectorySource::Ego;
  if (s == "tracked") return TrajectorySource::Tracked;
  throw Error(ErrorCode::MalformedScene, "unknown trajectory source '" + std::string(s) + "'");
}

std::vector<Point2> Trajectory::positions() const {
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const TrajectoryPoint& p : points) out.push_back(p.position);
  return out;
}

void Trajectory::validate() const {
  if (points.size() < 2) throw Error(ErrorCode::InvalidArgument, "trajectory needs at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const TrajectoryPoint& p = points[i];
    if (!is_finite(p.position) || !std::isfinite(p.time) || !std::isfinite(p.speed)) {
      throw Error(ErrorCode::InvalidArgument, "trajectory point is not finite");
    }
    if (p.speed < 0.0) throw Error(ErrorCode::InvalidArgument, "negative trajectory speed");
    if (i > 0 && !(p.time > points[i - 1].time)) {
      throw Error(ErrorCode::InvalidArgument, "trajectory timestamps must strictly increase");
    }
  }
}

std::string_view to_string(Layout layout) {
  switch (layout) {
    case Layout::Straight: return "straight";
    case Layout::Curve: return "curve";
    case Layout::Merge: return "merge";
    case Layout::Intersection: return "intersection";
    case Layout::Grid: return "grid";
  }
  return "straight";
}

Layout parse_layout(std::string_view name) {
  for (Layout l : {Layout::Straight, Layout::Curve, Layout::Merge, Layout::Intersection, Layout::Grid}) {
    if (to_string(l) == name) return l;
  }
  throw Error(ErrorCode::UnknownLayout, "unknown layout '" + std::string(name) + "'");
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }
Point2 left_normal(Point2 d) { return {-d.y, d.x}; }

std::vector<Point2> cubic_bezier(Point2 p0, Point2 c1, Point2 c2, Point2 p3, int samples) {
  std::vector<Point2> out;
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double a = (1 - t) * (1 - t) * (1 - t);
    const double b = 3 * (1 - t) * (1 - t) * t;
    const double c = 3 * (1 - t) * t * t;
    const double d = t * t * t;
    out.push_back(p0 * a + c1 * b + c2 * c + p3 * d);
  }
  return out;
}

std::vector<Point2> straight_points(Point2 a, Point2 b, double spacing) {
  const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / spacing)));
  std::vector<Point2> out;
  for (int i = 0; i <= n; ++i) out.push_back(lerp(a, b, static_cast<double>(i) / n));
  return out;
}

/// Offsets a polyline laterally (positive = left of travel direction).
std::vector<Point2> offset_points(const std::vector<Point2>& pts, double offset) {
  std::vector<Point2> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == pts.size() ? i : i + 1;
    Point2 t = pts[b] - pts[a];
    t = t * (1.0 / norm(t));
    out[i] = pts[i] + left_normal(t) * offset;
  }
  return out;
}

class GraphBuilder {
 public:
  explicit GraphBuilder(MapGraph& g) : g_(g) {}

  NodeId node(Point2 p) {
    const NodeId id = next_++;
    g_.add_node(id, p);
    return id;
  }

  /// Adds `pts` as a chain of one edge, creating end nodes unless given.
  std::pair<NodeId, NodeId> lane(const std::vector<Point2>& pts, double width, NodeId from = -1, NodeId to = -1) {
    if (from < 0) from = node(pts.front());
    if (to < 0) to = node(pts.back());
    std::vector<Point2> inner(pts.begin() + 1, pts.end() - 1);
    g_.add_edge(from, to, inner, width);
    return {from, to};
  }

 private:
  MapGraph& g_;
  NodeId next_ = 1;
};

struct LaneEnd {
  NodeId node;
  Point2 heading;
  int road;
  int index;  // 0 = rightmost
};

struct Junction {
  Point2 center;
  std::vector<LaneEnd> incoming;
  std::vector<LaneEnd> outgoing;
};

/// Two-way roads between junctions (or free ends), with lane connectors
/// inside every junction (no U-turns).
class RoadNetwork {
 public:
  RoadNetwork(MapGraph& g, int lanes, double width) : builder_(g), lanes_(lanes), width_(width) {}

  int junction(Point2 p) {
    junctions_.push_back({p, {}, {}});
    return static_cast<int>(junctions_.size()) - 1;
  }

  /// Road between two ends; an end is a junction index or -1 with a free point.
  void road(int ja, Point2 pa, int jb, Point2 pb) {
    const int id = road_count_++;
    if (ja >= 0) pa = junctions_[static_cast<std::size_t>(ja)].center;
    if (jb >= 0) pb = junctions_[static_cast<std::size_t>(jb)].center;
    const Point2 u = (pb - pa) * (1.0 / distance(pa, pb));
    const double setback = lanes_ * width_ + 4.0;
    const Point2 sa = ja >= 0 ? pa + u * setback : pa;
    const Point2 eb = jb >= 0 ? pb - u * setback : pb;
    const Point2 n = left_normal(u);
    for (int k = 0; k < lanes_; ++k) {
      const double off = (k + 0.5) * width_;
      // a -> b keeps right (negative normal side).
      {
        const Point2 s = sa - n * off;
        const Point2 e = eb - n * off;
        auto [from, to] = builder_.lane(straight_points(s, e, 20.0), width_);
        if (ja >= 0) junctions_[static_cast<std::size_t>(ja)].outgoing.push_back({from, u, id, k});
        if (jb >= 0) junctions_[static_cast<std::size_t>(jb)].incoming.push_back({to, u, id, k});
      }
      {
        const Point2 s = eb + n * off;
        const Point2 e = sa + n * off;
        auto [from, to] = builder_.lane(straight_points(s, e, 20.0), width_);
        if (jb >= 0) junctions_[static_cast<std::size_t>(jb)].outgoing.push_back({from, -u, id, k});
        if (ja >= 0) junctions_[static_cast<std::size_t>(ja)].incoming.push_back({to, -u, id, k});
      }
    }
  }

  void connect(const MapGraph& g) {
    for (const Junction& j : junctions_) {
      for (const LaneEnd& in : j.incoming) {
        for (const LaneEnd& out : j.outgoing) {
          if (out.road == in.road) continue;
          const double turn = std::atan2(cross(in.heading, out.heading), dot(in.heading, out.heading));
          int want;
          if (std::abs(turn) < std::numbers::pi / 6) {
            want = in.index;
          } else if (turn < 0) {  // right turn
            if (in.index != 0) continue;
            want = 0;
          } else {
            if (in.index != lanes_ - 1) continue;
            want = lanes_ - 1;
          }
          if (out.index != want) continue;
          const Point2 p0 = g.node(in.node);
          const Point2 p3 = g.node(out.node);
          const double d = distance(p0, p3) / 3.0;
          auto pts = cubic_bezier(p0, p0 + in.heading * d, p3 - out.heading * d, p3, 12);
          builder_.lane(pts, width_, in.node, out.node);
        }
      }
    }
  }

 private:
  GraphBuilder builder_;
  int lanes_;
  double width_;
  int road_count_ = 0;
  std::vector<Junction> junctions_;
};

void build_straight(MapGraph& g, const SceneParams& p, Rng& rng) {
  GraphBuilder b(g);
  int lanes = p.lanes_per_direction;
  bool two_way = p.two_way;
  double length = 240.0;
  if (p.random_shape) {
    lanes = std::uniform_int_distribution<int>(1, 2)(rng);
    two_way = std::bernoulli_distribution(0.5)(rng);
    length = uniform(rng, 200.0, 300.0);
  }
  const double w = p.lane_width;
  const Point2 a{-length / 2, 0.0};
  const Point2 c{length / 2, 0.0};
  if (two_way) {
    for (int k = 0; k < lanes; ++k) {
      const double off = (k + 0.5) * w;
      b.lane(straight_points(a + Point2{0, -off}, c + Point2{0, -off}, 20.0), w);
      b.lane(straight_points(c + Point2{0, off}, a + Point2{0, off}, 20.0), w);
    }
  } else {
    for (int k = 0; k < lanes; ++k) {
      const double off = (k - 0.5 * (lanes - 1)) * w;
      b.lane(straight_points(a + Point2{0, off}, c + Point2{0, off}, 20.0), w);
    }
  }
}

void build_curve(MapGraph& g, const SceneParams& p, Rng& rng) {
  GraphBuilder b(g);
  double radius = 100.0;
  double sweep = std::numbers::pi / 2;
  double sense = 1.0;
  int lanes = p.lanes_per_direction;
  bool two_way = p.two_way;
  if (p.random_shape) {
    radius = uniform(rng, 60.0, 150.0);
    sweep = uniform(rng, std::numbers::pi / 3, 2 * std::numbers::pi / 3);
    sense = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    lanes = std::uniform_int_distribution<int>(1, 2)(rng);
    two_way = std::bernoulli_distribution(0.5)(rng);
  }
  const double lead = 40.0;
  // Reference line: straight lead-in along +x, arc, straight lead-out.
  std::vector<Point2> ref = straight_points({-lead, -sense * radius}, {0.0, -sense * radius}, 10.0);
  const int arc_n = std::max(8, static_cast<int>(radius * sweep / 2.0));
  for (int i = 1; i <= arc_n; ++i) {
    const double phi = sweep * i / arc_n;
    ref.push_back({radius * std::sin(phi), -sense * radius * std::cos(phi)});
  }
  const double phi = sweep;
  const Point2 end = ref.back();
  const Point2 dir{std::cos(phi), sense * std::sin(phi)};
  for (int i = 1; i <= 4; ++i) ref.push_back(end + dir * (lead * i / 4.0));

  const double w = p.lane_width;
  if (two_way) {
    std::vector<Point2> back(ref.rbegin(), ref.rend());
    for (int k = 0; k < lanes; ++k) {
      const double off = (k + 0.5) * w;
      b.lane(offset_points(ref, -off), w);
      b.lane(offset_points(back, -off), w);
    }
  } else {
    for (int k = 0; k < lanes; ++k) b.lane(offset_points(ref, (k - 0.5 * (lanes - 1)) * w), w);
  }
}

void build_merge(MapGraph& g, const SceneParams& p, Rng& rng) {
  GraphBuilder b(g);
  int lanes = p.lanes_per_direction;
  double ramp_offset = 30.0;
  double ramp_len = 120.0;
  if (p.random_shape) {
    lanes = std::uniform_int_distribution<int>(1, 2)(rng);
    ramp_offset = uniform(rng, 15.0, 40.0);
    ramp_len = uniform(rng, 80.0, 140.0);
  }
  const double w = p.lane_width;
  const double half = 120.0;
  // Lane 0 is the rightmost and receives the ramp.
  for (int k = 1; k < lanes; ++k) {
    b.lane(straight_points({-half, k * w}, {half, k * w}, 20.0), w);
  }
  const NodeId merge = b.node({0.0, 0.0});
  b.lane(straight_points({-half, 0.0}, {0.0, 0.0}, 20.0), w, -1, merge);
  b.lane(straight_points({0.0, 0.0}, {half, 0.0}, 20.0), w, merge, -1);
  const Point2 r0{-ramp_len, -ramp_offset};
  auto ramp = cubic_bezier(r0, r0 + Point2{ramp_len / 2, 0.0}, Point2{-ramp_len / 2, 0.0}, {0.0, 0.0}, 30);
  b.lane(ramp, w, -1, merge);
}

void build_intersection(MapGraph& g, const SceneParams& p, Rng& rng) {
  int lanes = p.lanes_per_direction;
  double jitter = 0.0;
  if (p.random_shape) {
    lanes = std::uniform_int_distribution<int>(1, 2)(rng);
    jitter = 0.25;
  }
  RoadNetwork net(g, lanes, p.lane_width);
  const int j = net.junction({0.0, 0.0});
  for (int arm = 0; arm < 4; ++arm) {
    const double angle = arm * std::numbers::pi / 2 + (jitter > 0 ? uniform(rng, -jitter, jitter) : 0.0);
    net.road(j, {}, -1, unit(angle) * 110.0);
  }
  net.connect(g);
}

void build_grid(MapGraph& g, const SceneParams& p, Rng&) {
  RoadNetwork net(g, p.lanes_per_direction, p.lane_width);
  const int n = p.grid_blocks + 1;
  const double s = p.grid_spacing;
  std::vector<int> ids(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) ids[static_cast<std::size_t>(i * n + k)] = net.junction({i * s, k * s});
  }
  auto at = [&](int i, int k) { return ids[static_cast<std::size_t>(i * n + k)]; };
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (i + 1 < n) net.road(at(i, k), {}, at(i + 1, k), {});
      if (k + 1 < n) net.road(at(i, k), {}, at(i, k + 1), {});
    }
  }
  const double arm = s / 2;
  for (int i = 0; i < n; ++i) {
    net.road(at(i, 0), {}, -1, {i * s, -arm});
    net.road(at(i, n - 1), {}, -1, {i * s, (n - 1) * s + arm});
    net.road(at(0, i), {}, -1, {-arm, i * s});
    net.road(at(n - 1, i), {}, -1, {(n - 1) * s + arm, i * s});
  }
  net.connect(g);
}

MapGraph transformed(const MapGraph& g, const RigidTransform2& t) {
  MapGraph out;
  for (const auto& [id, pos] : g.nodes()) out.add_node(id, t.apply(pos));
  for (const MapEdge& e : g.edges()) {
    out.add_edge(MapEdge{e.from, e.to, apply_transform(t, e.geometry), e.lane_width});
  }
  return out;
}

/// Random walk over the lane graph from `start` until a sink or max length.
Polyline random_walk(const MapGraph& g, NodeId start, Rng& rng, double max_length) {
  std::vector<Point2> pts{g.node(start)};
  NodeId at = start;
  double length = 0.0;
  while (length < max_length) {
    std::vector<const MapEdge*> next;
    for (const MapEdge& e : g.edges()) {
      if (e.from == at) next.push_back(&e);
    }
    if (next.empty()) break;
    const MapEdge& e = *next[std::uniform_int_distribution<std::size_t>(0, next.size() - 1)(rng)];
    const auto ep = e.geometry.points();
    pts.insert(pts.end(), ep.begin() + 1, ep.end());
    length += e.geometry.length();
    at = e.to;
  }
  return Polyline(std::move(pts));
}

Trajectory drive(const Polyline& path, const SceneParams& p, Rng& rng) {
  const double sigma = p.noise_sigma;
  const double dt = 1.0 / p.sample_hz;
  const double v_mean = uniform(rng, 8.0, 17.0);
  const double v_amp = uniform(rng, 0.0, 3.0);
  const double wavelength = uniform(rng, 80.0, 200.0);
  const double phase = uniform(rng, 0.0, 2 * std::numbers::pi);
  auto speed_at = [&](double s) {
    return std::clamp(v_mean + v_amp * std::sin(2 * std::numbers::pi * s / wavelength + phase), 5.0, 20.0);
  };
  const double total = path.length();

  std::vector<double> stations;
  std::vector<double> times;
  double s = sigma > 0.0 ? uniform(rng, 0.0, speed_at(0.0) * dt) : 0.0;
  double t = sigma > 0.0 ? uniform(rng, 0.0, 100.0) : 0.0;
  while (s < total) {
    stations.push_back(s);
    times.push_back(t);
    s += speed_at(s) * dt;
    t += dt;
  }
  if (total - stations.back() > 1e-3) {
    times.push_back(times.back() + (total - stations.back()) / speed_at(stations.back()));
    stations.push_back(total);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double rho = 0.8;
  double lateral = sigma > 0.0 ? sigma * gauss(rng) : 0.0;
  const std::vector<double> arc = path.arclengths();
  Trajectory traj;
  traj.source = std::bernoulli_distribution(0.5)(rng) ? TrajectorySource::Ego : TrajectorySource::Tracked;
  std::size_t seg = 1;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const double si = stations[i];
    while (seg + 1 < path.size() && arc[seg] < si) ++seg;
    const Point2 tangent = (path[seg] - path[seg - 1]) * (1.0 / (arc[seg] - arc[seg - 1]));
    Point2 pos = path.at_arclength(si);
    if (sigma > 0.0) {
      if (i > 0) lateral = rho * lateral + std::sqrt(1 - rho * rho) * sigma * gauss(rng);
      const double along = 0.25 * sigma * gauss(rng);
      pos = pos + left_normal(tangent) * lateral + tangent * along;
    }
    traj.points.push_back({pos, times[i], speed_at(si)});
  }
  return traj;
}

}  // namespace

Scene generate_scene(const SceneParams& params) {
  if (!(params.density >= 1.0)) throw Error(ErrorCode::InvalidArgument, "density must be >= 1");
  if (!(params.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (!(params.sample_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample_hz must be > 0");
  Rng rng(params.seed);
  MapGraph local;
  switch (params.layout) {
    case Layout::Straight: build_straight(local, params, rng); break;
    case Layout::Curve: build_curve(local, params, rng); break;
    case Layout::Merge: build_merge(local, params, rng); break;
    case Layout::Intersection: build_intersection(local, params, rng); break;
    case Layout::Grid: build_grid(local, params, rng); break;
  }
  RigidTransform2 pose;
  if (params.random_pose) {
    pose.rotation = uniform(rng, 0.0, 2 * std::numbers::pi);
    pose.translation = {uniform(rng, -30.0, 30.0), uniform(rng, -30.0, 30.0)};
  }
  Scene scene;
  scene.rng_seed = params.seed;
  scene.map = transformed(local, pose);

  std::map<NodeId, int> in_degree;
  for (const MapEdge& e : scene.map.edges()) in_degree[e.to] += 1;
  std::vector<NodeId> sources;
  for (const MapEdge& e : scene.map.edges()) {
    if (!in_degree.contains(e.from) &&
        std::find(sources.begin(), sources.end(), e.from) == sources.end()) {
      sources.push_back(e.from);
    }
  }
  std::sort(sources.begin(), sources.end());
  const double whole = std::floor(params.density);
  const double frac = params.density - whole;
  for (NodeId src : sources) {
    int count = static_cast<int>(whole);
    if (frac > 0.0 && std::bernoulli_distribution(frac)(rng)) ++count;
    for (int i = 0; i < count; ++i) {
      const Polyline path = random_walk(scene.map, src, rng, 1500.0);
      scene.trajectories.push_back(drive(path, params, rng));
    }
  }
  return scene;
}

Scene generate_scene(Layout layout, double density, double noise_sigma, std::uint64_t seed) {
  SceneParams p;
  p.layout = layout;
  p.density = density;
  p.noise_sigma = noise_sigma;
  p.seed = seed;
  return generate_scene(p);
}

SceneParams density_preset(std::string_view name, Layout layout) {
  SceneParams p;
  p.layout = layout;
  p.lanes_per_direction = 1;
  p.two_way = true;
  if (name == "internal") {
    p.density = 7.0;
    p.noise_sigma = 0.3;
    p.grid_spacing = 200.0;
  } else if (name == "nuscenes") {
    p.density = 8.0;
    p.noise_sigma = 0.3;
  } else if (name == "nuplan") {
    p.density = 500.0;
    p.noise_sigma = 0.3;
    p.lanes_per_direction = 2;
  } else {
    throw Error(ErrorCode::BadConfig, "unknown density preset '" + std::string(name) + "'");
  }
  return p;
}

}  // namespace lanegen
