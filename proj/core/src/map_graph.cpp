#include "lanegen/map_graph.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <string>

#include "lanegen/error.hpp"

namespace lanegen {

void MapGraph::add_node(NodeId id, Point2 position) {
  if (!is_finite(position)) throw Error(ErrorCode::InvalidArgument, "node position is not finite");
  if (!nodes_.emplace(id, position).second) {
    throw Error(ErrorCode::InvalidArgument, "duplicate node id " + std::to_string(id));
  }
}

void MapGraph::add_edge(NodeId from, NodeId to, std::span<const Point2> intermediate,
                        std::optional<double> lane_width) {
  std::vector<Point2> pts;
  pts.reserve(intermediate.size() + 2);
  pts.push_back(node(from));
  pts.insert(pts.end(), intermediate.begin(), intermediate.end());
  pts.push_back(node(to));
  add_edge(MapEdge{from, to, Polyline(std::move(pts)), lane_width});
}

void MapGraph::add_edge(MapEdge edge) {
  const Point2 a = node(edge.from);
  const Point2 b = node(edge.to);
  if (distance(a, edge.geometry.front()) > kEndpointTolerance ||
      distance(b, edge.geometry.back()) > kEndpointTolerance) {
    throw Error(ErrorCode::InvalidArgument, "edge geometry does not end at its nodes");
  }
  if (edge.from == edge.to) throw Error(ErrorCode::InvalidArgument, "self-loop edge");
  for (const MapEdge& e : edges_) {
    if (e.from == edge.from && e.to == edge.to) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate edge " + std::to_string(edge.from) + "->" + std::to_string(edge.to));
    }
  }
  if (edge.lane_width && !(*edge.lane_width > 0.0)) {
    throw Error(ErrorCode::InvalidWidth, "lane width must be positive");
  }
  if (edge.geometry.front() != a || edge.geometry.back() != b) {
    std::vector<Point2> pts(edge.geometry.points().begin(), edge.geometry.points().end());
    pts.front() = a;
    pts.back() = b;
    edge.geometry = Polyline(std::move(pts));
  }
  edges_.push_back(std::move(edge));
}

Point2 MapGraph::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::InvalidArgument, "unknown node id " + std::to_string(id));
  return it->second;
}

Box2 MapGraph::bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box2 b{{inf, inf}, {-inf, -inf}};
  auto grow = [&b](Point2 p) {
    b.min.x = std::min(b.min.x, p.x);
    b.min.y = std::min(b.min.y, p.y);
    b.max.x = std::max(b.max.x, p.x);
    b.max.y = std::max(b.max.y, p.y);
  };
  for (const MapEdge& e : edges_) {
    for (const Point2& p : e.geometry.points()) grow(p);
  }
  if (edges_.empty()) {
    for (const auto& [id, p] : nodes_) grow(p);
  }
  return b;
}

NodeId MapGraph::max_node_id() const {
  return nodes_.empty() ? 0 : nodes_.rbegin()->first;
}

bool is_valid_lane(const GroundTruthLane& lane) {
  const std::size_t m = lane.centerline.size();
  if (lane.left.size() != m || lane.right.size() != m) return false;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == m ? m - 1 : i + 1;
    const Point2 tangent = lane.centerline[b] - lane.centerline[a];
    const double sl = cross(tangent, lane.left[i] - lane.centerline[i]);
    const double sr = cross(tangent, lane.right[i] - lane.centerline[i]);
    if (!(sl > 0.0 && sr < 0.0)) return false;
  }
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const Point2 tc = lane.centerline[i + 1] - lane.centerline[i];
    if (dot(tc, lane.left[i + 1] - lane.left[i]) <= 0.0) return false;
    if (dot(tc, lane.right[i + 1] - lane.right[i]) <= 0.0) return false;
  }
  return true;
}

namespace {

struct Adjacency {
  std::map<NodeId, std::vector<std::size_t>> out;  // edge indices
  std::map<NodeId, int> in_degree;
  std::vector<NodeId> topo;
};

Adjacency build_adjacency(const MapGraph& g) {
  Adjacency adj;
  std::set<NodeId> used;
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const MapEdge& e = g.edges()[i];
    adj.out[e.from].push_back(i);
    adj.in_degree[e.to] += 1;
    used.insert(e.from);
    used.insert(e.to);
  }
  std::map<NodeId, int> remaining;
  for (NodeId n : used) remaining[n] = adj.in_degree.contains(n) ? adj.in_degree[n] : 0;
  std::set<NodeId> ready;
  for (const auto& [n, d] : remaining) {
    if (d == 0) ready.insert(n);
  }
  while (!ready.empty()) {
    const NodeId n = *ready.begin();
    ready.erase(ready.begin());
    adj.topo.push_back(n);
    for (std::size_t ei : adj.out[n]) {
      if (--remaining[g.edges()[ei].to] == 0) ready.insert(g.edges()[ei].to);
    }
  }
  if (adj.topo.size() != used.size()) {
    throw Error(ErrorCode::CyclicTileGraph, "map graph contains a cycle");
  }
  return adj;
}

}  // namespace

std::vector<LanePath> extract_lane_paths(const MapGraph& g) {
  std::vector<LanePath> paths;
  if (g.empty()) return paths;
  Adjacency adj = build_adjacency(g);

  std::vector<NodeId> sources;
  std::set<NodeId> sinks;
  for (NodeId n : adj.topo) {
    const bool has_in = adj.in_degree.contains(n);
    const bool has_out = adj.out.contains(n) && !adj.out[n].empty();
    if (!has_in && has_out) sources.push_back(n);
    if (has_in && !has_out) sinks.insert(n);
  }
  std::sort(sources.begin(), sources.end());

  for (NodeId src : sources) {
    // Shortest routes over the DAG in topological order.
    std::map<NodeId, double> dist;
    std::map<NodeId, std::size_t> via;  // incoming edge on the best route
    dist[src] = 0.0;
    for (NodeId n : adj.topo) {
      auto it = dist.find(n);
      if (it == dist.end()) continue;
      for (std::size_t ei : adj.out[n]) {
        const MapEdge& e = g.edges()[ei];
        const double d = it->second + e.geometry.length();
        auto jt = dist.find(e.to);
        if (jt == dist.end() || d < jt->second) {
          dist[e.to] = d;
          via[e.to] = ei;
        }
      }
    }
    for (NodeId sink : sinks) {
      if (!dist.contains(sink)) continue;
      std::vector<std::size_t> route;
      for (NodeId n = sink; n != src; n = g.edges()[via[n]].from) route.push_back(via[n]);
      std::reverse(route.begin(), route.end());

      std::vector<Point2> pts;
      std::vector<std::optional<double>> widths;
      for (std::size_t ei : route) {
        const MapEdge& e = g.edges()[ei];
        const auto ep = e.geometry.points();
        std::size_t first = pts.empty() ? 0 : 1;
        for (std::size_t k = first; k < ep.size(); ++k) {
          pts.push_back(ep[k]);
          if (pts.size() > 1) widths.push_back(e.lane_width);
        }
      }
      // Polyline dedups near-coincident joints only when exactly equal; drop
      // tiny joint segments so widths stay aligned with segments.
      std::vector<Point2> clean{pts.front()};
      std::vector<std::optional<double>> clean_w;
      for (std::size_t k = 1; k < pts.size(); ++k) {
        if (distance(pts[k], clean.back()) <= MapGraph::kEndpointTolerance) continue;
        clean.push_back(pts[k]);
        clean_w.push_back(widths[k - 1]);
      }
      if (clean.size() < 2) continue;
      paths.push_back(LanePath{src, sink, Polyline(std::move(clean)), std::move(clean_w)});
    }
  }
  return paths;
}

std::vector<Polyline> extract_paths(const MapGraph& g) {
  std::vector<Polyline> out;
  for (LanePath& p : extract_lane_paths(g)) out.push_back(std::move(p.centerline));
  return out;
}

MapGraph clip_to_box(const MapGraph& g, const Box2& box) {
  MapGraph out;
  NodeId next_id = g.max_node_id() + 1;
  auto ensure_node = [&](NodeId id) {
    if (!out.has_node(id)) out.add_node(id, g.node(id));
  };
  for (const MapEdge& e : g.edges()) {
    const auto pts = e.geometry.points();
    const auto last_u = static_cast<double>(pts.size() - 1);
    for (const std::vector<double>& piece : clip_parameters(pts, box)) {
      std::vector<Point2> geom;
      geom.reserve(piece.size());
      for (double u : piece) geom.push_back(point_at_parameter(pts, u));
      std::vector<Point2> dedup;
      for (const Point2& p : geom) {
        if (dedup.empty() || distance(dedup.back(), p) > MapGraph::kEndpointTolerance) dedup.push_back(p);
      }
      if (dedup.size() < 2) continue;

      NodeId from;
      if (piece.front() == 0.0) {
        from = e.from;
        ensure_node(from);
        dedup.front() = g.node(from);
      } else {
        from = next_id++;
        out.add_node(from, dedup.front());
      }
      NodeId to;
      if (piece.back() == last_u) {
        to = e.to;
        ensure_node(to);
        dedup.back() = g.node(to);
      } else {
        to = next_id++;
        out.add_node(to, dedup.back());
      }
      out.add_edge(MapEdge{from, to, Polyline(std::move(dedup)), e.lane_width});
    }
  }
  return out;
}

namespace {

std::vector<Point2> unit_normals(const Polyline& center) {
  const auto c = center.points();
  const std::size_t m = c.size();
  std::vector<Point2> normals(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == m ? m - 1 : i + 1;
    Point2 t = c[b] - c[a];
    const double len = norm(t);
    if (!(len > 0.0)) throw Error(ErrorCode::DegeneratePolyline, "zero tangent on centerline");
    t = t * (1.0 / len);
    normals[i] = {-t.y, t.x};
  }
  return normals;
}

}  // namespace

GroundTruthLane synthesize_dividers(const Polyline& center, std::span<const double> widths) {
  if (widths.size() != center.size()) throw Error(ErrorCode::InvalidArgument, "width count mismatch");
  for (double w : widths) {
    if (!(w > 0.0)) throw Error(ErrorCode::InvalidWidth, "lane width must be positive");
  }
  const std::vector<Point2> normals = unit_normals(center);
  std::vector<Point2> left(center.size());
  std::vector<Point2> right(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) {
    const Point2 off = normals[i] * (0.5 * widths[i]);
    left[i] = center[i] + off;
    right[i] = center[i] - off;
  }
  return {center, Polyline(std::move(left)), Polyline(std::move(right))};
}

GroundTruthLane synthesize_dividers(const Polyline& center, double width) {
  const std::vector<double> widths(center.size(), width);
  return synthesize_dividers(center, widths);
}

namespace {

Polyline fill_gaps(const Polyline& divider, const std::vector<bool>& gaps, std::span<const double> s) {
  const std::size_t m = divider.size();
  if (gaps.size() != m) throw Error(ErrorCode::InvalidArgument, "gap mask size mismatch");
  if (std::all_of(gaps.begin(), gaps.end(), [](bool g) { return g; })) {
    throw Error(ErrorCode::UninterpolatableDivider, "divider has no valid points");
  }
  if (gaps.front() || gaps.back()) {
    throw Error(ErrorCode::UninterpolatableDivider, "divider endpoints must be valid");
  }
  std::vector<Point2> pts(divider.points().begin(), divider.points().end());
  std::size_t prev = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (gaps[i]) continue;
    for (std::size_t k = prev + 1; k < i; ++k) {
      const double span = s[i] - s[prev];
      const double t = span > 0.0 ? (s[k] - s[prev]) / span : 0.0;
      pts[k] = lerp(pts[prev], pts[i], t);
    }
    prev = i;
  }
  return Polyline(std::move(pts));
}

}  // namespace

GroundTruthLane interpolate_divider_gaps(const GroundTruthLane& lane, const std::vector<bool>& left_gaps,
                                         const std::vector<bool>& right_gaps) {
  const std::vector<double> s = lane.centerline.arclengths();
  return {lane.centerline, fill_gaps(lane.left, left_gaps, s), fill_gaps(lane.right, right_gaps, s)};
}

GroundTruthLane interpolate_divider_gaps(const GroundTruthLane& lane, const std::vector<bool>& gaps) {
  return interpolate_divider_gaps(lane, gaps, gaps);
}

std::vector<GroundTruthLane> lanes_from_graph(const MapGraph& g, int points_per_lane, double default_width,
                                              double min_length) {
  std::vector<GroundTruthLane> lanes;
  for (const LanePath& path : extract_lane_paths(g)) {
    if (path.centerline.length() < min_length) continue;
    const Polyline center = resample(path.centerline, points_per_lane);

    // Width of the source segment under each resampled point.
    const std::vector<double> src_s = path.centerline.arclengths();
    const std::vector<double> dst_s = center.arclengths();
    const double scale = src_s.back() / dst_s.back();
    std::vector<std::optional<double>> widths(center.size());
    std::size_t seg = 0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double s = dst_s[i] * scale;
      while (seg + 1 < path.segment_widths.size() && src_s[seg + 1] < s) ++seg;
      widths[i] = path.segment_widths[seg];
    }

    std::vector<bool> gaps(center.size());
    std::vector<double> filled(center.size(), default_width);
    std::optional<std::size_t> first_valid;
    std::optional<std::size_t> last_valid;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (widths[i]) {
        if (!first_valid) first_valid = i;
        last_valid = i;
      }
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (widths[i]) {
        filled[i] = *widths[i];
      } else if (first_valid && i < *first_valid) {
        filled[i] = *widths[*first_valid];
      } else if (last_valid && i > *last_valid) {
        filled[i] = *widths[*last_valid];
      } else if (first_valid) {
        gaps[i] = true;
        filled[i] = *widths[*first_valid];
      }
    }
    GroundTruthLane lane = synthesize_dividers(center, filled);
    if (std::find(gaps.begin(), gaps.end(), true) != gaps.end()) lane = interpolate_divider_gaps(lane, gaps);
    lanes.push_back(std::move(lane));
  }
  return lanes;
}

}  // namespace lanegen
