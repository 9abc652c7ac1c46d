#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "lanegen/geom.hpp"

namespace lanegen {

using NodeId = std::int64_t;

struct MapEdge {
  NodeId from = 0;
  NodeId to = 0;
  Polyline geometry;
  std::optional<double> lane_width;

  friend bool operator==(const MapEdge&, const MapEdge&) = default;
};

/// Directed centerline graph. Edge geometry must start and end at the
/// positions of its nodes (within 1e-6 m); at most one edge per (from, to).
class MapGraph {
 public:
  static constexpr double kEndpointTolerance = 1e-6;

  void add_node(NodeId id, Point2 position);
  /// Geometry is node(from), intermediate..., node(to).
  void add_edge(NodeId from, NodeId to, std::span<const Point2> intermediate,
                std::optional<double> lane_width);
  void add_edge(MapEdge edge);

  const std::map<NodeId, Point2>& nodes() const { return nodes_; }
  const std::vector<MapEdge>& edges() const { return edges_; }
  Point2 node(NodeId id) const;
  bool has_node(NodeId id) const { return nodes_.contains(id); }
  bool empty() const { return edges_.empty(); }
  /// Bounding box over all edge geometry; nodes only when there are no edges.
  Box2 bounds() const;
  NodeId max_node_id() const;

  friend bool operator==(const MapGraph&, const MapGraph&) = default;

 private:
  std::map<NodeId, Point2> nodes_;
  std::vector<MapEdge> edges_;
};

/// A centerline with its dividers, all with the same point count.
struct GroundTruthLane {
  Polyline centerline;
  Polyline left;
  Polyline right;

  friend bool operator==(const GroundTruthLane&, const GroundTruthLane&) = default;
};

/// Checks equal point counts, opposite sides and consistent direction.
bool is_valid_lane(const GroundTruthLane& lane);

/// A source-to-sink path and the lane width of each of its segments.
struct LanePath {
  NodeId start = 0;
  NodeId end = 0;
  Polyline centerline;
  std::vector<std::optional<double>> segment_widths;  ///< size = points - 1
};

/// One path per (source, reachable sink) pair, where sources have in-degree
/// 0 and sinks out-degree 0. When several routes connect the same pair the
/// shortest by arclength is taken. Throws CyclicTileGraph on cycles.
std::vector<LanePath> extract_lane_paths(const MapGraph& g);
std::vector<Polyline> extract_paths(const MapGraph& g);

/// Restricts the graph to `box`. Edges crossing the boundary are cut and
/// receive fresh boundary nodes; edges re-entering the box become several
/// edges.
MapGraph clip_to_box(const MapGraph& g, const Box2& box);

/// Dividers at +/- width/2 along the centerline normal. Interior tangents
/// use central differences, endpoints one-sided ones.
GroundTruthLane synthesize_dividers(const Polyline& center, double width);
GroundTruthLane synthesize_dividers(const Polyline& center, std::span<const double> widths);

/// Replaces masked divider points by linear interpolation in centerline
/// arclength between the nearest unmasked neighbours.
GroundTruthLane interpolate_divider_gaps(const GroundTruthLane& lane, const std::vector<bool>& left_gaps,
                                         const std::vector<bool>& right_gaps);
GroundTruthLane interpolate_divider_gaps(const GroundTruthLane& lane, const std::vector<bool>& gaps);

/// Paths -> resampled M-point lanes with dividers. Segments without a
/// width are interpolated across; leading/trailing gaps take the nearest
/// known width and lanes without any width use `default_width`. Paths
/// shorter than `min_length` are skipped.
std::vector<GroundTruthLane> lanes_from_graph(const MapGraph& g, int points_per_lane, double default_width,
                                              double min_length);

}  // namespace lanegen
