#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lanegen/geom.hpp"
#include "lanegen/map_graph.hpp"

namespace lanegen {

enum class TrajectorySource { Ego, Tracked };

std::string_view to_string(TrajectorySource s);
TrajectorySource parse_trajectory_source(std::string_view s);

struct TrajectoryPoint {
  Point2 position;
  double time = 0.0;   ///< seconds
  double speed = 0.0;  ///< m/s

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  TrajectorySource source = TrajectorySource::Ego;

  std::vector<Point2> positions() const;
  /// Throws InvalidArgument unless >= 2 points, strictly increasing time,
  /// non-negative speed and finite positions.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One location: the ground-truth map plus the crowdsourced trajectories.
struct Scene {
  MapGraph map;
  std::vector<Trajectory> trajectories;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const Scene&, const Scene&) = default;
};

enum class Layout { Straight, Curve, Merge, Intersection, Grid };

std::string_view to_string(Layout layout);
/// Throws UnknownLayout.
Layout parse_layout(std::string_view name);

struct SceneParams {
  Layout layout = Layout::Straight;
  /// Trajectories spawned per entry lane (a lane whose start has no predecessor).
  double density = 16.0;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;
  double sample_hz = 2.0;
  int lanes_per_direction = 1;
  bool two_way = false;
  double lane_width = 3.5;
  /// Random rotation/translation of the whole layout.
  bool random_pose = true;
  /// Randomize lane count, direction and curvature within layout-specific ranges.
  bool random_shape = false;
  int grid_blocks = 3;
  double grid_spacing = 120.0;
};

Scene generate_scene(const SceneParams& params);
/// Default shape for `layout`; density >= 1, noise_sigma >= 0.
Scene generate_scene(Layout layout, double density, double noise_sigma, std::uint64_t seed);

/// Scene parameters calibrated to a dataset's per-tile statistics:
/// "internal", "nuscenes" or "nuplan". Throws BadConfig for other names.
SceneParams density_preset(std::string_view name, Layout layout);

}  // namespace lanegen
