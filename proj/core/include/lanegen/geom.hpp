#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace lanegen {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point2 operator-(Point2 a) { return {-a.x, -a.y}; }
  friend constexpr Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {a.x * s, a.y * s}; }
  friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }
/// Linear interpolation a + t (b - a).
constexpr Point2 lerp(Point2 a, Point2 b, double t) { return a + (b - a) * t; }

/// Ordered point sequence with at least two points and no consecutive
/// duplicates. Construction removes consecutive duplicates and throws
/// DegeneratePolyline when fewer than two distinct points remain.
class Polyline {
 public:
  explicit Polyline(std::vector<Point2> points);

  std::span<const Point2> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Point2& operator[](std::size_t i) const { return points_[i]; }
  const Point2& front() const { return points_.front(); }
  const Point2& back() const { return points_.back(); }

  double length() const;
  /// Cumulative arclength at each vertex; first entry 0.
  std::vector<double> arclengths() const;
  /// Point at arclength s, clamped to [0, length()].
  Point2 at_arclength(double s) const;
  Polyline reversed() const;

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<Point2> points_;
};

/// Uniform-arclength resampling to exactly `m` points (m >= 2).
Polyline resample(const Polyline& p, int m);

/// Resample with approximately `spacing` meters between points (at least
/// two points). Used to turn polylines into dense point sets.
std::vector<Point2> densify(const Polyline& p, double spacing);

/// Symmetric Chamfer distance between two point sets:
/// (mean_a min_b |a-b| + mean_b min_a |a-b|) / 2.
double chamfer_distance(std::span<const Point2> a, std::span<const Point2> b);
double chamfer_distance(const Polyline& a, const Polyline& b);

/// Rotation about the origin followed by translation.
struct RigidTransform2 {
  double rotation = 0.0;
  Point2 translation{};

  static RigidTransform2 identity() { return {}; }
  Point2 apply(Point2 p) const;
  /// Direction vectors are rotated but not translated.
  Point2 apply_direction(Point2 d) const;
  RigidTransform2 inverse() const;
  /// (a * b).apply(p) == a.apply(b.apply(p)).
  friend RigidTransform2 operator*(const RigidTransform2& a, const RigidTransform2& b);
};

Polyline apply_transform(const RigidTransform2& t, const Polyline& p);

struct Box2 {
  Point2 min;
  Point2 max;

  static Box2 centered(Point2 center, double width, double height);
  bool contains(Point2 p, double tol = 0.0) const;
  Box2 inflated(double margin) const;
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }

  friend bool operator==(const Box2&, const Box2&) = default;
};

/// Position along a point sequence in "index space": u = i + t means
/// lerp(points[i], points[i+1], t).
Point2 point_at_parameter(std::span<const Point2> points, double u);

/// Clips a point sequence against a box and returns the inside pieces as
/// sorted lists of index-space parameters (entry, interior vertices, exit).
/// Points within `tol` of the box count as inside. Pieces shorter than two
/// parameters are dropped.
std::vector<std::vector<double>> clip_parameters(std::span<const Point2> points, const Box2& box,
                                                 double tol = 1e-6);

/// Projection of `p` onto a polyline.
struct Projection {
  double arclength = 0.0;  ///< may be < 0 or > length when `extend` is set
  double distance = 0.0;
  std::size_t segment = 0;
};

/// Closest point on the polyline. With `extend`, the first and last
/// segments are treated as rays so overshoot yields arclengths outside
/// [0, length].
Projection project(const Polyline& line, Point2 p, bool extend = false);

/// Sub-polyline between arclengths s0 < s1 (clamped to the line).
Polyline sub_polyline(const Polyline& line, double s0, double s1);

}  // namespace lanegen
