#include "lanegen/geom.hpp"

#include <algorithm>
#include <limits>

#include "lanegen/error.hpp"

namespace lanegen {

Polyline::Polyline(std::vector<Point2> points) {
  points_.reserve(points.size());
  for (const Point2& p : points) {
    if (!is_finite(p)) throw Error(ErrorCode::InvalidArgument, "polyline point is not finite");
    if (!points_.empty() && points_.back() == p) continue;
    points_.push_back(p);
  }
  if (points_.size() < 2) {
    throw Error(ErrorCode::DegeneratePolyline, "polyline needs at least two distinct points");
  }
}

double Polyline::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) total += distance(points_[i - 1], points_[i]);
  return total;
}

std::vector<double> Polyline::arclengths() const {
  std::vector<double> s(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) s[i] = s[i - 1] + distance(points_[i - 1], points_[i]);
  return s;
}

Point2 Polyline::at_arclength(double s) const {
  if (s <= 0.0) return points_.front();
  double acc = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = distance(points_[i - 1], points_[i]);
    if (acc + seg >= s) return lerp(points_[i - 1], points_[i], (s - acc) / seg);
    acc += seg;
  }
  return points_.back();
}

Polyline Polyline::reversed() const {
  std::vector<Point2> r(points_.rbegin(), points_.rend());
  return Polyline(std::move(r));
}

Polyline resample(const Polyline& p, int m) {
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "resample needs m >= 2");
  const std::vector<double> s = p.arclengths();
  const double total = s.back();
  if (!(total > 0.0)) throw Error(ErrorCode::DegeneratePolyline, "polyline has zero length");
  const auto pts = p.points();
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(m));
  out.push_back(pts.front());
  std::size_t seg = 1;
  for (int k = 1; k < m - 1; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(m - 1);
    while (seg + 1 < pts.size() && s[seg] < target) ++seg;
    const double len = s[seg] - s[seg - 1];
    const double t = len > 0.0 ? (target - s[seg - 1]) / len : 0.0;
    out.push_back(lerp(pts[seg - 1], pts[seg], std::clamp(t, 0.0, 1.0)));
  }
  out.push_back(pts.back());
  return Polyline(std::move(out));
}

std::vector<Point2> densify(const Polyline& p, double spacing) {
  const double total = p.length();
  const int m = std::max(2, static_cast<int>(std::ceil(total / spacing)) + 1);
  const Polyline r = resample(p, m);
  return {r.points().begin(), r.points().end()};
}

namespace {

double mean_nearest(std::span<const Point2> from, std::span<const Point2> to) {
  double sum = 0.0;
  for (const Point2& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& b : to) {
      const Point2 d = a - b;
      best = std::min(best, d.x * d.x + d.y * d.y);
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "chamfer distance of an empty point set");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

double chamfer_distance(const Polyline& a, const Polyline& b) {
  return chamfer_distance(a.points(), b.points());
}

Point2 RigidTransform2::apply(Point2 p) const {
  return apply_direction(p) + translation;
}

Point2 RigidTransform2::apply_direction(Point2 d) const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  return {c * d.x - s * d.y, s * d.x + c * d.y};
}

RigidTransform2 RigidTransform2::inverse() const {
  RigidTransform2 inv;
  inv.rotation = -rotation;
  inv.translation = -inv.apply_direction(translation);
  return inv;
}

RigidTransform2 operator*(const RigidTransform2& a, const RigidTransform2& b) {
  RigidTransform2 out;
  out.rotation = a.rotation + b.rotation;
  out.translation = a.apply(b.translation);
  return out;
}

Polyline apply_transform(const RigidTransform2& t, const Polyline& p) {
  std::vector<Point2> out;
  out.reserve(p.size());
  for (const Point2& q : p.points()) out.push_back(t.apply(q));
  return Polyline(std::move(out));
}

Box2 Box2::centered(Point2 center, double width, double height) {
  return {{center.x - width / 2, center.y - height / 2}, {center.x + width / 2, center.y + height / 2}};
}

bool Box2::contains(Point2 p, double tol) const {
  return p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol && p.y <= max.y + tol;
}

Box2 Box2::inflated(double margin) const {
  return {{min.x - margin, min.y - margin}, {max.x + margin, max.y + margin}};
}

Point2 point_at_parameter(std::span<const Point2> points, double u) {
  if (u <= 0.0) return points.front();
  const auto last = static_cast<double>(points.size() - 1);
  if (u >= last) return points.back();
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double t = u - static_cast<double>(i);
  if (t == 0.0) return points[i];
  return lerp(points[i], points[i + 1], t);
}

std::vector<std::vector<double>> clip_parameters(std::span<const Point2> points, const Box2& box, double tol) {
  std::vector<std::vector<double>> pieces;
  if (points.size() < 2) return pieces;
  std::vector<double> current;
  auto flush = [&] {
    if (current.size() >= 2) pieces.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Point2 p0 = points[i];
    const Point2 d = points[i + 1] - p0;
    // Liang-Barsky
    double t0 = 0.0;
    double t1 = 1.0;
    bool visible = true;
    const double ps[4] = {-d.x, d.x, -d.y, d.y};
    const double qs[4] = {p0.x - box.min.x, box.max.x - p0.x, p0.y - box.min.y, box.max.y - p0.y};
    for (int k = 0; k < 4 && visible; ++k) {
      if (ps[k] == 0.0) {
        if (qs[k] < 0.0) visible = false;
      } else {
        const double r = qs[k] / ps[k];
        if (ps[k] < 0.0) {
          if (r > t1) visible = false;
          else t0 = std::max(t0, r);
        } else {
          if (r < t0) visible = false;
          else t1 = std::min(t1, r);
        }
      }
    }
    // Crossings come from the exact box; the tolerance only lets endpoints
    // lying just outside count as inside.
    const bool in0 = box.contains(p0, tol), in1 = box.contains(points[i + 1], tol);
    if (in0 && in1) {
      visible = true;
      t0 = 0.0;
      t1 = 1.0;
    } else if (visible) {
      if (in0) t0 = 0.0;
      if (in1) t1 = 1.0;
    }
    if (!visible) {
      flush();
      continue;
    }
    const double u0 = static_cast<double>(i) + t0;
    const double u1 = static_cast<double>(i) + t1;
    if (current.empty() || current.back() != u0) {
      flush();
      current.push_back(u0);
    }
    if (u1 > u0) current.push_back(u1);
    if (t1 < 1.0) flush();
  }
  flush();
  return pieces;
}

Projection project(const Polyline& line, Point2 p, bool extend) {
  const auto pts = line.points();
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  double acc = 0.0;
  const std::size_t nseg = pts.size() - 1;
  for (std::size_t i = 0; i < nseg; ++i) {
    const Point2 a = pts[i];
    const Point2 d = pts[i + 1] - a;
    const double len2 = dot(d, d);
    const double len = std::sqrt(len2);
    double t = dot(p - a, d) / len2;
    const double lo = (extend && i == 0) ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi = (extend && i + 1 == nseg) ? std::numeric_limits<double>::infinity() : 1.0;
    t = std::clamp(t, lo, hi);
    const double dist = distance(p, a + d * t);
    if (dist < best.distance) {
      best.distance = dist;
      best.arclength = acc + t * len;
      best.segment = i;
    }
    acc += len;
  }
  return best;
}

Polyline sub_polyline(const Polyline& line, double s0, double s1) {
  const std::vector<double> s = line.arclengths();
  s0 = std::clamp(s0, 0.0, s.back());
  s1 = std::clamp(s1, 0.0, s.back());
  std::vector<Point2> out;
  out.push_back(line.at_arclength(s0));
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (s[i] > s0 && s[i] < s1) out.push_back(line[i]);
  }
  out.push_back(line.at_arclength(s1));
  return Polyline(std::move(out));
}

}  // namespace lanegen
