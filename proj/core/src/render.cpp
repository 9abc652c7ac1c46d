#include "lanegen/render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "lanegen/error.hpp"

namespace lanegen {

namespace {

struct Canvas {
  double w, h, scale;
  std::string body;

  std::string xy(Point2 p) const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f", (p.x + w / 2.0) * scale, (h / 2.0 - p.y) * scale);
    return buf;
  }

  void polyline(const std::vector<Point2>& pts, const char* color, double width, const char* extra = "") {
    if (pts.size() < 2) return;
    body += "  <polyline fill=\"none\" stroke=\"";
    body += color;
    body += "\" stroke-width=\"" + std::to_string(width) + "\" " + extra + " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body += ' ';
      body += xy(pts[i]);
    }
    body += "\"/>\n";
  }

  void arrow(Point2 tip, Point2 dir, const char* color) {
    const double n = norm(dir);
    if (n <= 0.0) return;
    const Point2 u = dir * (1.0 / n);
    const Point2 side{-u.y, u.x};
    const double len = 1.5;
    const Point2 a = tip - u * len + side * (len * 0.5);
    const Point2 b = tip - u * len - side * (len * 0.5);
    body += "  <polygon fill=\"";
    body += color;
    body += "\" points=\"" + xy(tip) + " " + xy(a) + " " + xy(b) + "\"/>\n";
  }
};

std::vector<Point2> to_vec(const Polyline& p) { return {p.points().begin(), p.points().end()}; }

}  // namespace

std::string render_svg(const Tile& tile, const std::vector<PredictedLane>& predictions, const RenderOptions& opts) {
  Canvas c{tile.width, tile.height, opts.pixels_per_meter, {}};
  char header[256];
  std::snprintf(header, sizeof(header),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                tile.width * c.scale, tile.height * c.scale, tile.width * c.scale, tile.height * c.scale);
  std::string out = header;
  out += "  <rect width=\"100%\" height=\"100%\" fill=\"white\" stroke=\"black\"/>\n";
  if (opts.draw_trajectories) {
    for (const Trajectory& t : tile.trajectories) c.polyline(t.positions(), "#9ecae1", 1.0, "opacity=\"0.6\"");
  }
  if (opts.draw_ground_truth) {
    for (const GroundTruthLane& g : tile.gt_lanes) {
      c.polyline(to_vec(g.left), "#888888", 1.5, "stroke-dasharray=\"6,4\"");
      c.polyline(to_vec(g.right), "#888888", 1.5, "stroke-dasharray=\"6,4\"");
      c.polyline(to_vec(g.centerline), "#555555", 1.5, "stroke-dasharray=\"2,4\"");
    }
  }
  for (const PredictedLane& p : predictions) {
    if (p.confidence < opts.min_confidence) continue;
    c.polyline(p.left, "#ff8c00", 2.0);
    c.polyline(p.right, "#ff8c00", 2.0);
    c.polyline(p.centerline, "#2ca02c", 2.5);
    const std::size_t n = p.centerline.size();
    if (n >= 2) {
      const std::size_t mid = n / 2;
      c.arrow(p.centerline[mid], p.centerline[mid] - p.centerline[mid - 1], "#2ca02c");
      c.arrow(p.centerline[n - 1], p.centerline[n - 1] - p.centerline[n - 2], "#2ca02c");
    }
  }
  out += c.body;
  out += "</svg>\n";
  return out;
}

void write_svg(const Tile& tile, const std::vector<PredictedLane>& predictions, const std::filesystem::path& path,
               const RenderOptions& opts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << render_svg(tile, predictions, opts);
}

}  // namespace lanegen
