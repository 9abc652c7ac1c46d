#include "lanegen/raster.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>

#include <png.h>

#include "lanegen/error.hpp"

namespace lanegen {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kHistogramBins = 72;

/// Walks every trajectory at half-pixel steps and calls
/// visit(row, col, point, unit_direction, speed) for each sample inside the
/// tile. Segment starts are sampled; the final vertex of a trajectory is
/// sampled with the direction of its last segment.
template <typename Visit>
void walk(const Tile& tile, const PixelAccumulator& geo, Visit&& visit) {
  const double step = geo.resolution / 2.0;
  for (const Trajectory& traj : tile.trajectories) {
    const auto& pts = traj.points;
    Point2 last_dir{};
    bool any = false;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Point2 a = pts[i].position;
      const Point2 b = pts[i + 1].position;
      const double len = distance(a, b);
      if (len <= 0.0) continue;
      const Point2 dir = (b - a) * (1.0 / len);
      const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
      for (int k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / n;
        const Point2 q = lerp(a, b, t);
        const double v = pts[i].speed + (pts[i + 1].speed - pts[i].speed) * t;
        int row = 0, col = 0;
        if (geo.pixel_of(q, row, col)) visit(row, col, q, dir, v);
      }
      last_dir = dir;
      any = true;
    }
    if (any) {
      int row = 0, col = 0;
      if (geo.pixel_of(pts.back().position, row, col)) visit(row, col, pts.back().position, last_dir, pts.back().speed);
    }
  }
}

PixelAccumulator empty_accumulator(const Tile& tile, int height, int width) {
  if (height < 32 || width < 32) throw Error(ErrorCode::BadResolution, "raster must be at least 32x32");
  PixelAccumulator acc;
  acc.height = height;
  acc.width = width;
  acc.tile_width = tile.width;
  acc.tile_height = tile.height;
  acc.resolution = tile.width / width;
  if (std::abs(tile.height / height - acc.resolution) > 1e-9 * acc.resolution) {
    throw Error(ErrorCode::BadResolution, "raster pixels must be square");
  }
  const std::size_t n = static_cast<std::size_t>(height) * width;
  acc.count.assign(n, 0);
  acc.dir_x.assign(n, 0.0);
  acc.dir_y.assign(n, 0.0);
  acc.speed.assign(n, 0.0);
  acc.pos_x.assign(n, 0.0);
  acc.pos_y.assign(n, 0.0);
  return acc;
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;
}

}  // namespace

Point2 PixelAccumulator::pixel_center(int row, int col) const {
  return {-tile_width / 2.0 + (col + 0.5) * resolution, tile_height / 2.0 - (row + 0.5) * resolution};
}

bool PixelAccumulator::pixel_of(Point2 p, int& row, int& col) const {
  const double fx = (p.x + tile_width / 2.0) / resolution;
  const double fy = (tile_height / 2.0 - p.y) / resolution;
  if (!(fx >= 0.0 && fy >= 0.0 && fx <= width && fy <= height)) return false;
  col = std::min(static_cast<int>(fx), width - 1);
  row = std::min(static_cast<int>(fy), height - 1);
  return true;
}

double hue_from_direction(double dx, double dy) {
  if (dx == 0.0 && dy == 0.0) throw Error(ErrorCode::ZeroDirection, "direction vector is zero");
  return wrap_angle(std::atan2(dy, dx)) / kTwoPi;
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double h6 = (h - std::floor(h)) * 6.0;
  const int i = std::min(5, static_cast<int>(h6));
  const double f = h6 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
  }
}

double hue_from_rgb(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  if (d <= 0.0) return 0.0;
  double h = 0.0;
  if (mx == r) {
    h = (g - b) / d;
    if (h < 0) h += 6.0;
  } else if (mx == g) {
    h = 2.0 + (b - r) / d;
  } else {
    h = 4.0 + (r - g) / d;
  }
  h /= 6.0;
  return h >= 1.0 ? 0.0 : h;
}

double pixel_value(double count, double count_max, double gain) {
  if (count <= 0.0 || count_max <= 0.0) return 0.0;
  return std::log1p(gain * count / count_max) / std::log1p(gain);
}

PixelAccumulator accumulate(const Tile& tile, int height, int width) {
  PixelAccumulator acc = empty_accumulator(tile, height, width);
  walk(tile, acc, [&](int row, int col, Point2 q, Point2 dir, double v) {
    const std::size_t k = acc.index(row, col);
    acc.count[k] += 1;
    acc.dir_x[k] += dir.x;
    acc.dir_y[k] += dir.y;
    acc.speed[k] += v;
    acc.pos_x[k] += q.x;
    acc.pos_y[k] += q.y;
  });
  return acc;
}

std::vector<double> pixel_hues(const Tile& tile, const PixelAccumulator& acc, double cancellation_ratio) {
  std::vector<double> hue(acc.count.size(), 0.0);
  std::map<std::size_t, std::array<std::uint32_t, kHistogramBins>> conflicts;
  for (std::size_t k = 0; k < acc.count.size(); ++k) {
    if (acc.count[k] == 0) continue;
    const double resultant = std::hypot(acc.dir_x[k], acc.dir_y[k]);
    if (resultant < cancellation_ratio * acc.count[k]) {
      conflicts[k].fill(0);
    } else {
      hue[k] = hue_from_direction(acc.dir_x[k], acc.dir_y[k]);
    }
  }
  if (conflicts.empty()) return hue;

  // Second pass over the conflicting pixels only: histogram the directions
  // and keep the most frequent one (smaller angle on ties).
  std::map<std::size_t, std::array<Point2, kHistogramBins>> bin_sums;
  walk(tile, acc, [&](int row, int col, Point2, Point2 dir, double) {
    const std::size_t k = acc.index(row, col);
    auto it = conflicts.find(k);
    if (it == conflicts.end()) return;
    const double a = wrap_angle(std::atan2(dir.y, dir.x));
    const int bin = std::min(kHistogramBins - 1, static_cast<int>(a / kTwoPi * kHistogramBins));
    it->second[bin] += 1;
    Point2& s = bin_sums[k][bin];
    s = s + dir;
  });
  for (const auto& [k, hist] : conflicts) {
    int best = 0;
    for (int b = 1; b < kHistogramBins; ++b) {
      if (hist[b] > hist[best]) best = b;
    }
    const Point2 s = bin_sums[k][best];
    hue[k] = hue_from_direction(s.x, s.y);
  }
  return hue;
}

RasterTensor rasterize(const Tile& tile, const RasterConfig& cfg) {
  if (tile.trajectories.empty()) throw Error(ErrorCode::EmptyTile, "tile has no trajectories to rasterize");
  const PixelAccumulator acc = accumulate(tile, cfg.height, cfg.width);
  const std::vector<double> hue = pixel_hues(tile, acc, cfg.cancellation_ratio);
  RasterTensor out(kRasterChannels, cfg.height, cfg.width, acc.resolution);
  const double count_max = *std::max_element(acc.count.begin(), acc.count.end());
  for (int row = 0; row < cfg.height; ++row) {
    for (int col = 0; col < cfg.width; ++col) {
      const std::size_t k = acc.index(row, col);
      const double c = acc.count[k];
      if (c == 0) continue;
      double rgb[3];
      hsv_to_rgb(hue[k], 1.0, pixel_value(c, count_max, cfg.intensity_gain), rgb);
      const Point2 center = acc.pixel_center(row, col);
      const double ox = (acc.pos_x[k] / c - center.x) / acc.resolution;
      const double oy = (acc.pos_y[k] / c - center.y) / acc.resolution;
      out.at(kRed, row, col) = static_cast<float>(rgb[0]);
      out.at(kGreen, row, col) = static_cast<float>(rgb[1]);
      out.at(kBlue, row, col) = static_cast<float>(rgb[2]);
      out.at(kVelocity, row, col) = static_cast<float>(std::clamp(acc.speed[k] / c / cfg.v_max, 0.0, 1.0));
      out.at(kOffsetX, row, col) = static_cast<float>(std::clamp(ox, -0.5, 0.5));
      out.at(kOffsetY, row, col) = static_cast<float>(std::clamp(oy, -0.5, 0.5));
    }
  }
  apply_patch_masks(out, tile.patch_masks, tile.width, tile.height);
  return out;
}

RasterTensor rasterize(const Tile& tile, int height, int width) {
  RasterConfig cfg;
  cfg.height = height;
  cfg.width = width;
  return rasterize(tile, cfg);
}

void apply_patch_masks(RasterTensor& t, std::span<const Box2> masks, double tile_width, double tile_height) {
  for (const Box2& box : masks) {
    for (int row = 0; row < t.height; ++row) {
      const double y = tile_height / 2.0 - (row + 0.5) * t.resolution;
      if (y < box.min.y || y > box.max.y) continue;
      for (int col = 0; col < t.width; ++col) {
        const double x = -tile_width / 2.0 + (col + 0.5) * t.resolution;
        if (x < box.min.x || x > box.max.x) continue;
        for (int c = 0; c < t.channels; ++c) t.at(c, row, col) = 0.0f;
      }
    }
  }
}

RoundtripReport raster_roundtrip_check(const RasterTensor& t, const Tile& tile, const RasterConfig& cfg,
                                       double tolerance) {
  const PixelAccumulator acc = accumulate(tile, t.height, t.width);
  const std::vector<double> hue = pixel_hues(tile, acc, cfg.cancellation_ratio);
  RoundtripReport rep;
  for (int row = 0; row < t.height; ++row) {
    for (int col = 0; col < t.width; ++col) {
      const std::size_t k = acc.index(row, col);
      const double r = t.at(kRed, row, col), g = t.at(kGreen, row, col), b = t.at(kBlue, row, col);
      if (acc.count[k] == 0 || std::max({r, g, b}) <= 0.0) continue;  // empty or masked
      const double decoded = hue_from_rgb(r, g, b) * kTwoPi;
      const double expected = hue[k] * kTwoPi;
      double err = std::abs(decoded - expected);
      err = std::min(err, kTwoPi - err);
      rep.max_error = std::max(rep.max_error, err);
      ++rep.pixels_checked;
    }
  }
  rep.pass = rep.max_error <= tolerance;
  return rep;
}

void write_lgrt(const RasterTensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const std::uint32_t header[4] = {1u, static_cast<std::uint32_t>(t.channels), static_cast<std::uint32_t>(t.height),
                                   static_cast<std::uint32_t>(t.width)};
  out.write("LGRT", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(&t.resolution), sizeof(double));
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

RasterTensor read_lgrt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  char magic[4];
  std::uint32_t header[4];
  double res = 0.0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  in.read(reinterpret_cast<char*>(&res), sizeof(double));
  if (!in || std::memcmp(magic, "LGRT", 4) != 0 || header[0] != 1u) {
    throw Error(ErrorCode::IoError, path.string() + " is not an LGRT v1 file");
  }
  RasterTensor t(static_cast<int>(header[1]), static_cast<int>(header[2]), static_cast<int>(header[3]), res);
  in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!in) throw Error(ErrorCode::IoError, path.string() + " is truncated");
  return t;
}

void write_png_preview(const RasterTensor& t, const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::IoError, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(t.width), static_cast<png_uint_32>(t.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(t.width) * 3);
  for (int r = 0; r < t.height; ++r) {
    for (int c = 0; c < t.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = t.channels > ch ? t.at(ch, r, c) : 0.0f;
        row[static_cast<std::size_t>(c) * 3 + ch] =
            static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace lanegen
