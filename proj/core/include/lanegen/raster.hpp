#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lanegen/tiling.hpp"

namespace lanegen {

/// Channel order of a raster.
enum RasterChannel : int { kRed = 0, kGreen, kBlue, kVelocity, kOffsetX, kOffsetY, kRasterChannels };

/// C x H x W single-precision image in row-major channel planes. Row 0 is the
/// northern edge of the tile and column 0 the western edge.
struct RasterTensor {
  int channels = kRasterChannels;
  int height = 0;
  int width = 0;
  double resolution = 0.0;  ///< meters per pixel
  std::vector<float> data;

  RasterTensor() = default;
  RasterTensor(int c, int h, int w, double res)
      : channels(c), height(h), width(w), resolution(res),
        data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

  float& at(int c, int row, int col) { return data[(static_cast<std::size_t>(c) * height + row) * width + col]; }
  float at(int c, int row, int col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }

  friend bool operator==(const RasterTensor&, const RasterTensor&) = default;
};

struct RasterConfig {
  int height = 512;
  int width = 512;
  /// Speed that maps to a velocity channel value of 1.
  double v_max = 30.0;
  /// Gain of the logarithmic intensity curve; see pixel_value.
  double intensity_gain = 64.0;
  /// Resultant-to-count ratio below which a pixel counts as conflicting.
  double cancellation_ratio = 0.1;
};

/// Per-pixel running sums collected while walking the trajectories.
struct PixelAccumulator {
  int height = 0;
  int width = 0;
  double resolution = 0.0;
  double tile_width = 0.0;
  double tile_height = 0.0;
  std::vector<std::uint32_t> count;
  std::vector<double> dir_x, dir_y, speed, pos_x, pos_y;

  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width + col; }
  Point2 pixel_center(int row, int col) const;
  /// Pixel containing a local-frame point, or false when outside the tile.
  bool pixel_of(Point2 p, int& row, int& col) const;
};

/// atan2(dy, dx) mapped to [0, 1). Throws ZeroDirection for (0, 0).
double hue_from_direction(double dx, double dy);

/// Standard HSV to RGB conversion, all components in [0, 1].
void hsv_to_rgb(double h, double s, double v, double rgb[3]);
/// Hue in [0, 1) of an RGB triple; 0 for grey.
double hue_from_rgb(double r, double g, double b);

/// Brightness for a pixel hit `count` times when the busiest pixel has
/// `count_max` hits: log(1 + g c / c_max) / log(1 + g). Depends only on the
/// ratio, so duplicating every trajectory leaves it unchanged.
double pixel_value(double count, double count_max, double gain);

PixelAccumulator accumulate(const Tile& tile, int height, int width);

/// Hue of an occupied pixel: circular mean of the contributing directions,
/// or the majority direction when the flows (nearly) cancel.
std::vector<double> pixel_hues(const Tile& tile, const PixelAccumulator& acc, double cancellation_ratio);

/// Throws EmptyTile when the tile has no trajectories.
RasterTensor rasterize(const Tile& tile, const RasterConfig& cfg);
RasterTensor rasterize(const Tile& tile, int height, int width);

/// Zeroes every pixel whose center lies in one of the boxes (local meters).
void apply_patch_masks(RasterTensor& t, std::span<const Box2> masks, double tile_width, double tile_height);

struct RoundtripReport {
  bool pass = false;
  std::size_t pixels_checked = 0;
  double max_error = 0.0;  ///< radians
};

/// Decodes the hue of every occupied pixel from the RGB channels and compares
/// it with the direction recomputed from the trajectories.
RoundtripReport raster_roundtrip_check(const RasterTensor& t, const Tile& tile, const RasterConfig& cfg,
                                       double tolerance = 1e-6);

/// "LGRT" tensor files: magic, u32 version, u32 C, u32 H, u32 W, f64
/// resolution, then C*H*W little-endian float32 values.
void write_lgrt(const RasterTensor& t, const std::filesystem::path& path);
RasterTensor read_lgrt(const std::filesystem::path& path);

/// 8-bit RGB preview of the first three channels.
void write_png_preview(const RasterTensor& t, const std::filesystem::path& path);

}  // namespace lanegen
