#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lanegen/model.hpp"
#include "lanegen/tiling.hpp"

namespace lanegen {

struct RenderOptions {
  double pixels_per_meter = 10.0;
  /// Predictions below this object probability are not drawn.
  double min_confidence = 0.5;
  bool draw_trajectories = true;
  bool draw_ground_truth = true;
};

/// SVG of one tile: trajectories (light blue), ground truth (grey, dashed),
/// predicted centerlines (green) with direction arrows and predicted
/// dividers (orange). North is up.
std::string render_svg(const Tile& tile, const std::vector<PredictedLane>& predictions, const RenderOptions& opts = {});
void write_svg(const Tile& tile, const std::vector<PredictedLane>& predictions, const std::filesystem::path& path,
               const RenderOptions& opts = {});

}  // namespace lanegen
