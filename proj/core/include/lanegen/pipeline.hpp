#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lanegen/config.hpp"
#include "lanegen/eval.hpp"
#include "lanegen/scene.hpp"
#include "lanegen/tiling.hpp"

namespace lanegen {

/// Scene files (*.lgs) under a path: the file itself, or every *.lgs in a
/// directory, sorted by name.
std::vector<std::filesystem::path> scene_files(const std::filesystem::path& path);

/// Tiles from scenes: every scene is tiled with `split` (overlap sampling for
/// training only) and ids are renumbered across scenes. A directory holding
/// tile_*.json dumps is read as is.
std::vector<Tile> load_tiles(const std::filesystem::path& path, const Config& cfg, SplitTag split,
                             std::uint64_t seed);
std::vector<Tile> tiles_from_scenes(const std::vector<Scene>& scenes, const Config& cfg, SplitTag split,
                                    std::uint64_t seed);

/// Writes tile_XXXXX.lgrt and tile_XXXXX.png for every tile, rasterized in
/// parallel.
void write_rasters(const std::vector<Tile>& tiles, const RasterConfig& cfg, const std::filesystem::path& dir);

struct TrainRunSummary {
  int steps = 0;
  double final_total = 0.0;
  double final_point = 0.0;
};

/// Builds the model from `cfg`, trains it and writes `out`/metrics.tsv, the
/// checkpoint files and `out`/config.cfg.
TrainRunSummary run_training(const std::vector<Tile>& train, const std::vector<Tile>& val, const Config& cfg,
                             const std::filesystem::path& out, std::ostream* log = nullptr);

/// Loads a checkpoint, evaluates it on `tiles`, writes the results file and,
/// when `render_dir` is non-empty, one SVG per tile.
APResult run_evaluation(const std::filesystem::path& checkpoint, const std::vector<Tile>& tiles,
                        const std::filesystem::path& results, const std::filesystem::path& render_dir = {},
                        const Config* override_config = nullptr);

}  // namespace lanegen
