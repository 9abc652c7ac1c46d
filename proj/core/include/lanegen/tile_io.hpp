#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lanegen/tiling.hpp"

namespace lanegen {

/// Tile dumps are JSON documents with the local-frame content of one tile:
/// {"format_version", "id", "center": [x, y], "width", "height",
///  "gt_inset", "split", "trajectories": [{"source", "points": [[x, y, t, v]]}],
///  "gt_lanes": [{"centerline": [[x, y]], "left": [...], "right": [...]}],
///  "patch_masks": [[min_x, min_y, max_x, max_y]]}
std::string tile_to_string(const Tile& tile);
Tile tile_from_string(const std::string& text);

void write_tile(const Tile& tile, const std::filesystem::path& path);
Tile read_tile(const std::filesystem::path& path);

/// Writes tile_00000.json, tile_00001.json, ... into `dir`.
void write_tiles(const std::vector<Tile>& tiles, const std::filesystem::path& dir);
/// Reads every tile_*.json in `dir`, sorted by file name.
std::vector<Tile> read_tiles(const std::filesystem::path& dir);

}  // namespace lanegen
