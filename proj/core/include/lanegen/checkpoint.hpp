#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "lanegen/config.hpp"
#include "lanegen/model.hpp"

namespace lanegen {

struct CheckpointInfo {
  int step = 0;
  /// One-to-one queries in use (all of them unless pruning happened).
  std::vector<int> active_queries;
};

struct LoadedCheckpoint {
  Config config;
  std::unique_ptr<LaneModel<float>> model;
  CheckpointInfo info;
};

/// Writes `dir`/params.lgrt (all parameters, concatenated in registry order,
/// as a 1 x 1 x P LGRT tensor), `dir`/manifest.tsv (parameter names, shapes,
/// offsets) and `dir`/config.cfg (resolved config).
void save_checkpoint(const LaneModel<float>& model, const Config& config, const CheckpointInfo& info,
                     const std::filesystem::path& dir);

/// Rebuilds the model from the stored config and loads the weights. Throws
/// BadCheckpoint when files are missing or shapes disagree.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace lanegen
