#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lanegen/loss.hpp"
#include "lanegen/model.hpp"
#include "lanegen/optimizer.hpp"
#include "lanegen/raster.hpp"
#include "lanegen/tiling.hpp"

namespace lanegen {

struct TrainOptions {
  int batch_size = 32;
  int steps = 20000;
  bool augment = true;
  /// Drop the lowest-confidence one-to-one queries after a warmup.
  bool query_pruning = false;
  /// Fraction of training after which pruning happens.
  double pruning_warmup = 0.5;
  /// Queries kept after pruning.
  int pruned_queries = 25;
  /// Momentum of the running mean of per-query object probability.
  double pruning_momentum = 0.99;
  /// Steps between evaluations on the validation tiles; 0 disables.
  int eval_every = 0;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  std::vector<double> thresholds{0.5, 1.0, 1.5};
  /// Predictions below this object probability are discarded before AP.
  double min_confidence = 0.0;
};

/// Every tunable of the pipeline. Defaults follow the full-scale setup;
/// `desk` shrinks it to something a single CPU trains in minutes.
struct Config {
  TilingConfig tiling;
  TileSetOptions tiles;
  RasterConfig raster;
  ModelConfig model;
  LossWeights loss;
  OptimizerConfig optim;
  AugmentConfig augment;
  TrainOptions train;
  EvalOptions eval;
  int threads = 0;  ///< 0 = machine parallelism

  static Config paper();
  static Config desk();
  /// "paper" or "desk"; throws BadConfig otherwise.
  static Config preset(std::string_view name);

  /// Applies `key=value` lines; blank lines and `#` comments are ignored.
  /// Unknown keys and unparsable values throw BadConfig.
  void apply_text(const std::string& text);
  void apply_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::vector<std::string> keys() const;

  /// Fully resolved key=value listing, one per line, in a fixed order.
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

  /// Model settings derived from the rest (points per lane, extent).
  ModelConfig resolved_model() const;
};

}  // namespace lanegen
