#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "lanegen/config.hpp"
#include "lanegen/eval.hpp"
#include "lanegen/loss.hpp"
#include "lanegen/model.hpp"

namespace lanegen {

/// Running mean of per-query object probability and the pruning decision.
class QueryPruner {
 public:
  QueryPruner(int num_queries, int keep, double momentum);

  /// Folds in the object probabilities of the currently active queries
  /// (`probs[i]` belongs to `active()[i]`).
  void observe(const std::vector<double>& probs);
  /// Keeps the `keep` queries with the highest running mean (lower index on
  /// ties). Idempotent; pruned queries never return.
  void prune();
  bool pruned() const { return pruned_; }
  const std::vector<int>& active() const { return active_; }
  const std::vector<double>& running_mean() const { return mean_; }

 private:
  std::vector<double> mean_;
  std::vector<int> active_;
  int keep_;
  double momentum_;
  bool seen_ = false;
  bool pruned_ = false;
};

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  LossReport loss;
};

struct TrainResult {
  std::vector<StepRecord> history;
  std::vector<int> active_queries;
  std::optional<APResult> last_eval;
};

/// Per-sample seed derived from the run seed, the step and the batch slot.
std::uint64_t sample_seed(std::uint64_t run_seed, int step, int slot);

/// Ground-truth lanes of a tile as flattened matching targets.
std::vector<std::vector<double>> tile_targets(const Tile& tile);

/// Training sample for one step: augmented (if enabled) and rasterized. An
/// augmentation that empties the tile falls back to the original tile.
Tile training_view(const Tile& tile, std::uint64_t seed, const Config& cfg);

/// Runs cfg.train.steps optimizer steps over `train` tiles. Appends one
/// line per step to `metrics` (tab-separated: step, lr, cls, point, dir,
/// o2o, o2m, aux, total) when non-null. Throws NonFiniteLoss naming the
/// tile and seed when a loss is not finite.
TrainResult train_loop(LaneModel<float>& model, const std::vector<Tile>& train, const std::vector<Tile>& val,
                       const Config& cfg, std::ostream* metrics = nullptr, std::ostream* log = nullptr);

/// Header line of the metrics log.
std::string metrics_header();
std::string metrics_line(const StepRecord& r);

/// Final-layer one-to-one predictions for one raster.
std::vector<PredictedLane> predict(const LaneModel<float>& model, const RasterTensor& raster,
                                   const std::vector<int>& active_queries = {});

/// Rasterizes and predicts every tile, then computes dataset-level AP.
APResult evaluate_model(const LaneModel<float>& model, const std::vector<Tile>& tiles, const Config& cfg,
                        const std::vector<int>& active_queries, std::vector<TileBreakdown>* breakdown = nullptr,
                        std::vector<std::vector<PredictedLane>>* predictions = nullptr);

}  // namespace lanegen
