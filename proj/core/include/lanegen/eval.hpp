#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lanegen/map_graph.hpp"
#include "lanegen/model.hpp"

namespace lanegen {

/// One scored prediction after greedy matching at one threshold.
struct EvalRecord {
  double confidence = 0.0;
  bool true_positive = false;
  int matched_gt = -1;
};

struct APResult {
  std::vector<double> thresholds;
  std::vector<double> ap_c_tau;   ///< per threshold
  std::vector<double> ap_ld_tau;  ///< per threshold
  std::vector<double> ap_tau;     ///< (ap_c_tau + ap_ld_tau) / 2
  double ap_c = 0.0;
  double ap_ld = 0.0;
  double ap = 0.0;  ///< (ap_c + ap_ld) / 2
  bool empty_ground_truth = false;
};

/// Predictions and ground truth of one tile.
struct TileEval {
  int tile_id = 0;
  std::vector<PredictedLane> predictions;
  std::vector<GroundTruthLane> ground_truth;
};

struct TileBreakdown {
  int tile_id = 0;
  int num_gt = 0;
  int num_pred = 0;
  double ap_c = 0.0;
  double ap_ld = 0.0;
  double ap = 0.0;
};

/// Chamfer distance between two point sequences after densifying both to
/// `spacing`; tolerant of repeated points.
double polyline_chamfer(const std::vector<Point2>& a, const std::vector<Point2>& b, double spacing = 0.25);

/// Greedy confidence-ordered matching of instances to ground truth at
/// threshold tau. dist[i][j] is prediction i to GT j.
std::vector<EvalRecord> greedy_match(const std::vector<double>& confidence,
                                     const std::vector<std::vector<double>>& dist, double tau);

/// All-point interpolated area under the precision-recall curve of the
/// records (any order; sorted by descending confidence, stable).
double average_precision(std::vector<EvalRecord> records, int num_gt);

/// Dataset-level AP: records from all tiles are pooled before the PR curve.
/// Throws NoInstances when there is neither ground truth nor predictions.
APResult evaluate_tiles(const std::vector<TileEval>& tiles, const std::vector<double>& thresholds,
                        std::vector<TileBreakdown>* breakdown = nullptr);
APResult evaluate(const std::vector<PredictedLane>& preds, const std::vector<GroundTruthLane>& gts,
                  const std::vector<double>& thresholds = {0.5, 1.0, 1.5});

/// Structured text: summary `key=value` lines then a tab-separated per-tile
/// table. Values are reported x100 with fixed precision.
std::string results_to_string(const APResult& r, const std::vector<TileBreakdown>& tiles);
void write_results(const APResult& r, const std::vector<TileBreakdown>& tiles, const std::filesystem::path& path);

}  // namespace lanegen
