#pragma once

#include <span>
#include <vector>

#include "lanegen/map_graph.hpp"

namespace lanegen {

/// Row-major square cost matrix.
struct CostMatrix {
  int n = 0;
  std::vector<double> values;

  CostMatrix() = default;
  explicit CostMatrix(int size) : n(size), values(static_cast<std::size_t>(size) * size, 0.0) {}
  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * n + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * n + c]; }
};

/// Prediction-to-slot assignment. Slots below `num_targets` are real ground
/// truth; larger slots are the no-object padding.
struct Assignment {
  std::vector<int> slot;  ///< per prediction row
  int num_targets = 0;
  double cost = 0.0;

  bool matched(int pred) const { return slot[static_cast<std::size_t>(pred)] < num_targets; }
  int matched_count() const;
  /// (prediction, target) pairs ordered by prediction index.
  std::vector<std::pair<int, int>> pairs() const;
};

/// Minimum-cost perfect assignment (Kuhn-Munkres with potentials, O(n^3)).
/// Returns column per row. Throws BadCost on NaN and InvalidArgument on
/// infinite entries.
std::vector<int> hungarian(const CostMatrix& cost);
double assignment_cost(const CostMatrix& cost, std::span<const int> cols);

struct MatchWeights {
  double point = 1.0;
  double cls = 1.0;
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Flattened lane targets: M points of (cx, cy, lx, ly, rx, ry).
std::vector<double> lane_target(const GroundTruthLane& lane);

/// Focal classification costs for "object" and "no object" at probability p.
double focal_object_cost(double p, double alpha, double gamma);
double focal_empty_cost(double p, double alpha, double gamma);

/// Cost of assigning each of N predictions (points [N*M*6], object
/// probabilities [N]) to G targets, padded to a square of size max(N, G):
/// target columns cost point*mean|diff| + cls*focal_object, padding columns
/// cost cls*focal_empty. Rows beyond N (when G > N) are zero.
CostMatrix match_cost(std::span<const double> points, std::span<const double> probs, int num_points,
                      const std::vector<std::vector<double>>& targets, const MatchWeights& w);

/// Hungarian matching of predictions to targets.
Assignment match(std::span<const double> points, std::span<const double> probs, int num_points,
                 const std::vector<std::vector<double>>& targets, const MatchWeights& w);

}  // namespace lanegen
