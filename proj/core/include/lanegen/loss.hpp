#pragma once

#include <vector>

#include "lanegen/matching.hpp"
#include "lanegen/model.hpp"

namespace lanegen {

struct LossWeights {
  double cls = 1.0;
  double point = 1.0;
  double dir = 1.0;
  double o2o = 1.0;
  double o2m = 1.0;
  double aux = 1.0;
  double alpha = 0.25;
  double gamma = 2.0;
  /// Ground-truth replication factor of the one-to-many group.
  int o2m_replication = 3;

  MatchWeights match() const { return {point, cls, alpha, gamma}; }
};

/// Losses of one query group against one set of targets.
template <typename T>
struct GroupLoss {
  ad::Var<T> cls;
  ad::Var<T> point;
  ad::Var<T> dir;
  ad::Var<T> total;  ///< cls*w.cls + point*w.point + dir*w.dir
  Assignment assignment;
};

/// Scalar summary of a training step's losses.
struct LossReport {
  double cls = 0.0;    ///< final-layer one-to-one terms
  double point = 0.0;
  double dir = 0.0;
  double o2o = 0.0;
  double o2m = 0.0;
  double aux = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// Focal loss over all rows (matched = object), divided by max(1, matched).
template <typename T>
ad::Var<T> loss_class(const LanePrediction<T>& pred, const Assignment& a, const LossWeights& w);
/// Mean over matched lanes of the mean over M points of the 6-coordinate L1.
template <typename T>
ad::Var<T> loss_point(const LanePrediction<T>& pred, const Assignment& a,
                      const std::vector<std::vector<double>>& targets);
/// Mean over matched lanes of the mean (1 - cos) segment direction error.
template <typename T>
ad::Var<T> loss_dir(const LanePrediction<T>& pred, const Assignment& a, const std::vector<std::vector<double>>& targets);

/// Matches the group against targets replicated `replication` times and
/// evaluates the three weighted terms.
template <typename T>
GroupLoss<T> group_loss(const LanePrediction<T>& pred, const std::vector<std::vector<double>>& targets,
                        const LossWeights& w, int replication = 1);

/// o2o on the final layer, o2m on the one-to-many group, aux summed over the
/// intermediate one-to-one layers; total = w.o2o*o2o + w.o2m*o2m + w.aux*aux.
template <typename T>
ad::Var<T> loss_total(const ForwardOutput<T>& out, const std::vector<std::vector<double>>& targets,
                      const LossWeights& w, LossReport* report = nullptr);

}  // namespace lanegen
