#include "lanegen/loss.hpp"

#include <algorithm>

#include "lanegen/error.hpp"

namespace lanegen {

using ad::Var;

namespace {

template <typename T>
std::vector<double> probabilities(const LanePrediction<T>& pred) {
  std::vector<double> p(static_cast<std::size_t>(pred.num_lanes()));
  const auto& l = pred.logits.value();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = object_probability(l[2 * i], l[2 * i + 1]);
  return p;
}

/// Matched prediction rows and their targets, flattened, in prediction order.
template <typename T>
void matched_rows(const Assignment& a, const std::vector<std::vector<double>>& targets, std::vector<int>& rows,
                  std::vector<T>& flat) {
  for (const auto& [pred, tgt] : a.pairs()) {
    rows.push_back(pred);
    const auto& t = targets[static_cast<std::size_t>(tgt)];
    flat.insert(flat.end(), t.begin(), t.end());
  }
}

template <typename T>
Var<T> zero_scalar() {
  return Var<T>::constant({1}, T(0));
}

}  // namespace

template <typename T>
Var<T> loss_class(const LanePrediction<T>& pred, const Assignment& a, const LossWeights& w) {
  std::vector<bool> positive(static_cast<std::size_t>(pred.num_lanes()));
  for (int i = 0; i < pred.num_lanes(); ++i) positive[static_cast<std::size_t>(i)] = a.matched(i);
  const double norm = std::max(1, a.matched_count());
  return ad::scale(ad::focal_loss(pred.logits, positive, static_cast<T>(w.alpha), static_cast<T>(w.gamma)),
                   static_cast<T>(1.0 / norm));
}

template <typename T>
Var<T> loss_point(const LanePrediction<T>& pred, const Assignment& a, const std::vector<std::vector<double>>& targets) {
  std::vector<int> rows;
  std::vector<T> flat;
  matched_rows(a, targets, rows, flat);
  if (rows.empty()) return zero_scalar<T>();
  return ad::scale(ad::l1_lane_loss<T>(pred.points, rows, flat), static_cast<T>(1.0 / rows.size()));
}

template <typename T>
Var<T> loss_dir(const LanePrediction<T>& pred, const Assignment& a, const std::vector<std::vector<double>>& targets) {
  std::vector<int> rows;
  std::vector<T> flat;
  matched_rows(a, targets, rows, flat);
  if (rows.empty()) return zero_scalar<T>();
  return ad::scale(ad::direction_lane_loss<T>(pred.points, rows, flat), static_cast<T>(1.0 / rows.size()));
}

template <typename T>
GroupLoss<T> group_loss(const LanePrediction<T>& pred, const std::vector<std::vector<double>>& targets,
                        const LossWeights& w, int replication) {
  std::vector<std::vector<double>> tg;
  for (int r = 0; r < std::max(1, replication); ++r) tg.insert(tg.end(), targets.begin(), targets.end());
  const std::vector<double> probs = probabilities(pred);
  const std::vector<double> pts(pred.points.value().begin(), pred.points.value().end());
  GroupLoss<T> g;
  g.assignment = match(pts, probs, pred.num_points(), tg, w.match());
  g.cls = loss_class(pred, g.assignment, w);
  g.point = loss_point(pred, g.assignment, tg);
  g.dir = loss_dir(pred, g.assignment, tg);
  g.total = ad::add(ad::add(ad::scale(g.cls, static_cast<T>(w.cls)), ad::scale(g.point, static_cast<T>(w.point))),
                    ad::scale(g.dir, static_cast<T>(w.dir)));
  return g;
}

template <typename T>
Var<T> loss_total(const ForwardOutput<T>& out, const std::vector<std::vector<double>>& targets, const LossWeights& w,
                  LossReport* report) {
  if (out.o2o_layers.empty()) throw Error(ErrorCode::InvalidArgument, "forward output has no decoder layers");
  const GroupLoss<T> o2o = group_loss(out.o2o_layers.back(), targets, w, 1);
  Var<T> o2m = zero_scalar<T>();
  if (!out.o2m.empty()) o2m = group_loss(out.o2m.back(), targets, w, w.o2m_replication).total;
  Var<T> aux = zero_scalar<T>();
  for (std::size_t l = 0; l + 1 < out.o2o_layers.size(); ++l) {
    aux = ad::add(aux, group_loss(out.o2o_layers[l], targets, w, 1).total);
  }
  Var<T> total = ad::add(ad::add(ad::scale(o2o.total, static_cast<T>(w.o2o)), ad::scale(o2m, static_cast<T>(w.o2m))),
                         ad::scale(aux, static_cast<T>(w.aux)));
  if (report) {
    report->cls = o2o.cls.item();
    report->point = o2o.point.item();
    report->dir = o2o.dir.item();
    report->o2o = o2o.total.item();
    report->o2m = o2m.item();
    report->aux = aux.item();
    report->total = total.item();
    report->weights = w;
  }
  return total;
}

#define LANEGEN_INSTANTIATE(T)                                                                                    \
  template Var<T> loss_class<T>(const LanePrediction<T>&, const Assignment&, const LossWeights&);                 \
  template Var<T> loss_point<T>(const LanePrediction<T>&, const Assignment&, const std::vector<std::vector<double>>&); \
  template Var<T> loss_dir<T>(const LanePrediction<T>&, const Assignment&, const std::vector<std::vector<double>>&);   \
  template GroupLoss<T> group_loss<T>(const LanePrediction<T>&, const std::vector<std::vector<double>>&,          \
                                      const LossWeights&, int);                                                   \
  template Var<T> loss_total<T>(const ForwardOutput<T>&, const std::vector<std::vector<double>>&, const LossWeights&, \
                                LossReport*);

LANEGEN_INSTANTIATE(float)
LANEGEN_INSTANTIATE(double)

#undef LANEGEN_INSTANTIATE

}  // namespace lanegen
