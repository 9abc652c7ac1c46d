#include "lanegen/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "lanegen/error.hpp"

namespace lanegen {

namespace {

std::vector<Point2> densify_points(const std::vector<Point2>& pts, double spacing) {
  std::vector<Point2> out;
  if (pts.empty()) return out;
  out.push_back(pts.front());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = distance(pts[i], pts[i + 1]);
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int k = 1; k <= n; ++k) out.push_back(lerp(pts[i], pts[i + 1], static_cast<double>(k) / n));
  }
  return out;
}

enum class Kind { Centerline, Divider };

/// Scored instances and the GT polylines of one tile for one kind.
struct KindSet {
  std::vector<std::vector<Point2>> preds;
  std::vector<double> confidence;
  std::vector<std::vector<Point2>> gts;
};

KindSet collect(const TileEval& t, Kind kind) {
  KindSet s;
  for (const PredictedLane& p : t.predictions) {
    if (kind == Kind::Centerline) {
      s.preds.push_back(p.centerline);
      s.confidence.push_back(p.confidence);
    } else {
      s.preds.push_back(p.left);
      s.confidence.push_back(p.confidence);
      s.preds.push_back(p.right);
      s.confidence.push_back(p.confidence);
    }
  }
  for (const GroundTruthLane& g : t.ground_truth) {
    auto pts = [](const Polyline& l) { return std::vector<Point2>(l.points().begin(), l.points().end()); };
    if (kind == Kind::Centerline) {
      s.gts.push_back(pts(g.centerline));
    } else {
      s.gts.push_back(pts(g.left));
      s.gts.push_back(pts(g.right));
    }
  }
  return s;
}

std::vector<std::vector<double>> distances(const KindSet& s) {
  std::vector<std::vector<Point2>> dp, dg;
  for (const auto& p : s.preds) dp.push_back(densify_points(p, 0.25));
  for (const auto& g : s.gts) dg.push_back(densify_points(g, 0.25));
  std::vector<std::vector<double>> d(dp.size(), std::vector<double>(dg.size()));
  for (std::size_t i = 0; i < dp.size(); ++i) {
    for (std::size_t j = 0; j < dg.size(); ++j) d[i][j] = chamfer_distance(dp[i], dg[j]);
  }
  return d;
}

}  // namespace

double polyline_chamfer(const std::vector<Point2>& a, const std::vector<Point2>& b, double spacing) {
  return chamfer_distance(densify_points(a, spacing), densify_points(b, spacing));
}

std::vector<EvalRecord> greedy_match(const std::vector<double>& confidence,
                                     const std::vector<std::vector<double>>& dist, double tau) {
  std::vector<std::size_t> order(confidence.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return confidence[a] > confidence[b]; });
  const std::size_t num_gt = dist.empty() ? 0 : dist.front().size();
  std::vector<char> taken(num_gt, 0);
  std::vector<EvalRecord> out(confidence.size());
  for (std::size_t i : order) {
    EvalRecord& r = out[i];
    r.confidence = confidence[i];
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (std::size_t j = 0; j < num_gt; ++j) {
      if (!taken[j] && dist[i][j] < best) {
        best = dist[i][j];
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best <= tau) {
      taken[static_cast<std::size_t>(best_j)] = 1;
      r.true_positive = true;
      r.matched_gt = best_j;
    }
  }
  return out;
}

double average_precision(std::vector<EvalRecord> records, int num_gt) {
  if (num_gt <= 0) return 0.0;
  std::stable_sort(records.begin(), records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.confidence > b.confidence; });
  const std::size_t n = records.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += records[k].true_positive ? 1.0 : 0.0;
    precision[k] = tp / static_cast<double>(k + 1);
    recall[k] = tp / num_gt;
  }
  // Precision envelope: maximum precision at any recall >= the current one.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

APResult evaluate_tiles(const std::vector<TileEval>& tiles, const std::vector<double>& thresholds,
                        std::vector<TileBreakdown>* breakdown) {
  if (thresholds.empty()) throw Error(ErrorCode::InvalidArgument, "at least one AP threshold is required");
  std::size_t total_gt = 0, total_pred = 0;
  for (const TileEval& t : tiles) {
    total_gt += t.ground_truth.size();
    total_pred += t.predictions.size();
  }
  if (total_gt == 0 && total_pred == 0) throw Error(ErrorCode::NoInstances, "no ground truth and no predictions");

  APResult res;
  res.thresholds = thresholds;
  res.empty_ground_truth = total_gt == 0;
  if (res.empty_ground_truth) std::cerr << "warning: evaluating predictions without ground truth; AP is 0\n";

  struct Prepared {
    std::vector<double> confidence;
    std::vector<std::vector<double>> dist;
    int num_gt = 0;
  };
  std::vector<std::array<Prepared, 2>> prepared(tiles.size());
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    for (int k = 0; k < 2; ++k) {
      const KindSet s = collect(tiles[t], k == 0 ? Kind::Centerline : Kind::Divider);
      prepared[t][k] = {s.confidence, distances(s), static_cast<int>(s.gts.size())};
    }
  }

  for (double tau : thresholds) {
    double ap_kind[2];
    for (int k = 0; k < 2; ++k) {
      std::vector<EvalRecord> pooled;
      int num_gt = 0;
      for (const auto& p : prepared) {
        const auto recs = greedy_match(p[k].confidence, p[k].dist, tau);
        pooled.insert(pooled.end(), recs.begin(), recs.end());
        num_gt += p[k].num_gt;
      }
      ap_kind[k] = average_precision(std::move(pooled), num_gt);
    }
    res.ap_c_tau.push_back(ap_kind[0]);
    res.ap_ld_tau.push_back(ap_kind[1]);
    res.ap_tau.push_back((ap_kind[0] + ap_kind[1]) / 2.0);
  }
  const double nt = static_cast<double>(thresholds.size());
  res.ap_c = std::accumulate(res.ap_c_tau.begin(), res.ap_c_tau.end(), 0.0) / nt;
  res.ap_ld = std::accumulate(res.ap_ld_tau.begin(), res.ap_ld_tau.end(), 0.0) / nt;
  res.ap = (res.ap_c + res.ap_ld) / 2.0;

  if (breakdown) {
    breakdown->clear();
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      TileBreakdown b;
      b.tile_id = tiles[t].tile_id;
      b.num_gt = static_cast<int>(tiles[t].ground_truth.size());
      b.num_pred = static_cast<int>(tiles[t].predictions.size());
      double sum[2] = {0.0, 0.0};
      for (double tau : thresholds) {
        for (int k = 0; k < 2; ++k) {
          sum[k] += average_precision(greedy_match(prepared[t][k].confidence, prepared[t][k].dist, tau),
                                      prepared[t][k].num_gt);
        }
      }
      b.ap_c = sum[0] / nt;
      b.ap_ld = sum[1] / nt;
      b.ap = (b.ap_c + b.ap_ld) / 2.0;
      breakdown->push_back(b);
    }
  }
  return res;
}

APResult evaluate(const std::vector<PredictedLane>& preds, const std::vector<GroundTruthLane>& gts,
                  const std::vector<double>& thresholds) {
  return evaluate_tiles({TileEval{0, preds, gts}}, thresholds);
}

std::string results_to_string(const APResult& r, const std::vector<TileBreakdown>& tiles) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v * 100.0);
    return std::string(buf);
  };
  auto tau_name = [](double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", t);
    return std::string(buf);
  };
  std::string s = "# lanegen results (AP x100)\n";
  s += "AP=" + fmt(r.ap) + "\n";
  s += "AP_c=" + fmt(r.ap_c) + "\n";
  s += "AP_ld=" + fmt(r.ap_ld) + "\n";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    const std::string t = tau_name(r.thresholds[i]);
    s += "AP@" + t + "=" + fmt(r.ap_tau[i]) + "\n";
    s += "AP_c@" + t + "=" + fmt(r.ap_c_tau[i]) + "\n";
    s += "AP_ld@" + t + "=" + fmt(r.ap_ld_tau[i]) + "\n";
  }
  s += "tiles=" + std::to_string(tiles.size()) + "\n";
  s += "\n# per tile\ntile\tnum_gt\tnum_pred\tAP\tAP_c\tAP_ld\n";
  for (const TileBreakdown& b : tiles) {
    s += std::to_string(b.tile_id) + "\t" + std::to_string(b.num_gt) + "\t" + std::to_string(b.num_pred) + "\t" +
         fmt(b.ap) + "\t" + fmt(b.ap_c) + "\t" + fmt(b.ap_ld) + "\n";
  }
  return s;
}

void write_results(const APResult& r, const std::vector<TileBreakdown>& tiles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << results_to_string(r, tiles);
}

}  // namespace lanegen
