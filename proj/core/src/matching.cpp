#include "lanegen/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lanegen/error.hpp"

namespace lanegen {

int Assignment::matched_count() const {
  int n = 0;
  for (int s : slot) n += s < num_targets ? 1 : 0;
  return n;
}

std::vector<std::pair<int, int>> Assignment::pairs() const {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < slot.size(); ++i) {
    if (slot[i] < num_targets) out.emplace_back(static_cast<int>(i), slot[i]);
  }
  return out;
}

std::vector<int> hungarian(const CostMatrix& cost) {
  const int n = cost.n;
  for (double v : cost.values) {
    if (std::isnan(v)) throw Error(ErrorCode::BadCost, "cost matrix contains NaN");
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "cost matrix contains an infinite entry");
  }
  if (n == 0) return {};
  // 1-based arrays; column 0 is a virtual start column.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

double assignment_cost(const CostMatrix& cost, std::span<const int> cols) {
  double s = 0.0;
  for (std::size_t r = 0; r < cols.size(); ++r) s += cost(static_cast<int>(r), cols[r]);
  return s;
}

std::vector<double> lane_target(const GroundTruthLane& lane) {
  const std::size_t m = lane.centerline.size();
  if (lane.left.size() != m || lane.right.size() != m) {
    throw Error(ErrorCode::InvalidArgument, "lane polylines must have equal point counts");
  }
  std::vector<double> t;
  t.reserve(m * 6);
  for (std::size_t i = 0; i < m; ++i) {
    t.insert(t.end(), {lane.centerline[i].x, lane.centerline[i].y, lane.left[i].x, lane.left[i].y,
                       lane.right[i].x, lane.right[i].y});
  }
  return t;
}

double focal_object_cost(double p, double alpha, double gamma) {
  constexpr double eps = 1e-12;
  return alpha * std::pow(1.0 - p, gamma) * -std::log(std::max(p, eps));
}

double focal_empty_cost(double p, double alpha, double gamma) {
  constexpr double eps = 1e-12;
  return (1.0 - alpha) * std::pow(p, gamma) * -std::log(std::max(1.0 - p, eps));
}

CostMatrix match_cost(std::span<const double> points, std::span<const double> probs, int num_points,
                      const std::vector<std::vector<double>>& targets, const MatchWeights& w) {
  const int N = static_cast<int>(probs.size());
  const int G = static_cast<int>(targets.size());
  const std::size_t lane = static_cast<std::size_t>(num_points) * 6;
  if (points.size() != static_cast<std::size_t>(N) * lane) {
    throw Error(ErrorCode::InvalidArgument, "prediction points do not match N x M x 6");
  }
  for (const auto& t : targets) {
    if (t.size() != lane) throw Error(ErrorCode::InvalidArgument, "target lane has the wrong point count");
  }
  const int S = std::max(N, G);
  CostMatrix c(S);
  for (int i = 0; i < N; ++i) {
    const double p = probs[static_cast<std::size_t>(i)];
    const double obj = w.cls * focal_object_cost(p, w.alpha, w.gamma);
    const double empty = w.cls * focal_empty_cost(p, w.alpha, w.gamma);
    const double* pp = points.data() + static_cast<std::size_t>(i) * lane;
    for (int j = 0; j < G; ++j) {
      const double* tt = targets[static_cast<std::size_t>(j)].data();
      double l1 = 0.0;
      for (std::size_t k = 0; k < lane; ++k) l1 += std::abs(pp[k] - tt[k]);
      c(i, j) = w.point * l1 / static_cast<double>(lane) + obj;
    }
    for (int j = G; j < S; ++j) c(i, j) = empty;
  }
  return c;
}

Assignment match(std::span<const double> points, std::span<const double> probs, int num_points,
                 const std::vector<std::vector<double>>& targets, const MatchWeights& w) {
  const CostMatrix c = match_cost(points, probs, num_points, targets, w);
  const std::vector<int> cols = hungarian(c);
  Assignment a;
  a.num_targets = static_cast<int>(targets.size());
  a.slot.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(probs.size()));
  a.cost = assignment_cost(c, cols);
  return a;
}

}  // namespace lanegen
