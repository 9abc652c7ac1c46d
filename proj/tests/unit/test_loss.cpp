#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lanegen/loss.hpp"

using namespace lanegen;
using ad::Var;

namespace {

/// Prediction with N lanes of M points from centerlines, offsets and logits.
LanePrediction<double> prediction(int n, int m, std::vector<double> c, std::vector<double> o, std::vector<double> logits) {
  LanePrediction<double> p;
  p.centerline = Var<double>::parameter({n, m, 2}, std::move(c));
  p.offset = Var<double>::parameter({n, m, 2}, std::move(o));
  p.logits = Var<double>::parameter({n, 2}, std::move(logits));
  p.points = ad::lane_points(p.centerline, p.offset);
  return p;
}

/// A straight eastbound lane through y = `y` with M points and width 3.5,
/// as (centerline, offset) and its (c, l, r) target.
struct Lane {
  std::vector<double> c, o, target;
};

Lane lane(int m, double y, double x0 = -10) {
  Lane l;
  for (int i = 0; i < m; ++i) {
    const double x = x0 + 2.0 * i;
    l.c.insert(l.c.end(), {x, y});
    l.o.insert(l.o.end(), {0.0, 1.75});
    l.target.insert(l.target.end(), {x, y, x, y + 1.75, x, y - 1.75});
  }
  return l;
}

std::vector<double> concat(const std::vector<std::vector<double>>& parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST(LossClass, PerfectOneHotIsNearZero) {
  const Lane a = lane(4, 0);
  const auto p = prediction(2, 4, concat({a.c, a.c}), concat({a.o, a.o}), {-20, 20, 20, -20});
  const GroupLoss<double> g = group_loss(p, {a.target}, LossWeights{});
  EXPECT_LT(g.cls.item(), 1e-6);
  EXPECT_LT(g.point.item(), 1e-12);
  EXPECT_LT(g.dir.item(), 1e-12);
}

TEST(LossClass, UniformLogitsClosedForm) {
  // 50 rows at p = 0.5, one matched: 0.25*0.25*ln2 + 49 * 0.75*0.25*ln2
  // = 9.25 ln 2, divided by max(1, matched) = 1.
  const int n = 50;
  const Lane a = lane(2, 0);
  std::vector<double> c, o;
  for (int i = 0; i < n; ++i) {
    c.insert(c.end(), a.c.begin(), a.c.end());
    o.insert(o.end(), a.o.begin(), a.o.end());
  }
  const auto p = prediction(n, 2, c, o, std::vector<double>(2 * n, 0.0));
  Assignment as;
  as.num_targets = 1;
  as.slot.resize(n);
  for (int i = 0; i < n; ++i) as.slot[static_cast<std::size_t>(i)] = i;  // row 0 takes target 0
  const Var<double> l = loss_class(p, as, LossWeights{});
  EXPECT_NEAR(l.item(), 9.25 * std::log(2.0), 1e-12);
}

TEST(LossClass, FocalDegeneratesToHalfCrossEntropy) {
  LossWeights w;
  w.alpha = 0.5;
  w.gamma = 0.0;
  const Lane a = lane(2, 0);
  const auto p = prediction(2, 2, concat({a.c, a.c}), concat({a.o, a.o}), {0.3, 1.1, -0.4, 0.9});
  Assignment as;
  as.num_targets = 1;
  as.slot = {0, 1};
  // Row 0 positive: -log softmax[1]; row 1 negative: -log softmax[0].
  const double ce0 = -std::log(1.0 / (1.0 + std::exp(0.3 - 1.1)));
  const double ce1 = -std::log(1.0 / (1.0 + std::exp(0.9 - -0.4)));
  EXPECT_NEAR(loss_class(p, as, w).item(), 0.5 * (ce0 + ce1), 1e-12);
}

TEST(LossPoint, ConstantHalfMeterOffsetGivesThree) {
  const Lane a = lane(5, 0), b = lane(5, 8);
  std::vector<double> c = concat({a.c, b.c});
  for (double& v : c) v += 0.5;
  const auto p = prediction(2, 5, c, concat({a.o, b.o}), {0, 0, 0, 0});
  const GroupLoss<double> g = group_loss(p, {a.target, b.target}, LossWeights{});
  EXPECT_EQ(g.assignment.matched_count(), 2);
  EXPECT_NEAR(g.point.item(), 3.0, 1e-12);
}

TEST(LossPoint, UnmatchedPredictionsDoNotCount) {
  const Lane a = lane(3, 0);
  Assignment as;
  as.num_targets = 1;
  as.slot = {1, 0};  // only row 1 is matched
  std::vector<double> c0 = a.c;
  auto p = prediction(2, 3, concat({c0, a.c}), concat({a.o, a.o}), {0, 0, 0, 0});
  const double base = loss_point(p, as, {a.target}).item();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 10);
  for (double& v : c0) v += n(rng);
  p = prediction(2, 3, concat({c0, a.c}), concat({a.o, a.o}), {0, 0, 0, 0});
  EXPECT_EQ(loss_point(p, as, {a.target}).item(), base);
  EXPECT_EQ(base, 0.0);
}

TEST(LossDir, ReversedAndRotated) {
  const Lane a = lane(4, 0);
  Assignment as;
  as.num_targets = 1;
  as.slot = {0};
  // Reversed: points in opposite order (offsets flip sign to keep sides).
  std::vector<double> rc, ro;
  for (int i = 3; i >= 0; --i) {
    rc.insert(rc.end(), {a.c[static_cast<std::size_t>(2 * i)], 0.0});
    ro.insert(ro.end(), {0.0, -1.75});
  }
  EXPECT_NEAR(loss_dir(prediction(1, 4, rc, ro, {0, 0}), as, {a.target}).item(), 2.0, 1e-12);
  // Rotated 90 degrees: northbound at x = 0.
  std::vector<double> nc, no;
  for (int i = 0; i < 4; ++i) {
    nc.insert(nc.end(), {0.0, -10 + 2.0 * i});
    no.insert(no.end(), {-1.75, 0.0});
  }
  EXPECT_NEAR(loss_dir(prediction(1, 4, nc, no, {0, 0}), as, {a.target}).item(), 1.0, 1e-12);
  EXPECT_NEAR(loss_dir(prediction(1, 4, a.c, a.o, {0, 0}), as, {a.target}).item(), 0.0, 1e-12);
}

namespace {

ForwardOutput<double> random_output(int layers, int n, int m, std::uint64_t seed, bool o2m_same_as_o2o = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 5);
  auto random_pred = [&](int rows) {
    std::vector<double> c(static_cast<std::size_t>(rows * m * 2)), o(c.size()), l(static_cast<std::size_t>(rows * 2));
    for (double& v : c) v = g(rng);
    for (double& v : o) v = 0.3 * g(rng);
    for (double& v : l) v = 0.5 * g(rng);
    return prediction(rows, m, c, o, l);
  };
  ForwardOutput<double> out;
  for (int i = 0; i < layers; ++i) out.o2o_layers.push_back(random_pred(n));
  out.o2m.push_back(o2m_same_as_o2o ? out.o2o_layers.back() : random_pred(3 * n));
  return out;
}

}  // namespace

TEST(LossTotal, ReportIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    LossWeights w;
    w.cls = u(rng);
    w.point = u(rng);
    w.dir = u(rng);
    w.o2o = u(rng);
    w.o2m = u(rng);
    w.aux = u(rng);
    const auto out = random_output(3, 6, 4, 100 + trial);
    const std::vector<std::vector<double>> targets{lane(4, 0).target, lane(4, 6).target};
    LossReport r;
    const double total = loss_total(out, targets, w, &r).item();
    EXPECT_NEAR(r.total, total, 1e-12);
    EXPECT_NEAR(r.o2o, w.cls * r.cls + w.point * r.point + w.dir * r.dir, 1e-6);
    EXPECT_NEAR(r.total, w.o2o * r.o2o + w.o2m * r.o2m + w.aux * r.aux, 1e-6);
  }
}

TEST(LossTotal, ZeroWhenPerfectAndLinearInWeights) {
  const Lane a = lane(4, 0);
  ForwardOutput<double> out;
  out.o2o_layers.push_back(prediction(1, 4, a.c, a.o, {-30, 30}));
  LossReport r;
  EXPECT_LT(loss_total(out, {a.target}, LossWeights{}, &r).item(), 1e-6);

  const auto rnd = random_output(2, 5, 4, 77);
  const std::vector<std::vector<double>> targets{lane(4, 0).target};
  LossWeights w;
  LossReport r1, r2;
  const double t1 = loss_total(rnd, targets, w, &r1).item();
  w.o2m *= 2;
  const double t2 = loss_total(rnd, targets, w, &r2).item();
  EXPECT_NEAR(t2 - t1, r1.o2m, 1e-9);
}

TEST(LossTotal, OneToManyWithReplicationOneEqualsOneToOne) {
  const auto out = random_output(1, 5, 4, 31, true);
  LossWeights w;
  w.o2m_replication = 1;
  LossReport r;
  loss_total(out, {lane(4, 0).target, lane(4, 5).target}, w, &r);
  EXPECT_NEAR(r.o2m, r.o2o, 1e-6);
}
