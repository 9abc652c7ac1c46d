#include <gtest/gtest.h>

#include <random>

#include "lanegen/error.hpp"
#include "lanegen/tensor.hpp"

using namespace lanegen;
using ad::Var;
using V = Var<double>;
using Inputs = std::vector<V>;

namespace {

V random_param(std::vector<int> shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = n(rng);
  return V::parameter(std::move(shape), std::move(v));
}

/// Reduces any tensor to a scalar with fixed random weights so every output
/// entry influences the checked value differently.
V weighted_sum(const V& x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> w(x.size());
  for (double& v : w) v = u(rng);
  return ad::sum(ad::mul(x, V::constant(x.shape(), std::move(w))));
}

}  // namespace

TEST(Tensor, ForwardValues) {
  const V a = V::constant({2, 2}, {1, 2, 3, 4});
  const V b = V::constant({2, 2}, {5, 6, 7, 8});
  EXPECT_EQ(ad::matmul(a, b).value(), (std::vector<double>{19, 22, 43, 50}));
  EXPECT_EQ(ad::swap_axes01(ad::reshape(a, {2, 2, 1})).value(), (std::vector<double>{1, 3, 2, 4}));
  EXPECT_EQ(ad::sum(a).item(), 10.0);
  const V o = ad::outer_add(V::constant({2, 1}, {1, 2}), V::constant({3, 1}, {10, 20, 30}));
  EXPECT_EQ(o.value(), (std::vector<double>{11, 21, 31, 12, 22, 32}));
  const V lp = ad::lane_points(V::constant({1, 1, 2}, {1, 2}), V::constant({1, 1, 2}, {0.5, -1}));
  EXPECT_EQ(lp.value(), (std::vector<double>{1, 2, 1.5, 1, 0.5, 3}));
}

TEST(Tensor, BackwardAccumulatesThroughSharedInputs) {
  V x = V::parameter({1}, {3.0});
  const V y = ad::mul(x, x);  // x^2
  ad::backward(ad::add(y, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(GradCheck, Linear) {
  const double err = ad::grad_check(
      [](const Inputs& in) { return weighted_sum(ad::linear(in[0], in[1], in[2])); },
      {random_param({3, 5}, 1), random_param({5, 4}, 2), random_param({4}, 3)});
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, Conv2d) {
  for (int stride : {1, 2}) {
    const double err = ad::grad_check(
        [stride](const Inputs& in) { return weighted_sum(ad::conv2d(in[0], in[1], in[2], stride, 1)); },
        {random_param({2, 6, 6}, 4), random_param({3, 2, 3, 3}, 5, 0.5), random_param({3}, 6)});
    EXPECT_LT(err, 1e-6) << "stride " << stride;
  }
}

TEST(GradCheck, Attention) {
  const double self = ad::grad_check(
      [](const Inputs& in) { return weighted_sum(ad::attention(in[0], in[1], in[2], 2)); },
      {random_param({2, 3, 4}, 7), random_param({2, 5, 4}, 8), random_param({2, 5, 4}, 9)});
  EXPECT_LT(self, 1e-4);
  const double shared = ad::grad_check(
      [](const Inputs& in) { return weighted_sum(ad::attention(in[0], in[1], in[2], 2)); },
      {random_param({3, 2, 4}, 10), random_param({1, 6, 4}, 11), random_param({1, 6, 4}, 12)});
  EXPECT_LT(shared, 1e-4);
}

TEST(GradCheck, LayerNormAndElementwise) {
  const double err = ad::grad_check(
      [](const Inputs& in) {
        const V h = ad::layer_norm(in[0], in[1], in[2]);
        return weighted_sum(ad::relu(ad::add_bias(ad::scale(h, 1.7), in[2])));
      },
      {random_param({4, 6}, 13), random_param({6}, 14), random_param({6}, 15)});
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, ShapeOps) {
  const std::vector<int> rows{2, 0, 2};
  const double err = ad::grad_check(
      [&rows](const Inputs& in) {
        const V q = ad::outer_add(ad::gather_rows(in[0], rows), in[1]);  // [3, 4, 2]
        const V m = ad::mean_axis1(ad::swap_axes01(q));                   // [4, 2]
        return weighted_sum(ad::reshape(m, {8}));
      },
      {random_param({3, 2}, 16), random_param({4, 2}, 17)});
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, LaneLosses) {
  const std::vector<int> rows{1, 0};
  std::vector<double> target(2 * 4 * 6);
  std::mt19937_64 rng(18);
  std::normal_distribution<double> n(0, 2);
  for (double& t : target) t = n(rng);
  const double l1 = ad::grad_check(
      [&](const Inputs& in) {
        return ad::l1_lane_loss<double>(ad::lane_points(in[0], in[1]), rows, target);
      },
      {random_param({3, 4, 2}, 19, 2.0), random_param({3, 4, 2}, 20)}, 1e-4);
  // Piecewise linear, so a wider step is exact away from kinks and keeps
  // cancellation error out of the small per-coordinate gradients.
  EXPECT_LT(l1, 1e-6);
  const double dir = ad::grad_check(
      [&](const Inputs& in) {
        return ad::direction_lane_loss<double>(ad::lane_points(in[0], in[1]), rows, target);
      },
      {random_param({3, 4, 2}, 21, 2.0), random_param({3, 4, 2}, 22)});
  EXPECT_LT(dir, 1e-6);
  const double focal = ad::grad_check(
      [](const Inputs& in) { return ad::focal_loss(in[0], {true, false, false, true}, 0.25, 2.0); },
      {random_param({4, 2}, 23)});
  EXPECT_LT(focal, 1e-6);
}

TEST(Tensor, AttentionHeadsMustDivide) {
  const V x = V::constant({1, 2, 6}, 1.0);
  try {
    ad::attention(x, x, x, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadHeadDim);
  }
}

TEST(Tensor, NoGradRecordsNothing) {
  V x = V::parameter({2}, {1, 2});
  ad::NoGradGuard guard;
  const V y = ad::scale(x, 2.0);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(y.value(), (std::vector<double>{2, 4}));
}

TEST(Tensor, DropoutIdentityWithoutGrad) {
  const V x = V::parameter({4}, {1, 2, 3, 4});
  {
    ad::NoGradGuard guard;
    EXPECT_EQ(ad::dropout(x, 0.5, 1).value(), x.value());
  }
  EXPECT_EQ(ad::dropout(x, 0.0, 1).value(), x.value());
  EXPECT_EQ(ad::dropout(x, 0.5, 7).value(), ad::dropout(x, 0.5, 7).value());
}
