#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <vector>

namespace lanegen::ad {

/// 64-byte aligned storage. Eigen peels vector loops up to the first aligned
/// element, so with malloc's 16-byte alignment the summation order (and the
/// float result) would depend on where a buffer happens to land.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <typename T>
bool operator==(const Buffer<T>& a, const std::vector<T>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

/// A node in the reverse-mode graph. Values and gradients are dense and
/// row-major; `backward` reads this node's gradient and accumulates into the
/// gradients of its parents.
template <typename T>
struct Node {
  std::vector<int> shape;
  Buffer<T> value;
  Buffer<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;

  std::size_t size() const { return value.size(); }
  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

/// Handle to a graph node. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Var constant(std::vector<int> shape, std::vector<T> values);
  static Var constant(std::vector<int> shape, T fill = T(0));
  static Var parameter(std::vector<int> shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i < 0 ? i + rank() : i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t size() const { return node_->value.size(); }
  Buffer<T>& value() { return node_->value; }
  const Buffer<T>& value() const { return node_->value; }
  /// Gradient buffer, allocated (zero) on first access.
  Buffer<T>& grad() {
    node_->grad_data();
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  T item() const { return node_->value.at(0); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }
  Node<T>* get() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// While alive on a thread, new operations record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

/// Seeds d(root)/d(root) = 1 (root must hold one value) and propagates.
template <typename T>
void backward(const Var<T>& root);

std::size_t shape_size(std::span<const int> shape);

// Elementwise, same shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> relu(const Var<T>& a);
/// Adds a vector along the last axis.
template <typename T> Var<T> add_bias(const Var<T>& x, const Var<T>& b);

/// [..., k] x [k, n] -> [..., n]
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// x W + b with W stored as [in, out].
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
/// Normalizes over the last axis.
template <typename T> Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));
/// Inverted dropout; identity when p == 0 or gradients are disabled.
template <typename T> Var<T> dropout(const Var<T>& x, double p, std::uint64_t seed);

template <typename T> Var<T> reshape(const Var<T>& x, std::vector<int> shape);
/// [A, B, C] -> [B, A, C]
template <typename T> Var<T> swap_axes01(const Var<T>& x);
/// [A, B, C] -> [A, C], mean over B.
template <typename T> Var<T> mean_axis1(const Var<T>& x);
/// a [N, d], b [M, d] -> [N, M, d] with out[n][m] = a[n] + b[m].
template <typename T> Var<T> outer_add(const Var<T>& a, const Var<T>& b);
/// Rows of the leading axis picked by index: [R, ...] -> [indices.size(), ...].
template <typename T> Var<T> gather_rows(const Var<T>& x, std::span<const int> indices);
/// Sum of all entries as a one-element tensor.
template <typename T> Var<T> sum(const Var<T>& x);

/// Multi-head scaled dot-product attention.
/// q [B, Lq, d]; k, v [Bk, Lk, d] with Bk == B or Bk == 1 (shared memory).
template <typename T> Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads);

/// x [C, H, W], w [Co, C, k, k], b [Co] -> [Co, Ho, Wo].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int padding);

/// Lane points [N, M, 6] = (c, c + o, c - o) from centerlines and offsets [N, M, 2].
template <typename T> Var<T> lane_points(const Var<T>& centerline, const Var<T>& offset);

/// Sum over the prediction rows `rows` of the per-lane point loss
/// (1/M) sum_m sum_coords |pred - target|. pred [N, M, C]; target holds
/// rows.size() lanes of M*C values.
template <typename T>
Var<T> l1_lane_loss(const Var<T>& pred, std::span<const int> rows, std::span<const T> target);

/// Sum over matched lanes of the mean (1 - cos) between consecutive-point
/// directions, averaged over the C/2 polylines and M-1 segments. A
/// zero-length segment costs 1 and passes no gradient.
template <typename T>
Var<T> direction_lane_loss(const Var<T>& pred, std::span<const int> rows, std::span<const T> target);

/// Focal loss summed over rows of two-class logits [N, 2]; class 1 is
/// "object". positive[i] marks rows assigned to an object.
template <typename T>
Var<T> focal_loss(const Var<T>& logits, const std::vector<bool>& positive, T alpha, T gamma);

/// Central finite-difference check of d f / d inputs. Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, floor) over all inputs.
double grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                  std::vector<Var<double>> inputs, double eps = 1e-6, double floor = 1e-3);

}  // namespace lanegen::ad
