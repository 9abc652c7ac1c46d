#include "lanegen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_set>

#include <Eigen/Core>

#include "lanegen/error.hpp"

namespace lanegen::ad {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;
template <typename T>
using StridedMap = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
std::shared_ptr<Node<T>> make_node(std::vector<int> shape, std::initializer_list<const Var<T>*> inputs) {
  auto n = std::make_shared<Node<T>>();
  n->value.assign(shape_size(shape), T(0));
  n->shape = std::move(shape);
  if (g_grad_enabled) {
    for (const Var<T>* v : inputs) {
      if (v->requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) {
      for (const Var<T>* v : inputs) n->parents.push_back(v->node());
    }
  }
  return n;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

/// Leading dimensions collapsed into rows, last axis as columns.
template <typename T>
std::pair<int, int> rows_cols(const Var<T>& x) {
  const int cols = x.dim(-1);
  return {static_cast<int>(x.size() / static_cast<std::size_t>(cols)), cols};
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::size_t shape_size(std::span<const int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

template <typename T>
Var<T> Var<T>::constant(std::vector<int> shape, std::vector<T> values) {
  require(shape_size(shape) == values.size(), "constant: value count does not match shape");
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value.assign(values.begin(), values.end());
  return Var(n);
}

template <typename T>
Var<T> Var<T>::constant(std::vector<int> shape, T fill) {
  const std::size_t count = shape_size(shape);
  return constant(std::move(shape), std::vector<T>(count, fill));
}

template <typename T>
Var<T> Var<T>::parameter(std::vector<int> shape, std::vector<T> values) {
  Var v = constant(std::move(shape), std::move(values));
  v.node_->requires_grad = true;
  return v;
}

template <typename T>
void backward(const Var<T>& root) {
  require(root.size() == 1, "backward: root must be a scalar");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.get()->grad_data()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward();
  }
}

// --- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  auto n = make_node<T>(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] + b.value()[i];
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    Node<T>* pb = b.get();
    n->backward = [self, pa, pb] {
      for (Node<T>* p : {pa, pb}) {
        if (!p->requires_grad) continue;
        T* g = p->grad_data();
        for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i];
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  auto n = make_node<T>(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] - b.value()[i];
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    Node<T>* pb = b.get();
    n->backward = [self, pa, pb] {
      if (pa->requires_grad) {
        T* g = pa->grad_data();
        for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i];
      }
      if (pb->requires_grad) {
        T* g = pb->grad_data();
        for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] -= self->grad[i];
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  auto n = make_node<T>(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] * b.value()[i];
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    Node<T>* pb = b.get();
    n->backward = [self, pa, pb] {
      if (pa->requires_grad) {
        T* g = pa->grad_data();
        for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i] * pb->value[i];
      }
      if (pb->requires_grad) {
        T* g = pb->grad_data();
        for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i] * pa->value[i];
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  auto n = make_node<T>(a.shape(), {&a});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] * s;
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    n->backward = [self, pa, s] {
      T* g = pa->grad_data();
      for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i] * s;
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  auto n = make_node<T>(a.shape(), {&a});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = std::max(a.value()[i], T(0));
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    n->backward = [self, pa] {
      T* g = pa->grad_data();
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        if (pa->value[i] > T(0)) g[i] += self->grad[i];
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b) {
  const auto [rows, cols] = rows_cols(x);
  require(b.size() == static_cast<std::size_t>(cols), "add_bias: bias length must equal the last axis");
  auto n = make_node<T>(x.shape(), {&x, &b});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      n->value[i] = x.value()[i] + b.value()[static_cast<std::size_t>(c)];
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    Node<T>* pb = b.get();
    n->backward = [self, px, pb, rows, cols] {
      if (px->requires_grad) {
        T* g = px->grad_data();
        for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i];
      }
      if (pb->requires_grad) {
        T* g = pb->grad_data();
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) g[c] += self->grad[static_cast<std::size_t>(r) * cols + c];
        }
      }
    };
  }
  return Var<T>(n);
}

// --- dense algebra ---------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto [rows, k] = rows_cols(a);
  require(b.rank() == 2 && b.dim(0) == k, "matmul: inner dimensions differ");
  const int cols = b.dim(1);
  std::vector<int> shape = a.shape();
  shape.back() = cols;
  auto n = make_node<T>(shape, {&a, &b});
  MapMat<T>(n->value.data(), rows, cols).noalias() =
      CMapMat<T>(a.value().data(), rows, k) * CMapMat<T>(b.value().data(), k, cols);
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    Node<T>* pb = b.get();
    n->backward = [self, pa, pb, rows, k, cols] {
      CMapMat<T> g(self->grad.data(), rows, cols);
      if (pa->requires_grad) {
        MapMat<T>(pa->grad_data(), rows, k).noalias() += g * CMapMat<T>(pb->value.data(), k, cols).transpose();
      }
      if (pb->requires_grad) {
        MapMat<T>(pb->grad_data(), k, cols).noalias() += CMapMat<T>(pa->value.data(), rows, k).transpose() * g;
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto [rows, k] = rows_cols(x);
  require(w.rank() == 2 && w.dim(0) == k, "linear: weight rows must equal input features");
  const int cols = w.dim(1);
  require(b.size() == static_cast<std::size_t>(cols), "linear: bias length must equal output features");
  std::vector<int> shape = x.shape();
  shape.back() = cols;
  auto n = make_node<T>(shape, {&x, &w, &b});
  MapMat<T> out(n->value.data(), rows, cols);
  out.noalias() = CMapMat<T>(x.value().data(), rows, k) * CMapMat<T>(w.value().data(), k, cols);
  out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().data(), cols);
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    Node<T>* pw = w.get();
    Node<T>* pb = b.get();
    n->backward = [self, px, pw, pb, rows, k, cols] {
      CMapMat<T> g(self->grad.data(), rows, cols);
      if (px->requires_grad) {
        MapMat<T>(px->grad_data(), rows, k).noalias() += g * CMapMat<T>(pw->value.data(), k, cols).transpose();
      }
      if (pw->requires_grad) {
        MapMat<T>(pw->grad_data(), k, cols).noalias() += CMapMat<T>(px->value.data(), rows, k).transpose() * g;
      }
      if (pb->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(pb->grad_data(), cols) += g.colwise().sum();
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const auto [rows, d] = rows_cols(x);
  require(gamma.size() == static_cast<std::size_t>(d) && beta.size() == static_cast<std::size_t>(d),
          "layer_norm: affine parameters must match the last axis");
  auto n = make_node<T>(x.shape(), {&x, &gamma, &beta});
  auto xhat = std::make_shared<Buffer<T>>(x.size());
  auto rstd = std::make_shared<Buffer<T>>(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.value().data() + static_cast<std::size_t>(r) * d;
    T mean = 0;
    for (int c = 0; c < d; ++c) mean += xr[c];
    mean /= d;
    T var = 0;
    for (int c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= d;
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[static_cast<std::size_t>(r)] = rs;
    for (int c = 0; c < d; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * d + c;
      (*xhat)[i] = (xr[c] - mean) * rs;
      n->value[i] = (*xhat)[i] * gamma.value()[static_cast<std::size_t>(c)] + beta.value()[static_cast<std::size_t>(c)];
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    Node<T>* pg = gamma.get();
    Node<T>* pb = beta.get();
    n->backward = [self, px, pg, pb, xhat, rstd, rows, d] {
      std::vector<T> dxhat(static_cast<std::size_t>(d));
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * d;
        T mean_dx = 0, mean_dx_x = 0;
        for (int c = 0; c < d; ++c) {
          const T g = self->grad[base + c];
          dxhat[c] = g * pg->value[c];
          mean_dx += dxhat[c];
          mean_dx_x += dxhat[c] * (*xhat)[base + c];
        }
        mean_dx /= d;
        mean_dx_x /= d;
        if (px->requires_grad) {
          T* gx = px->grad_data() + base;
          for (int c = 0; c < d; ++c) {
            gx[c] += (*rstd)[r] * (dxhat[c] - mean_dx - (*xhat)[base + c] * mean_dx_x);
          }
        }
        if (pg->requires_grad) {
          T* gg = pg->grad_data();
          for (int c = 0; c < d; ++c) gg[c] += self->grad[base + c] * (*xhat)[base + c];
        }
        if (pb->requires_grad) {
          T* gb = pb->grad_data();
          for (int c = 0; c < d; ++c) gb[c] += self->grad[base + c];
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> dropout(const Var<T>& x, double p, std::uint64_t seed) {
  if (p <= 0.0 || !g_grad_enabled) return x;
  auto n = make_node<T>(x.shape(), {&x});
  auto mask = std::make_shared<Buffer<T>>(x.size());
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  const T s = T(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = keep(rng) ? s : T(0);
    n->value[i] = x.value()[i] * (*mask)[i];
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    n->backward = [self, px, mask] {
      T* g = px->grad_data();
      for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i] * (*mask)[i];
    };
  }
  return Var<T>(n);
}

// --- shape -----------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<int> shape) {
  require(shape_size(shape) == x.size(), "reshape: element count changes");
  auto n = make_node<T>(std::move(shape), {&x});
  n->value = x.value();
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    n->backward = [self, px] {
      T* g = px->grad_data();
      for (std::size_t i = 0; i < self->grad.size(); ++i) g[i] += self->grad[i];
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> swap_axes01(const Var<T>& x) {
  require(x.rank() == 3, "swap_axes01: expects rank 3");
  const int A = x.dim(0), B = x.dim(1), C = x.dim(2);
  auto n = make_node<T>({B, A, C}, {&x});
  auto src = [=](int a, int b) { return (static_cast<std::size_t>(a) * B + b) * C; };
  auto dst = [=](int a, int b) { return (static_cast<std::size_t>(b) * A + a) * C; };
  for (int a = 0; a < A; ++a) {
    for (int b = 0; b < B; ++b) std::copy_n(x.value().data() + src(a, b), C, n->value.data() + dst(a, b));
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    n->backward = [self, px, A, B, C, src, dst] {
      T* g = px->grad_data();
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) {
          const T* s = self->grad.data() + dst(a, b);
          T* o = g + src(a, b);
          for (int c = 0; c < C; ++c) o[c] += s[c];
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> mean_axis1(const Var<T>& x) {
  require(x.rank() == 3, "mean_axis1: expects rank 3");
  const int A = x.dim(0), B = x.dim(1), C = x.dim(2);
  auto n = make_node<T>({A, C}, {&x});
  const T inv = T(1) / B;
  for (int a = 0; a < A; ++a) {
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        n->value[static_cast<std::size_t>(a) * C + c] += x.value()[(static_cast<std::size_t>(a) * B + b) * C + c] * inv;
      }
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    n->backward = [self, px, A, B, C, inv] {
      T* g = px->grad_data();
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) {
          for (int c = 0; c < C; ++c) {
            g[(static_cast<std::size_t>(a) * B + b) * C + c] += self->grad[static_cast<std::size_t>(a) * C + c] * inv;
          }
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> outer_add(const Var<T>& a, const Var<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1), "outer_add: expects [N, d] and [M, d]");
  const int N = a.dim(0), M = b.dim(0), d = a.dim(1);
  auto n = make_node<T>({N, M, d}, {&a, &b});
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      T* o = n->value.data() + (static_cast<std::size_t>(i) * M + j) * d;
      const T* ra = a.value().data() + static_cast<std::size_t>(i) * d;
      const T* rb = b.value().data() + static_cast<std::size_t>(j) * d;
      for (int c = 0; c < d; ++c) o[c] = ra[c] + rb[c];
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pa = a.get();
    Node<T>* pb = b.get();
    n->backward = [self, pa, pb, N, M, d] {
      T* ga = pa->requires_grad ? pa->grad_data() : nullptr;
      T* gb = pb->requires_grad ? pb->grad_data() : nullptr;
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < M; ++j) {
          const T* g = self->grad.data() + (static_cast<std::size_t>(i) * M + j) * d;
          for (int c = 0; c < d; ++c) {
            if (ga) ga[static_cast<std::size_t>(i) * d + c] += g[c];
            if (gb) gb[static_cast<std::size_t>(j) * d + c] += g[c];
          }
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const int> indices) {
  require(x.rank() >= 1, "gather_rows: expects at least rank 1");
  const std::size_t row = x.size() / static_cast<std::size_t>(x.dim(0));
  std::vector<int> shape = x.shape();
  shape[0] = static_cast<int>(indices.size());
  auto n = make_node<T>(shape, {&x});
  std::vector<int> idx(indices.begin(), indices.end());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && idx[k] < x.dim(0), "gather_rows: index out of range");
    std::copy_n(x.value().data() + static_cast<std::size_t>(idx[k]) * row, row, n->value.data() + k * row);
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    n->backward = [self, px, idx = std::move(idx), row] {
      T* g = px->grad_data();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const T* s = self->grad.data() + k * row;
        T* o = g + static_cast<std::size_t>(idx[k]) * row;
        for (std::size_t i = 0; i < row; ++i) o[i] += s[i];
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  auto n = make_node<T>({1}, {&x});
  T s = 0;
  for (T v : x.value()) s += v;
  n->value[0] = s;
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    n->backward = [self, px] {
      T* g = px->grad_data();
      for (std::size_t i = 0; i < px->value.size(); ++i) g[i] += self->grad[0];
    };
  }
  return Var<T>(n);
}

// --- attention -------------------------------------------------------------

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads) {
  require(q.rank() == 3 && k.rank() == 3 && v.rank() == 3, "attention: expects rank-3 inputs");
  require_same_shape(k, v, "attention");
  const int B = q.dim(0), Lq = q.dim(1), d = q.dim(2);
  const int Bk = k.dim(0), Lk = k.dim(1);
  require(k.dim(2) == d && (Bk == B || Bk == 1), "attention: key/value batch or width mismatch");
  if (heads <= 0 || d % heads != 0) throw Error(ErrorCode::BadHeadDim, "embedding width is not divisible by heads");
  const int dh = d / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  auto n = make_node<T>({B, Lq, d}, {&q, &k, &v});
  // Attention weights are kept for the backward pass.
  auto probs = std::make_shared<Buffer<T>>(static_cast<std::size_t>(B) * heads * Lq * Lk);
  const Eigen::OuterStride<> stride(d);
  for (int b = 0; b < B; ++b) {
    const int bk = Bk == 1 ? 0 : b;
    for (int h = 0; h < heads; ++h) {
      CStridedMap<T> Q(q.value().data() + static_cast<std::size_t>(b) * Lq * d + h * dh, Lq, dh, stride);
      CStridedMap<T> K(k.value().data() + static_cast<std::size_t>(bk) * Lk * d + h * dh, Lk, dh, stride);
      CStridedMap<T> V(v.value().data() + static_cast<std::size_t>(bk) * Lk * d + h * dh, Lk, dh, stride);
      MapMat<T> P(probs->data() + (static_cast<std::size_t>(b) * heads + h) * Lq * Lk, Lq, Lk);
      P.noalias() = (Q * K.transpose()) * sc;
      for (int r = 0; r < Lq; ++r) {
        const T mx = P.row(r).maxCoeff();
        P.row(r) = (P.row(r).array() - mx).exp();
        P.row(r) /= P.row(r).sum();
      }
      StridedMap<T> O(n->value.data() + static_cast<std::size_t>(b) * Lq * d + h * dh, Lq, dh, stride);
      O.noalias() = P * V;
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pq = q.get();
    Node<T>* pk = k.get();
    Node<T>* pv = v.get();
    n->backward = [=] {
      const Eigen::OuterStride<> st(d);
      Mat<T> dP(Lq, Lk);
      Mat<T> dS(Lq, Lk);
      for (int b = 0; b < B; ++b) {
        const int bk = Bk == 1 ? 0 : b;
        for (int h = 0; h < heads; ++h) {
          const std::size_t qoff = static_cast<std::size_t>(b) * Lq * d + h * dh;
          const std::size_t koff = static_cast<std::size_t>(bk) * Lk * d + h * dh;
          CStridedMap<T> G(self->grad.data() + qoff, Lq, dh, st);
          CStridedMap<T> Q(pq->value.data() + qoff, Lq, dh, st);
          CStridedMap<T> K(pk->value.data() + koff, Lk, dh, st);
          CStridedMap<T> V(pv->value.data() + koff, Lk, dh, st);
          CMapMat<T> P(probs->data() + (static_cast<std::size_t>(b) * heads + h) * Lq * Lk, Lq, Lk);
          if (pv->requires_grad) StridedMap<T>(pv->grad_data() + koff, Lk, dh, st).noalias() += P.transpose() * G;
          dP.noalias() = G * V.transpose();
          for (int r = 0; r < Lq; ++r) {
            const T dot = P.row(r).dot(dP.row(r));
            dS.row(r) = P.row(r).array() * (dP.row(r).array() - dot);
          }
          dS *= sc;
          if (pq->requires_grad) StridedMap<T>(pq->grad_data() + qoff, Lq, dh, st).noalias() += dS * K;
          if (pk->requires_grad) StridedMap<T>(pk->grad_data() + koff, Lk, dh, st).noalias() += dS.transpose() * Q;
        }
      }
    };
  }
  return Var<T>(n);
}

// --- convolution -----------------------------------------------------------

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int padding) {
  require(x.rank() == 3 && w.rank() == 4, "conv2d: expects x [C,H,W] and w [Co,C,k,k]");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Co = w.dim(0), ks = w.dim(2);
  require(w.dim(1) == C && w.dim(3) == ks, "conv2d: weight does not match input channels");
  require(b.size() == static_cast<std::size_t>(Co), "conv2d: bias length must equal output channels");
  const int Ho = (H + 2 * padding - ks) / stride + 1;
  const int Wo = (W + 2 * padding - ks) / stride + 1;
  const int K = C * ks * ks;
  const int P = Ho * Wo;
  auto cols = std::make_shared<Buffer<T>>(static_cast<std::size_t>(K) * P, T(0));
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < ks; ++ky) {
      for (int kx = 0; kx < ks; ++kx) {
        T* row = cols->data() + static_cast<std::size_t>((c * ks + ky) * ks + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= W) continue;
            row[oy * Wo + ox] = x.value()[(static_cast<std::size_t>(c) * H + iy) * W + ix];
          }
        }
      }
    }
  }
  auto n = make_node<T>({Co, Ho, Wo}, {&x, &w, &b});
  MapMat<T> out(n->value.data(), Co, P);
  out.noalias() = CMapMat<T>(w.value().data(), Co, K) * CMapMat<T>(cols->data(), K, P);
  out.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.value().data(), Co);
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* px = x.get();
    Node<T>* pw = w.get();
    Node<T>* pb = b.get();
    n->backward = [=] {
      CMapMat<T> g(self->grad.data(), Co, P);
      if (pw->requires_grad) MapMat<T>(pw->grad_data(), Co, K).noalias() += g * CMapMat<T>(cols->data(), K, P).transpose();
      if (pb->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(pb->grad_data(), Co) += g.rowwise().sum();
      }
      if (px->requires_grad) {
        Mat<T> dcols = CMapMat<T>(pw->value.data(), Co, K).transpose() * g;
        T* gx = px->grad_data();
        for (int c = 0; c < C; ++c) {
          for (int ky = 0; ky < ks; ++ky) {
            for (int kx = 0; kx < ks; ++kx) {
              const T* row = dcols.data() + static_cast<std::size_t>((c * ks + ky) * ks + kx) * P;
              for (int oy = 0; oy < Ho; ++oy) {
                const int iy = oy * stride - padding + ky;
                if (iy < 0 || iy >= H) continue;
                for (int ox = 0; ox < Wo; ++ox) {
                  const int ix = ox * stride - padding + kx;
                  if (ix < 0 || ix >= W) continue;
                  gx[(static_cast<std::size_t>(c) * H + iy) * W + ix] += row[oy * Wo + ox];
                }
              }
            }
          }
        }
      }
    };
  }
  return Var<T>(n);
}

// --- lane outputs and losses -----------------------------------------------

template <typename T>
Var<T> lane_points(const Var<T>& centerline, const Var<T>& offset) {
  require_same_shape(centerline, offset, "lane_points");
  require(centerline.rank() == 3 && centerline.dim(2) == 2, "lane_points: expects [N, M, 2]");
  const int N = centerline.dim(0), M = centerline.dim(1);
  const std::size_t pts = static_cast<std::size_t>(N) * M;
  auto n = make_node<T>({N, M, 6}, {&centerline, &offset});
  for (std::size_t p = 0; p < pts; ++p) {
    for (int a = 0; a < 2; ++a) {
      const T c = centerline.value()[p * 2 + a];
      const T o = offset.value()[p * 2 + a];
      n->value[p * 6 + a] = c;
      n->value[p * 6 + 2 + a] = c + o;
      n->value[p * 6 + 4 + a] = c - o;
    }
  }
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pc = centerline.get();
    Node<T>* po = offset.get();
    n->backward = [self, pc, po, pts] {
      T* gc = pc->requires_grad ? pc->grad_data() : nullptr;
      T* go = po->requires_grad ? po->grad_data() : nullptr;
      for (std::size_t p = 0; p < pts; ++p) {
        for (int a = 0; a < 2; ++a) {
          const T g0 = self->grad[p * 6 + a], gl = self->grad[p * 6 + 2 + a], gr = self->grad[p * 6 + 4 + a];
          if (gc) gc[p * 2 + a] += g0 + gl + gr;
          if (go) go[p * 2 + a] += gl - gr;
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> l1_lane_loss(const Var<T>& pred, std::span<const int> rows, std::span<const T> target) {
  require(pred.rank() == 3, "l1_lane_loss: expects [N, M, C]");
  const int M = pred.dim(1), C = pred.dim(2);
  const std::size_t lane = static_cast<std::size_t>(M) * C;
  require(target.size() == rows.size() * lane, "l1_lane_loss: target size mismatch");
  auto n = make_node<T>({1}, {&pred});
  const T inv = T(1) / M;
  T total = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const T* p = pred.value().data() + static_cast<std::size_t>(rows[k]) * lane;
    const T* t = target.data() + k * lane;
    for (std::size_t i = 0; i < lane; ++i) total += std::abs(p[i] - t[i]) * inv;
  }
  n->value[0] = total;
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pp = pred.get();
    std::vector<int> r(rows.begin(), rows.end());
    std::vector<T> tg(target.begin(), target.end());
    n->backward = [self, pp, r = std::move(r), tg = std::move(tg), lane, inv] {
      T* g = pp->grad_data();
      const T s = self->grad[0] * inv;
      for (std::size_t k = 0; k < r.size(); ++k) {
        const std::size_t base = static_cast<std::size_t>(r[k]) * lane;
        for (std::size_t i = 0; i < lane; ++i) {
          const T diff = pp->value[base + i] - tg[k * lane + i];
          if (diff > 0) g[base + i] += s;
          else if (diff < 0) g[base + i] -= s;
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> direction_lane_loss(const Var<T>& pred, std::span<const int> rows, std::span<const T> target) {
  require(pred.rank() == 3 && pred.dim(2) % 2 == 0 && pred.dim(1) >= 2, "direction_lane_loss: expects [N, M>=2, 2k]");
  const int M = pred.dim(1), C = pred.dim(2), lines = C / 2;
  const std::size_t lane = static_cast<std::size_t>(M) * C;
  require(target.size() == rows.size() * lane, "direction_lane_loss: target size mismatch");
  const T w = T(1) / (static_cast<T>(lines) * (M - 1));
  auto n = make_node<T>({1}, {&pred});
  // Per segment: d(loss)/d(pred segment vector), filled during the forward.
  auto dseg = std::make_shared<Buffer<T>>(rows.size() * lines * (M - 1) * 2, T(0));
  T total = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const T* p = pred.value().data() + static_cast<std::size_t>(rows[k]) * lane;
    const T* t = target.data() + k * lane;
    for (int l = 0; l < lines; ++l) {
      for (int s = 0; s + 1 < M; ++s) {
        const std::size_t i0 = static_cast<std::size_t>(s) * C + 2 * l;
        const std::size_t i1 = i0 + C;
        const T px = p[i1] - p[i0], py = p[i1 + 1] - p[i0 + 1];
        const T tx = t[i1] - t[i0], ty = t[i1 + 1] - t[i0 + 1];
        const T np = std::sqrt(px * px + py * py), nt = std::sqrt(tx * tx + ty * ty);
        if (np <= T(0) || nt <= T(0)) {
          total += w;
          continue;
        }
        const T cosv = (px * tx + py * ty) / (np * nt);
        total += w * (T(1) - cosv);
        T* ds = dseg->data() + ((k * lines + l) * (M - 1) + s) * 2;
        ds[0] = -w * (tx / (np * nt) - cosv * px / (np * np));
        ds[1] = -w * (ty / (np * nt) - cosv * py / (np * np));
      }
    }
  }
  n->value[0] = total;
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pp = pred.get();
    std::vector<int> r(rows.begin(), rows.end());
    n->backward = [self, pp, r = std::move(r), dseg, lane, lines, M, C] {
      T* g = pp->grad_data();
      const T up = self->grad[0];
      for (std::size_t k = 0; k < r.size(); ++k) {
        const std::size_t base = static_cast<std::size_t>(r[k]) * lane;
        for (int l = 0; l < lines; ++l) {
          for (int s = 0; s + 1 < M; ++s) {
            const T* ds = dseg->data() + ((k * lines + l) * (M - 1) + s) * 2;
            const std::size_t i0 = base + static_cast<std::size_t>(s) * C + 2 * l;
            const std::size_t i1 = i0 + C;
            g[i1] += up * ds[0];
            g[i1 + 1] += up * ds[1];
            g[i0] -= up * ds[0];
            g[i0 + 1] -= up * ds[1];
          }
        }
      }
    };
  }
  return Var<T>(n);
}

template <typename T>
Var<T> focal_loss(const Var<T>& logits, const std::vector<bool>& positive, T alpha, T gamma) {
  require(logits.rank() == 2 && logits.dim(1) == 2, "focal_loss: expects [N, 2] logits");
  const int N = logits.dim(0);
  require(positive.size() == static_cast<std::size_t>(N), "focal_loss: one label per row");
  auto n = make_node<T>({1}, {&logits});
  auto dz = std::make_shared<Buffer<T>>(static_cast<std::size_t>(N));
  T total = 0;
  for (int i = 0; i < N; ++i) {
    const T z = logits.value()[2 * i + 1] - logits.value()[2 * i];
    // log p and log(1 - p) for p = sigmoid(z), computed stably.
    const T log_p = -(std::max(-z, T(0)) + std::log1p(std::exp(-std::abs(z))));
    const T log_q = -(std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z))));
    const T p = std::exp(log_p), q = std::exp(log_q);
    if (positive[static_cast<std::size_t>(i)]) {
      total += -alpha * std::pow(q, gamma) * log_p;
      (*dz)[i] = alpha * (gamma * p * std::pow(q, gamma) * log_p - std::pow(q, gamma + 1));
    } else {
      total += -(T(1) - alpha) * std::pow(p, gamma) * log_q;
      (*dz)[i] = (T(1) - alpha) * (-gamma * std::pow(p, gamma) * q * log_q + std::pow(p, gamma + 1));
    }
  }
  n->value[0] = total;
  if (n->requires_grad) {
    Node<T>* self = n.get();
    Node<T>* pl = logits.get();
    n->backward = [self, pl, dz, N] {
      T* g = pl->grad_data();
      for (int i = 0; i < N; ++i) {
        g[2 * i + 1] += self->grad[0] * (*dz)[i];
        g[2 * i] -= self->grad[0] * (*dz)[i];
      }
    };
  }
  return Var<T>(n);
}

// --- gradient check --------------------------------------------------------

double grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                  std::vector<Var<double>> inputs, double eps, double floor) {
  for (auto& in : inputs) {
    require(in.requires_grad(), "grad_check: inputs must be parameters");
    in.grad();
    in.zero_grad();
  }
  backward(f(inputs));
  double worst = 0.0;
  for (auto& in : inputs) {
    const Buffer<double> analytic = in.grad();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double saved = in.value()[i];
      in.value()[i] = saved + eps;
      double fp, fm;
      {
        NoGradGuard guard;
        fp = f(inputs).item();
        in.value()[i] = saved - eps;
        fm = f(inputs).item();
      }
      in.value()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

#define LANEGEN_INSTANTIATE(T)                                                                          \
  template class Var<T>;                                                                                \
  template void backward<T>(const Var<T>&);                                                             \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> scale<T>(const Var<T>&, T);                                                           \
  template Var<T> relu<T>(const Var<T>&);                                                               \
  template Var<T> add_bias<T>(const Var<T>&, const Var<T>&);                                            \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                              \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                               \
  template Var<T> layer_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);                        \
  template Var<T> dropout<T>(const Var<T>&, double, std::uint64_t);                                     \
  template Var<T> reshape<T>(const Var<T>&, std::vector<int>);                                          \
  template Var<T> swap_axes01<T>(const Var<T>&);                                                        \
  template Var<T> mean_axis1<T>(const Var<T>&);                                                         \
  template Var<T> outer_add<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sum<T>(const Var<T>&);                                                                \
  template Var<T> gather_rows<T>(const Var<T>&, std::span<const int>);                                  \
  template Var<T> attention<T>(const Var<T>&, const Var<T>&, const Var<T>&, int);                       \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                     \
  template Var<T> lane_points<T>(const Var<T>&, const Var<T>&);                                         \
  template Var<T> l1_lane_loss<T>(const Var<T>&, std::span<const int>, std::span<const T>);             \
  template Var<T> direction_lane_loss<T>(const Var<T>&, std::span<const int>, std::span<const T>);      \
  template Var<T> focal_loss<T>(const Var<T>&, const std::vector<bool>&, T, T);

LANEGEN_INSTANTIATE(float)
LANEGEN_INSTANTIATE(double)

#undef LANEGEN_INSTANTIATE

}  // namespace lanegen::ad
