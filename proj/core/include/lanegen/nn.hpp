#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lanegen/tensor.hpp"

namespace lanegen::nn {

template <typename T>
using Var = ad::Var<T>;

/// A named trainable tensor. `group` selects the learning-rate group
/// (0 = default, 1 = backbone).
template <typename T>
struct NamedParameter {
  std::string name;
  Var<T> var;
  int group = 0;
  bool decay = true;  ///< weight decay applies (not to biases and norms)
};

/// Ordered parameter registry; the order defines checkpoint layout.
template <typename T>
class ParameterStore {
 public:
  Var<T> add(std::string name, std::vector<int> shape, std::vector<double> init, int group, bool decay);
  const std::vector<NamedParameter<T>>& parameters() const { return params_; }
  std::vector<NamedParameter<T>>& parameters() { return params_; }
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<NamedParameter<T>> params_;
};

/// Truncated normal (|x| <= 2 sigma) samples.
std::vector<double> truncated_normal(std::size_t n, double sigma, std::mt19937_64& rng);
/// He-normal samples for a layer with the given fan-in.
std::vector<double> he_normal(std::size_t n, int fan_in, std::mt19937_64& rng);

template <typename T>
struct Linear {
  Var<T> w;  ///< [in, out]
  Var<T> b;  ///< [out]

  static Linear make(ParameterStore<T>& ps, const std::string& name, int in, int out, std::mt19937_64& rng,
                     int group = 0, double sigma = 0.02);
  Var<T> operator()(const Var<T>& x) const { return ad::linear(x, w, b); }
};

template <typename T>
struct LayerNorm {
  Var<T> gamma;
  Var<T> beta;

  static LayerNorm make(ParameterStore<T>& ps, const std::string& name, int d);
  Var<T> operator()(const Var<T>& x) const { return ad::layer_norm(x, gamma, beta); }
};

/// Two-layer perceptron with ReLU in between.
template <typename T>
struct Mlp {
  Linear<T> fc1;
  Linear<T> fc2;

  static Mlp make(ParameterStore<T>& ps, const std::string& name, int in, int hidden, int out, std::mt19937_64& rng);
  Var<T> operator()(const Var<T>& x) const { return fc2(ad::relu(fc1(x))); }
};

/// Sinusoidal 2-D positional encoding for an h x w grid, row-major,
/// [h*w, d]. The first d/2 channels encode the row, the rest the column.
std::vector<double> positional_encoding_2d(int h, int w, int d);

}  // namespace lanegen::nn
