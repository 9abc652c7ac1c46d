#include "lanegen/nn.hpp"

#include <cmath>

#include "lanegen/error.hpp"

namespace lanegen::nn {

template <typename T>
Var<T> ParameterStore<T>::add(std::string name, std::vector<int> shape, std::vector<double> init, int group,
                              bool decay) {
  std::vector<T> values(init.begin(), init.end());
  Var<T> v = Var<T>::parameter(std::move(shape), std::move(values));
  params_.push_back({std::move(name), v, group, decay});
  return v;
}

template <typename T>
std::size_t ParameterStore<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::vector<double> truncated_normal(std::size_t n, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<double> out(n);
  for (double& v : out) {
    do {
      v = gauss(rng);
    } while (std::abs(v) > 2.0 * sigma);
  }
  return out;
}

std::vector<double> he_normal(std::size_t n, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / fan_in));
  std::vector<double> out(n);
  for (double& v : out) v = gauss(rng);
  return out;
}

template <typename T>
Linear<T> Linear<T>::make(ParameterStore<T>& ps, const std::string& name, int in, int out, std::mt19937_64& rng,
                          int group, double sigma) {
  const std::size_t n = static_cast<std::size_t>(in) * out;
  Linear l;
  l.w = ps.add(name + ".w", {in, out}, truncated_normal(n, sigma, rng), group, true);
  l.b = ps.add(name + ".b", {out}, std::vector<double>(static_cast<std::size_t>(out), 0.0), group, false);
  return l;
}

template <typename T>
LayerNorm<T> LayerNorm<T>::make(ParameterStore<T>& ps, const std::string& name, int d) {
  LayerNorm ln;
  ln.gamma = ps.add(name + ".gamma", {d}, std::vector<double>(static_cast<std::size_t>(d), 1.0), 0, false);
  ln.beta = ps.add(name + ".beta", {d}, std::vector<double>(static_cast<std::size_t>(d), 0.0), 0, false);
  return ln;
}

template <typename T>
Mlp<T> Mlp<T>::make(ParameterStore<T>& ps, const std::string& name, int in, int hidden, int out,
                    std::mt19937_64& rng) {
  Mlp m;
  m.fc1 = Linear<T>::make(ps, name + ".fc1", in, hidden, rng, 0, std::sqrt(2.0 / in));
  m.fc2 = Linear<T>::make(ps, name + ".fc2", hidden, out, rng);
  return m;
}

std::vector<double> positional_encoding_2d(int h, int w, int d) {
  if (d % 4 != 0) throw Error(ErrorCode::BadHeadDim, "positional encoding needs a width divisible by 4");
  const int half = d / 2;
  std::vector<double> pe(static_cast<std::size_t>(h) * w * d);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double* row = pe.data() + (static_cast<std::size_t>(r) * w + c) * d;
      for (int i = 0; i < half / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / half);
        row[2 * i] = std::sin(r * freq);
        row[2 * i + 1] = std::cos(r * freq);
        row[half + 2 * i] = std::sin(c * freq);
        row[half + 2 * i + 1] = std::cos(c * freq);
      }
    }
  }
  return pe;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Mlp<float>;
template struct Mlp<double>;

}  // namespace lanegen::nn
