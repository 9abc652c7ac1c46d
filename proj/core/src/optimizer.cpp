#include "lanegen/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace lanegen {

double cosine_lr(double base, int step, int total_steps, int warmup_steps) {
  if (total_steps <= 0 || step >= total_steps) return 0.0;
  if (warmup_steps > 0 && step < warmup_steps) return base * (step + 1) / static_cast<double>(warmup_steps);
  const double span = static_cast<double>(total_steps - 1 - warmup_steps);
  if (span <= 0.0) return base;
  const double progress = (step - warmup_steps) / span;
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
AdamW<T>::AdamW(nn::ParameterStore<T>& params, const OptimizerConfig& cfg) : params_(params), cfg_(cfg) {
  for (const auto& p : params_.parameters()) {
    m_.emplace_back(p.var.size(), 0.0);
    v_.emplace_back(p.var.size(), 0.0);
  }
}

template <typename T>
double AdamW<T>::step(double lr, double grad_scale) {
  auto& ps = params_.parameters();
  double sq = 0.0;
  for (auto& p : ps) {
    for (T g : p.var.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq) * grad_scale;
  double scale = grad_scale;
  if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) scale *= cfg_.grad_clip / norm;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& p = ps[k];
    const double group_lr = p.group == 1 ? lr * cfg_.backbone_lr_scale : lr;
    auto& value = p.var.value();
    const auto& grad = p.var.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * scale;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      double x = value[i];
      if (p.decay) x -= group_lr * cfg_.weight_decay * x;
      x -= group_lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      value[i] = static_cast<T>(x);
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace lanegen
