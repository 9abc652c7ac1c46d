#pragma once

#include <vector>

#include "lanegen/nn.hpp"

namespace lanegen {

struct OptimizerConfig {
  double lr = 1e-4;
  /// Learning-rate factor of the backbone parameter group.
  double backbone_lr_scale = 0.1;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Linear warmup length in steps.
  int warmup_steps = 0;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 0.0;
};

/// Cosine decay from `base` to 0 at the last step, total_steps - 1, after an
/// optional linear warmup. Steps past the end return 0.
double cosine_lr(double base, int step, int total_steps, int warmup_steps = 0);

/// Adam with decoupled weight decay.
template <typename T>
class AdamW {
 public:
  AdamW(nn::ParameterStore<T>& params, const OptimizerConfig& cfg);

  /// One update with learning rate `lr` (before group scaling). Gradients are
  /// multiplied by `grad_scale` first (e.g. 1/batch). Returns the gradient
  /// norm after scaling and before clipping.
  double step(double lr, double grad_scale = 1.0);
  int steps_taken() const { return t_; }

  /// Moment buffers, in parameter order (for checkpoints).
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_steps_taken(int t) { t_ = t; }

 private:
  nn::ParameterStore<T>& params_;
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int t_ = 0;
};

}  // namespace lanegen
