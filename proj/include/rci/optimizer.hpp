#pragma once

#include <vector>

#include "rci/encoder.hpp"

namespace rci {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  int warmup_steps = 100;
  // Global gradient-norm clip; <= 0 disables.
  float clip_norm = 1.0f;
};

struct ParamSlot {
  Mat<float>* value;
  Mat<float>* grad;
};

// Adam with linear warmup. Moment buffers are bound to slot positions, so the
// same slot order must be passed on every step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Returns the pre-clip global gradient norm.
  double step(const std::vector<ParamSlot>& slots);
  long steps() const noexcept { return t_; }
  float current_lr() const noexcept;

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<Mat<float>> m_, v_;
};

}  // namespace rci
