#include "rci/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace rci {

float Adam::current_lr() const noexcept {
  if (config_.warmup_steps <= 0) return config_.lr;
  const long t = std::max<long>(t_, 1);
  return config_.lr * std::min(1.0f, static_cast<float>(t) / config_.warmup_steps);
}

double Adam::step(const std::vector<ParamSlot>& slots) {
  if (m_.empty()) {
    for (const auto& s : slots) {
      m_.push_back(Mat<float>::Zero(s.value->rows(), s.value->cols()));
      v_.push_back(Mat<float>::Zero(s.value->rows(), s.value->cols()));
    }
  }
  double sq = 0.0;
  for (const auto& s : slots) sq += s.grad->template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  float gscale = 1.0f;
  if (config_.clip_norm > 0 && norm > config_.clip_norm) {
    gscale = static_cast<float>(config_.clip_norm / norm);
  }

  ++t_;
  const float lr = current_lr();
  const float b1 = config_.beta1, b2 = config_.beta2;
  const float c1 = 1.0f - static_cast<float>(std::pow(b1, static_cast<double>(t_)));
  const float c2 = 1.0f - static_cast<float>(std::pow(b2, static_cast<double>(t_)));
  const float step_size = lr / c1;
  const float inv_sqrt_c2 = 1.0f / std::sqrt(c2);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    float* w = slots[k].value->data();
    const float* g = slots[k].grad->data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    const Eigen::Index n = slots[k].value->size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const float gi = g[i] * gscale;
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + config_.eps);
    }
  }
  return norm;
}

}  // namespace rci
