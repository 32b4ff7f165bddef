#pragma once
// Linear softmax heads and the losses used to train them.

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rci/encoder.hpp"

namespace rci {

// logits = W x + b with W: classes x in, b: 1 x classes.
template <typename T>
struct LinearHead {
  Mat<T> w;
  Mat<T> b;

  static LinearHead zeros(int classes, int in) {
    return LinearHead{Mat<T>::Zero(classes, in), Mat<T>::Zero(1, classes)};
  }
  static LinearHead random(int classes, int in, std::uint64_t seed) {
    auto h = zeros(classes, in);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < h.w.size(); ++i) {
      h.w.data()[i] = static_cast<T>(0.02 * standard_normal(rng));
    }
    return h;
  }

  int classes() const noexcept { return static_cast<int>(w.rows()); }
  int in_width() const noexcept { return static_cast<int>(w.cols()); }

  RowVec<T> logits(const RowVec<T>& x) const {
    return (x * w.transpose()) + b.row(0);
  }

  template <typename U>
  LinearHead<U> cast() const {
    return LinearHead<U>{w.template cast<U>(), b.template cast<U>()};
  }
  void set_zero() {
    w.setZero();
    b.setZero();
  }
  bool all_finite() const { return w.allFinite() && b.allFinite(); }
};

template <typename T>
RowVec<T> softmax(const RowVec<T>& logits) {
  RowVec<T> p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

// Weighted cross-entropy of one example. Returns the loss and accumulates
// dL/dW, dL/db into `grad` and returns dL/dx through `dx` (both scaled by
// `weight`).
template <typename T>
T head_cross_entropy(const LinearHead<T>& head, const RowVec<T>& x, int label, T weight,
                     LinearHead<T>* grad, RowVec<T>* dx) {
  const RowVec<T> p = softmax<T>(head.logits(x));
  const T loss = -std::log(std::max(p(label), std::numeric_limits<T>::min())) * weight;
  if (grad || dx) {
    RowVec<T> dlogits = p;
    dlogits(label) -= T(1);
    dlogits *= weight;
    if (grad) {
      grad->w.noalias() += dlogits.transpose() * x;
      grad->b.row(0) += dlogits;
    }
    if (dx) *dx = dlogits * head.w;
  }
  return loss;
}

// v_qc = [r_q, r_c, r_q * r_c, (r_q - r_c)^2], width 4 d.
template <typename T>
RowVec<T> combination_vector(const RowVec<T>& rq, const RowVec<T>& rc) {
  const Eigen::Index d = rq.size();
  RowVec<T> v(4 * d);
  const RowVec<T> delta = rq - rc;
  v.segment(0, d) = rq;
  v.segment(d, d) = rc;
  v.segment(2 * d, d) = rq.cwiseProduct(rc);
  v.segment(3 * d, d) = delta.cwiseProduct(delta);
  return v;
}

// Chain rule through combination_vector.
template <typename T>
void combination_vector_backward(const RowVec<T>& rq, const RowVec<T>& rc, const RowVec<T>& dv,
                                 RowVec<T>& drq, RowVec<T>& drc) {
  const Eigen::Index d = rq.size();
  const RowVec<T> two_delta = T(2) * (rq - rc);
  const auto dprod = dv.segment(2 * d, d);
  const RowVec<T> dsq = dv.segment(3 * d, d).cwiseProduct(two_delta);
  drq = dv.segment(0, d) + dprod.cwiseProduct(rc) + dsq;
  drc = dv.segment(d, d) + dprod.cwiseProduct(rq) - dsq;
}

}  // namespace rci
