//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/optim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ringkit/error.h"

namespace ringkit::tensor {

template <class T>
Adam<T>::Adam(std::span<const Tensor<T>> params, AdamOptions options)
    : options_(options) {
  for (const Tensor<T> &p: params) {
    shapes_.push_back(p.shape());
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

template <class T>
void Adam<T>::step(std::span<Tensor<T>> params,
                   std::span<const Tensor<T>> grads, double lr) {
  if (params.size() != shapes_.size() || grads.size() != shapes_.size())
    throw Error(ErrorCode::kShapeMismatch,
                "adam: expected " + std::to_string(shapes_.size())
                    + " parameters, got " + std::to_string(params.size())
                    + " and " + std::to_string(grads.size())
                    + " gradients");
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    if (params[i].shape() != shapes_[i] || grads[i].shape() != shapes_[i])
      throw Error(ErrorCode::kShapeMismatch,
                  "adam: parameter " + std::to_string(i) + " has shape "
                      + shape_string(params[i].shape()) + ", gradient "
                      + shape_string(grads[i].shape()) + ", state "
                      + shape_string(shapes_[i]));
  }

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    T *p = params[i].data();
    const T *g = grads[i].data();
    std::vector<double> &m = m_[i], &v = v_[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double m_hat = m[k] / c1, v_hat = v[k] / c2;
      p[k] = static_cast<T>(static_cast<double>(p[k])
                            - lr * m_hat / (std::sqrt(v_hat) + options_.eps));
    }
  }
}

std::int64_t onecycle_warmup_steps(std::int64_t total_steps) {
  return std::max<std::int64_t>(
      1, std::llround(0.05 * static_cast<double>(total_steps)));
}

double onecycle_lr(std::int64_t step, std::int64_t total_steps,
                   double max_lr) {
  if (total_steps <= 0 || step < 0 || step >= total_steps)
    throw Error(ErrorCode::kOutOfRange,
                "step " + std::to_string(step) + " outside [0, "
                    + std::to_string(total_steps) + ")");
  const double initial = max_lr / 25.0, final_lr = max_lr / 1e4;
  const std::int64_t warm = onecycle_warmup_steps(total_steps);
  if (step < warm)
    return initial
           + (max_lr - initial) * static_cast<double>(step)
                 / static_cast<double>(warm);
  const std::int64_t span = total_steps - 1 - warm;
  if (span <= 0)
    return max_lr;
  const double frac =
      static_cast<double>(step - warm) / static_cast<double>(span);
  return final_lr
         + (max_lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

template class Adam<float>;
template class Adam<double>;

}  // namespace ringkit::tensor
