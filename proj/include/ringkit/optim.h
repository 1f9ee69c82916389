//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_OPTIM_H_
#define RINGKIT_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ringkit/tensor.h"

namespace ringkit::tensor {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept in double regardless of the
/// parameter precision.
template <class T>
class Adam {
public:
  explicit Adam(std::span<const Tensor<T>> params, AdamOptions options = {});

  /// params[i] -= lr * m_hat / (sqrt(v_hat) + eps). Throws ShapeMismatch when
  /// the parameter or gradient list disagrees with the moment shapes.
  void step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads,
            double lr);

  std::int64_t steps() const { return t_; }
  const AdamOptions &options() const { return options_; }

private:
  AdamOptions options_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

/// Number of steps spent increasing the rate: 5% of the cycle, at least 1.
std::int64_t onecycle_warmup_steps(std::int64_t total_steps);

/// One-cycle schedule: linear rise from max_lr/25 at step 0 to max_lr at the
/// end of warmup, then cosine annealing to max_lr/1e4 at total_steps - 1.
/// Throws OutOfRange unless 0 <= step < total_steps.
double onecycle_lr(std::int64_t step, std::int64_t total_steps,
                   double max_lr);

}  // namespace ringkit::tensor

#endif  // RINGKIT_OPTIM_H_
