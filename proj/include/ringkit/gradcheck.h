//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_GRADCHECK_H_
#define RINGKIT_GRADCHECK_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ringkit/tensor.h"

namespace ringkit::tensor {

/// Builds a scalar loss on the tape from parameter leaves (same order as the
/// tensors handed to grad_check).
using LossBuilder =
    std::function<Var<double>(Tape<double> &, std::span<const Var<double>>)>;

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-5;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +-eps probe crossed a relu/abs kink.
  std::size_t excluded = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  std::size_t excluded = 0;
  bool passed = true;
};

/// Compares reverse-mode gradients against central differences:
/// rel = |ad - fd| / max(|ad|, |fd|, 1e-8).
GradCheckReport grad_check(const LossBuilder &f,
                           std::vector<Tensor<double>> params,
                           const std::vector<std::string> &names,
                           const GradCheckOptions &options = {});

}  // namespace ringkit::tensor

#endif  // RINGKIT_GRADCHECK_H_
