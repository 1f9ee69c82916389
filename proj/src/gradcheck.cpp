//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace ringkit::tensor {
namespace {

  struct Probe {
    double loss;
    std::uint64_t kinks;
  };

  Probe evaluate(const LossBuilder &f,
                 const std::vector<Tensor<double>> &params) {
    Tape<double> tape;
    tape.set_track_kinks(true);
    std::vector<Var<double>> leaves;
    leaves.reserve(params.size());
    for (const Tensor<double> &p: params)
      leaves.push_back(tape.parameter(p));
    const Var<double> loss = f(tape, leaves);
    return { loss.value()[0], tape.kink_signature() };
  }

}  // namespace

GradCheckReport grad_check(const LossBuilder &f,
                           std::vector<Tensor<double>> params,
                           const std::vector<std::string> &names,
                           const GradCheckOptions &options) {
  Tape<double> tape;
  tape.set_track_kinks(true);
  std::vector<Var<double>> leaves;
  for (const Tensor<double> &p: params)
    leaves.push_back(tape.parameter(p));
  const Var<double> loss = f(tape, leaves);
  const std::uint64_t base_kinks = tape.kink_signature();
  const Gradients<double> grads = tape.backward(loss);

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamCheck pc;
    pc.name = i < names.size() ? names[i] : "param" + std::to_string(i);
    const bool has_grad = grads.has(leaves[i]);
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double saved = params[i][k];
      params[i][k] = saved + options.eps;
      const Probe plus = evaluate(f, params);
      params[i][k] = saved - options.eps;
      const Probe minus = evaluate(f, params);
      params[i][k] = saved;

      if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
        ++pc.excluded;
        continue;
      }
      const double fd = (plus.loss - minus.loss) / (2.0 * options.eps);
      const double ad = has_grad ? grads[leaves[i]][k] : 0.0;
      const double rel = std::abs(ad - fd)
                         / std::max({ std::abs(ad), std::abs(fd), 1e-8 });
      pc.max_rel_error = std::max(pc.max_rel_error, rel);
      ++pc.checked;
    }
    pc.passed = pc.max_rel_error < options.tol;
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.excluded += pc.excluded;
    report.passed = report.passed && pc.passed;
    report.params.push_back(std::move(pc));
  }
  return report;
}

}  // namespace ringkit::tensor
