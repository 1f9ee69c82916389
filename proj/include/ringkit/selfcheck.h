//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_SELFCHECK_H_
#define RINGKIT_SELFCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ringkit::selfcheck {

struct CheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t excluded = 0;  // coordinates skipped at relu/abs kinks
  bool passed = true;
};

struct SuiteResult {
  std::vector<CheckEntry> entries;
  double max_rel_error = 0.0;
  double tol = 0.0;
  bool passed = true;

  nlohmann::ordered_json to_json() const;
};

/// Finite-difference check of every differentiable op on randomized shapes
/// at f64; one entry per op (worst over trials).
SuiteResult op_suite(std::uint64_t seed = 20240611, int trials = 3,
                     double tol = 1e-5);

/// Finite-difference check of the whole model (L=2, d=16, C=2, d_p=4) under
/// the MAE loss on a fixed 3-molecule batch; one entry per parameter tensor.
SuiteResult full_model_suite(std::uint64_t seed = 2024, double tol = 1e-4);

}  // namespace ringkit::selfcheck

#endif  // RINGKIT_SELFCHECK_H_
