//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_CHECKPOINT_H_
#define RINGKIT_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ringkit/tensor.h"

namespace ringkit::tensor {

/// Named parameters plus free-form metadata (model config, vocabulary, ...).
/// On disk: <dir>/manifest.json and <dir>/params.bin, the latter holding the
/// little-endian arrays concatenated in manifest order.
template <class T>
struct Checkpoint {
  std::vector<std::string> names;
  std::vector<Tensor<T>> params;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Creates dir if needed. Throws Error(kIo) on write failure.
template <class T>
void save_checkpoint(const std::filesystem::path &dir,
                     const Checkpoint<T> &ckpt);

/// Reads either precision and converts to T. Throws Error(kIo) for missing
/// files and SchemaError for an inconsistent manifest.
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path &dir);

}  // namespace ringkit::tensor

#endif  // RINGKIT_CHECKPOINT_H_
