//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_ERROR_H_
#define RINGKIT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ringkit {

enum class ErrorCode {
  // smiles
  kEmptyInput,
  kNonAscii,
  kSyntax,
  kUnclosedRing,
  kUnclosedBranch,
  kUnknownElement,
  kValenceError,
  kDisconnectedInput,
  kNonRingAromatic,
  // rings
  kRingLimitExceeded,
  // hiergraph
  kEmptyCorpus,
  kSchemaError,
  // tensor / model
  kShapeMismatch,
  kNotScalar,
  kDetachedTensor,
  kOutOfRange,
  kNonFiniteTarget,
  kVocabMismatch,
  // train
  kMissingColumn,
  kEmptyDataset,
  kIndexOutOfRange,
  kOverlappingSplits,
  kInvalidConfig,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error: public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) { }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Parse failure carrying the byte offset into the SMILES text.
class SmilesError: public Error {
public:
  SmilesError(ErrorCode code, const std::string &what, std::size_t position)
      : Error(code, what + " (at position " + std::to_string(position) + ")"),
        position_(position) { }

  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

/// Malformed serialized record; line numbers are 1-based.
class SchemaError: public Error {
public:
  SchemaError(const std::string &what, std::size_t line)
      : Error(ErrorCode::kSchemaError,
              "line " + std::to_string(line) + ": " + what),
        line_(line) { }

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace ringkit

#endif  // RINGKIT_ERROR_H_
