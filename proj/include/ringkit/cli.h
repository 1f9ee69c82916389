//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef RINGKIT_CLI_H_
#define RINGKIT_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace ringkit::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

/// Runs one invocation. args excludes the program name. Machine-readable
/// results go to out, diagnostics to err.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

}  // namespace ringkit::cli

#endif  // RINGKIT_CLI_H_
