//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_CLI_H_
#define HAMFORGE_CLI_H_

#include <ostream>

#include "hamforge/error.h"

namespace hamforge::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code(ErrorCode code);

// The whole command line: `argv[0] <command> [flags]`. Results go to `out`,
// diagnostics to `err`. Never throws.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace hamforge::cli

#endif  // HAMFORGE_CLI_H_
