//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hamforge/cli.h"

int main(int argc, char **argv) {
  // stdout carries results (JSON, CSV); logs go to stderr
  spdlog::set_default_logger(spdlog::stderr_color_mt("hamforge"));
  return hamforge::cli::run(argc, argv, std::cout, std::cerr);
}
