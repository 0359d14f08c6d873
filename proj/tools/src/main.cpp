// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "avf/cli/commands.hpp"

int main(int argc, char** argv) { return avf::cli::run_cli(argc, argv, std::cout, std::cerr); }
