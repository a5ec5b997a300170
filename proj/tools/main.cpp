// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli/cli.hpp"

int main(int argc, char** argv) { return tsflow::cli::run_cli(argc, argv); }
