// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/cli.hpp"

int main(int argc, char** argv) { return gpa::cli::run(argc, argv); }
