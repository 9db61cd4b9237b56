// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace gpa::cli {

// Exit codes: 0 success, 1 domain error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Entry point for the gpa tool: gen-corpus, curate, train, infer, serve, bench.
int run(int argc, const char* const* argv);

}  // namespace gpa::cli
