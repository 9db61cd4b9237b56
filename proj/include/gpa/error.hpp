// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpa {

// Every domain fault raised by the library carries one of these codes so
// callers (CLI exit codes, HTTP status, bindings) can dispatch on it.
enum class Errc {
  ZeroPartition,
  ControlOverflow,
  OutOfVocab,
  LayoutMismatch,
  EmptyText,
  SpeakerOutOfRange,
  InconsistentFrame,
  MissingInput,
  LengthMismatch,
  GrammarViolation,
  EmptyBatch,
  ContextOverflow,
  NaNLoss,
  SilentInput,
  TooFewHypotheses,
  NonMonotonicTimestamps,
  EngineShutdown,
  InvalidPrompt,
  UnknownSession,
  AlreadyFinished,
  EndpointUnreachable,
  ZeroDuration,
  EmptySamples,
  InvalidArgument,
  Io,
  Parse,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gpa
