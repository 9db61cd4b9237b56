// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/error.hpp"

namespace gpa {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::ZeroPartition: return "ZeroPartition";
    case Errc::ControlOverflow: return "ControlOverflow";
    case Errc::OutOfVocab: return "OutOfVocab";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::EmptyText: return "EmptyText";
    case Errc::SpeakerOutOfRange: return "SpeakerOutOfRange";
    case Errc::InconsistentFrame: return "InconsistentFrame";
    case Errc::MissingInput: return "MissingInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::GrammarViolation: return "GrammarViolation";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::ContextOverflow: return "ContextOverflow";
    case Errc::NaNLoss: return "NaNLoss";
    case Errc::SilentInput: return "SilentInput";
    case Errc::TooFewHypotheses: return "TooFewHypotheses";
    case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case Errc::EngineShutdown: return "EngineShutdown";
    case Errc::InvalidPrompt: return "InvalidPrompt";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::AlreadyFinished: return "AlreadyFinished";
    case Errc::EndpointUnreachable: return "EndpointUnreachable";
    case Errc::ZeroDuration: return "ZeroDuration";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace gpa
