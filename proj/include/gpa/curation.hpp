// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace gpa::curation {

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 16000;
};

inline constexpr double kPeakLevel = 0.6;

// Peak normalization: x * 0.6 / max|x|. Throws Errc::SilentInput on an
// all-zero (or empty) waveform.
Waveform normalize(const Waveform& w);

struct VadOptions {
  double frame_ms = 20.0;
  double energy_threshold = 0.02;  // frame RMS, post-normalization scale
  int hangover_frames = 5;
  double min_segment_ms = 300.0;
  double truncation_ratio = 3.0;   // boundary frame energy vs segment median
};

struct Segment {
  double start = 0;  // seconds
  double end = 0;
  bool operator==(const Segment&) const = default;
};

// Frame-RMS energy VAD. A frame at or above the threshold opens or extends a
// segment; up to `hangover_frames` quiet frames are bridged. Segments shorter
// than min_segment_ms are dropped, and so are segments whose first or last
// frame carries more than truncation_ratio x the segment's median frame
// energy (speech cut off mid-word at the boundary).
std::vector<Segment> vad_segment(const Waveform& w, const VadOptions& opts = {});

std::vector<double> frame_rms(const Waveform& w, double frame_ms);

enum class Unit { Word, Char };

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;
  std::size_t distance() const { return substitutions + deletions + insertions; }
};

std::vector<std::string> split_units(std::string_view text, Unit unit);

EditCounts edit_counts(std::string_view reference, std::string_view hypothesis, Unit unit);

// (S + D + I) / max(1, |reference|).
double wer(std::string_view reference, std::string_view hypothesis, Unit unit = Unit::Word);

struct Hypothesis {
  std::string model;
  std::string text;
};

struct HypothesisSet {
  std::string id;
  std::vector<Hypothesis> hypotheses;
};

// Mean word error rate over all ordered pairs (i != j). Throws
// Errc::TooFewHypotheses when fewer than two hypotheses are present.
double pwer(const HypothesisSet& set);

// Hypothesis with the smallest summed WER (both directions) to the others;
// ties go to the lexicographically smallest model name.
const Hypothesis& medoid(const HypothesisSet& set);

inline constexpr double kDefaultPwerThreshold = 0.15;

struct Kept {
  std::string id;
  std::string transcript;
  double pwer = 0;
};

struct Rejected {
  std::string id;
  double pwer = 0;
};

struct ConsensusResult {
  std::vector<Kept> kept;
  std::vector<Rejected> rejected;
};

// Keeps sets with pwer < threshold (strict).
ConsensusResult consensus_filter(const std::vector<HypothesisSet>& sets,
                                 double threshold = kDefaultPwerThreshold);

struct AlignedWord {
  std::string word;   // without trailing punctuation
  double start = 0;   // seconds
  double end = 0;
  std::string punct;  // trailing punctuation, possibly empty
};

inline constexpr double kCommaPauseSeconds = 0.300;
inline constexpr double kFluentPauseSeconds = 0.050;

// Pause-driven punctuation: a gap >= 300 ms after an unpunctuated word adds a
// comma; a gap < 50 ms removes a comma. Other punctuation is left alone.
// Throws Errc::NonMonotonicTimestamps on overlapping or unordered words.
std::string refine_punctuation(const std::vector<AlignedWord>& words);

AlignedWord aligned_word_from_json(const nlohmann::json& j);

// Mono RIFF/WAVE, PCM 16-bit or IEEE float 32-bit.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w, bool float32 = false);

struct PipelineOptions {
  double pwer_threshold = kDefaultPwerThreshold;
  VadOptions vad;
  std::size_t workers = 0;  // 0: hardware concurrency
};

struct PipelineInputs {
  std::filesystem::path manifest;     // JSONL {id, audio, speaker?}
  std::filesystem::path hypotheses;   // JSONL {id, model, text}
  std::filesystem::path alignments;   // JSONL {id, words:[{w,start,end,punct}]}; optional
};

struct PipelineResult {
  std::vector<nlohmann::json> kept;      // ordered by id
  std::vector<nlohmann::json> rejected;  // ordered by id, each with a reason
};

PipelineResult run_pipeline(const PipelineInputs& in, const PipelineOptions& opts);

}  // namespace gpa::curation
