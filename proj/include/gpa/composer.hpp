// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpa/codec.hpp"
#include "gpa/error.hpp"
#include "gpa/token_space.hpp"

namespace gpa {

enum class TaskKind : std::uint8_t { TTS, ASR, VC };

inline constexpr std::array<TaskKind, 3> kAllTasks = {TaskKind::TTS, TaskKind::ASR, TaskKind::VC};

std::string_view task_name(TaskKind t);
TaskKind task_from_name(std::string_view name);  // accepts "tts"/"TTS" etc.

struct TaskSequence {
  TaskKind task = TaskKind::TTS;
  TokenSeq prompt;  // BOS, task control, ..., GEN
  TokenSeq target;  // supervised continuation, ends with EOS
  std::vector<std::string> meta;  // source utterance id(s)
};

struct TaskResult {
  TaskKind task = TaskKind::TTS;
  std::string text;           // ASR
  std::vector<int> glm, bi;   // TTS (partition-relative)
  std::vector<int> acoustic;  // TTS, VC (partition-relative)
  bool truncated = false;     // no EOS before the end of the emitted tokens
  std::size_t units() const;  // text bytes for ASR, frames otherwise
};

class GrammarViolation : public Error {
 public:
  GrammarViolation(std::size_t index, std::string expected, PartitionKind got, TokenId token);
  std::size_t index() const { return index_; }
  const std::string& expected() const { return expected_; }
  PartitionKind got() const { return got_; }

 private:
  std::size_t index_;
  std::string expected_;
  PartitionKind got_;
};

const Grammar& prompt_grammar(TaskKind task);
const Grammar& target_grammar(TaskKind task);

// Tokens per output unit: one text byte (ASR), a (glm, bi, ac, ac) frame
// (TTS) or an (ac, ac) frame (VC).
int tokens_per_unit(TaskKind task);

// Throws Errc::LayoutMismatch if a partition is too small for the codec.
void check_layout_fits_codec(const VocabLayout& layout);

// Prompt only. Needs text+global (TTS), glm+bi (ASR), glm+bi+target global (VC).
// For VC `target_global` supplies the timbre; for TTS/ASR it is ignored.
TokenSeq compose_prompt(const VocabLayout& layout, TaskKind task, const codec::StreamSet& source,
                        const std::vector<int>* target_global = nullptr);

// Prompt and supervised target. VC needs `vc_target` = the same text rendered
// by the target speaker.
TaskSequence compose(const VocabLayout& layout, TaskKind task, const codec::StreamSet& source,
                     const codec::StreamSet* vc_target = nullptr);

// Number of output units (bytes or frames) the prompt implies.
std::size_t expected_units(const VocabLayout& layout, TaskKind task, const TokenSeq& prompt);

// Generation cap in tokens: 4*frames+16 for TTS/VC, 2*len(semantic)+16 for ASR.
std::size_t length_cap(const VocabLayout& layout, TaskKind task, const TokenSeq& prompt);

// Incremental inverse of the target grammar, shared by parse_output and the
// streaming engine.
class StreamParser {
 public:
  StreamParser(const VocabLayout& layout, TaskKind task);

  enum class Event { None, UnitComplete, End };

  // Throws GrammarViolation on a token from the wrong partition, EOS inside
  // a frame, or anything after EOS.
  Event push(TokenId token);

  // Marks the result truncated when EOS never arrived; a partial frame is
  // dropped from a truncated result.
  TaskResult finish() const;

  const TaskResult& partial() const { return result_; }
  bool ended() const { return ended_; }
  std::size_t consumed() const { return index_; }
  std::size_t units() const { return result_.units(); }

  // What the target grammar admits next.
  struct Allowed {
    std::optional<PartitionKind> kind;
    bool eos = false;
  };
  Allowed allowed() const;

 private:
  const VocabLayout* layout_;
  TaskKind task_;
  TaskResult result_;
  std::size_t index_ = 0;
  int in_frame_ = 0;
  std::size_t frame_start_ = 0;
  bool ended_ = false;
};

TaskResult parse_output(const VocabLayout& layout, TaskKind task, const TokenSeq& emitted);
TaskResult parse_output(const VocabLayout& layout, TaskKind task, std::span<const TokenId> emitted);

struct TaskMix {
  double tts = 1.0 / 3;
  double asr = 1.0 / 3;
  double vc = 1.0 / 3;
};

struct BatchOptions {
  std::uint64_t seed = 0;
  int speaker_pool = 64;  // VC target speakers are drawn from [0, speaker_pool)
};

// One task per entry, drawn by weight. Entries are re-encoded from their
// manifest text/speaker with the mock codec.
std::vector<TaskSequence> make_training_batch(const VocabLayout& layout,
                                              const std::vector<codec::ManifestEntry>& entries,
                                              const TaskMix& mix, const BatchOptions& opts);

// Instantiates one entry as `task` (VC target speaker drawn from rng).
TaskSequence instantiate(const VocabLayout& layout, TaskKind task,
                         const codec::ManifestEntry& entry, int vc_target_speaker);

nlohmann::json to_json(const TaskSequence& seq);

}  // namespace gpa
