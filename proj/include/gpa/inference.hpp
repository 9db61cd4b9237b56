// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpa/codec.hpp"
#include "gpa/composer.hpp"
#include "gpa/curation.hpp"
#include "gpa/model.hpp"
#include "gpa/train.hpp"

namespace gpa {

struct DecodePolicy {
  model::SamplerConfig sampler;
  // Restrict each step to what the target grammar admits, and close the
  // output exactly at the unit count the prompt implies. Off by default:
  // plain decoding shows what the model itself produces.
  bool constrained = false;
};

// Token ranges admitted by `parser` in constrained mode.
model::AllowedRanges allowed_next(const VocabLayout& layout, const StreamParser& parser,
                                  std::size_t expected_units);

struct Generation {
  std::vector<TokenId> tokens;  // emitted target tokens, EOS included when produced
  TaskResult result;
  std::optional<std::string> error;  // grammar violation, if any
};

// Prefill + cached autoregressive decode up to length_cap(prompt).
template <class T>
Generation generate(const model::Transformer<T>& model, const VocabLayout& layout, TaskKind task,
                    const TokenSeq& prompt, const DecodePolicy& policy = {});

// One inference item with what the oracle needs to score it.
struct InferItem {
  std::string id;
  TaskKind task = TaskKind::ASR;
  TokenSeq prompt;
  std::string reference_text;
  int target_speaker = 0;  // TTS: the prompt speaker; VC: the conversion target
};

// VC target speaker for an item: deterministic in (seed, id), never the source.
int vc_target_for(std::string_view id, int source_speaker, int speaker_pool, std::uint64_t seed);

InferItem make_infer_item(const VocabLayout& layout, TaskKind task, const codec::StreamSet& source,
                          int vc_target_speaker = -1);

struct ItemScore {
  std::string id;
  bool correct = false;       // ASR exact match; TTS text recovered; VC text and speaker
  std::string decoded_text;   // transcript or oracle-decoded text
  int decoded_speaker = -1;   // TTS/VC oracle speaker, -1 when undecodable
  curation::EditCounts edits;  // char-level against the reference
  std::optional<std::string> error;
};

// Scores a generation with the mock-codec oracle.
ItemScore score(const VocabLayout& layout, const InferItem& item, const Generation& gen);

// Speaker whose acoustic rendering the tokens are consistent with; tries
// `hint` first. Empty when no speaker decodes every frame.
std::optional<codec::Decoded> identify_speaker(const std::vector<int>& acoustic, int hint);

struct TaskScore {
  TaskKind task = TaskKind::ASR;
  std::size_t items = 0;
  std::size_t correct = 0;
  std::size_t char_edits = 0;
  std::size_t char_reference = 0;
  std::size_t violations = 0;
  double accuracy() const { return items ? static_cast<double>(correct) / items : 0.0; }
  // Corpus-level character error rate.
  double char_wer() const {
    return char_reference ? static_cast<double>(char_edits) / char_reference : 0.0;
  }
  nlohmann::json to_json() const;
};

template <class T>
TaskScore evaluate(const model::Transformer<T>& model, const VocabLayout& layout,
                   const std::vector<InferItem>& items, const DecodePolicy& policy = {},
                   std::vector<ItemScore>* details = nullptr);

nlohmann::json result_to_json(const InferItem& item, const Generation& gen, const ItemScore& s);

}  // namespace gpa
