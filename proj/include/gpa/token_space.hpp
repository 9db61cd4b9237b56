// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace gpa {

using TokenId = std::int32_t;

enum class PartitionKind : std::uint8_t { Text, GlmSemantic, BiSemantic, Acoustic, Global, Control };

inline constexpr std::array<PartitionKind, 6> kPartitionOrder = {
    PartitionKind::Text,     PartitionKind::GlmSemantic, PartitionKind::BiSemantic,
    PartitionKind::Acoustic, PartitionKind::Global,      PartitionKind::Control};

std::string_view partition_name(PartitionKind kind);
std::optional<PartitionKind> partition_from_name(std::string_view name);

enum class Control : std::uint8_t { BOS, EOS, SEP, GEN, TASK_TTS, TASK_ASR, TASK_VC, PAD };

inline constexpr int kNumControls = 8;

std::string_view control_name(Control c);
std::optional<Control> control_from_name(std::string_view name);

struct Partition {
  PartitionKind kind;
  TokenId start = 0;
  std::int32_t size = 0;

  TokenId end() const { return start + size; }
  bool contains(TokenId id) const { return id >= start && id < end(); }
  bool operator==(const Partition&) const = default;
};

using VocabConfig = std::map<PartitionKind, std::int32_t>;

VocabConfig default_vocab_config();

// Shared discrete vocabulary: six contiguous partitions laid out from id 0 in
// kPartitionOrder, with the named control tokens packed at the start of the
// Control partition. Immutable once built.
class VocabLayout {
 public:
  const std::vector<Partition>& partitions() const { return partitions_; }
  const Partition& partition(PartitionKind kind) const {
    return partitions_[static_cast<std::size_t>(kind)];
  }
  TokenId offset(PartitionKind kind) const { return partition(kind).start; }
  TokenId control(Control c) const { return control_map_[static_cast<std::size_t>(c)]; }
  std::int32_t total() const { return partitions_.back().end(); }

  // Throws Errc::OutOfVocab for ids outside [0, total()).
  PartitionKind partition_of(TokenId id) const;

  // Stable identifier derived from the serialized form.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static VocabLayout from_json(const nlohmann::json& j);

  bool operator==(const VocabLayout&) const = default;

 private:
  friend VocabLayout build_vocab(const VocabConfig& config);

  std::vector<Partition> partitions_;
  std::array<TokenId, kNumControls> control_map_{};
};

VocabLayout build_vocab(const VocabConfig& config);

struct TokenSeq {
  std::vector<TokenId> ids;
  std::string layout_ref;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

// Checks every id is inside the layout and stamps layout_ref.
TokenSeq make_token_seq(const VocabLayout& layout, std::vector<TokenId> ids);

// A regular pattern over partition kinds and named control tokens, e.g.
//   "BOS TASK_ASR (GlmSemantic BiSemantic)+ GEN"
// Atoms are partition names or control names; supported operators are
// grouping, '|', '*', '+', '?', '{n}' and '{n,m}'.
class Grammar {
 public:
  explicit Grammar(std::string_view pattern);
  ~Grammar();
  Grammar(const Grammar&);
  Grammar& operator=(const Grammar&);
  Grammar(Grammar&&) noexcept;
  Grammar& operator=(Grammar&&) noexcept;

  const std::string& pattern() const { return pattern_; }

  struct Nfa;

 private:
  friend struct GrammarAccess;
  std::string pattern_;
  std::unique_ptr<Nfa> nfa_;
};

struct Violation {
  std::size_t index;  // first token at which no completion of the pattern is possible
  std::string message;
};

// std::nullopt means the sequence matches. A sequence that is a proper prefix
// of a match reports index == size().
std::optional<Violation> validate_sequence(const VocabLayout& layout, std::span<const TokenId> ids,
                                           const Grammar& grammar);

inline std::optional<Violation> validate_sequence(const VocabLayout& layout, const TokenSeq& seq,
                                                  const Grammar& grammar) {
  return validate_sequence(layout, std::span<const TokenId>(seq.ids), grammar);
}

}  // namespace gpa
