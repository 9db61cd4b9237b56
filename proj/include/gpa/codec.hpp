// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace gpa::codec {

// Deterministic stand-in for the neural speech tokenizers. Every stream is
// an exact function of (text, speaker), so any generated stream can be
// decoded back and scored without a real recognizer.
//
// Per character c_i (c_{-1} = 0):
//   glm_i          = (7 c_i + 3) mod 512
//   bi_i           = (13 c_i + 3 c_{i-1} + 5) mod 512
//   acoustic_{2i}  = (5 c_i + 11 s + 1) mod 1024
//   acoustic_{2i+1}= (9 c_i + 17 s + 2) mod 1024
//   global_k       = (s >> 6k) mod 64,  k = 0..3
// All ids here are partition-relative.

inline constexpr int kGlmModulus = 512;
inline constexpr int kBiModulus = 512;
inline constexpr int kAcousticModulus = 1024;
inline constexpr int kGlobalModulus = 64;
inline constexpr int kGlobalTokens = 4;
inline constexpr int kAcousticPerChar = 2;
inline constexpr int kMaxSpeakers = 4096;
inline constexpr double kFrameRate = 50.0;  // acoustic tokens per second

struct StreamSet {
  std::string id;
  std::string text;
  int speaker = 0;
  std::vector<int> glm;
  std::vector<int> bi;
  std::vector<int> acoustic;
  std::vector<int> global;

  double audio_duration() const;
  bool operator==(const StreamSet&) const = default;
};

StreamSet encode(std::string_view text, int speaker);

std::vector<int> global_tokens(int speaker);
int speaker_from_global(const std::vector<int>& global);

struct Decoded {
  std::string text;
  int speaker = 0;
  bool operator==(const Decoded&) const = default;
};

// Throws Errc::InconsistentFrame naming the first frame that fails either the
// byte-range check or the second-token consistency check.
Decoded decode_acoustic(const std::vector<int>& acoustic, const std::vector<int>& global);

double audio_duration(std::size_t acoustic_tokens);

enum class Split { Train, Heldout };

struct ManifestEntry {
  std::string id;
  std::string text;
  int speaker = 0;
  std::string streams_path;
  Split split = Split::Train;
};

struct CorpusOptions {
  std::uint64_t seed = 0;
  std::size_t n = 1;
  std::size_t min_chars = 4;
  std::size_t max_chars = 32;
  int speakers = 64;
};

struct Corpus {
  std::vector<ManifestEntry> manifest;
  std::vector<StreamSet> streams;
};

Corpus generate_corpus(const CorpusOptions& opts);

Split split_for(std::string_view utterance_id);
const std::vector<std::string_view>& word_list();

// Random text of a length in [min_chars, max_chars] drawn from word_list().
std::string random_text(std::mt19937_64& rng, std::size_t min_chars, std::size_t max_chars);

nlohmann::json to_json(const StreamSet& s);
StreamSet stream_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ManifestEntry& e);
ManifestEntry manifest_entry_from_json(const nlohmann::json& j);

// Writes manifest.jsonl and streams.jsonl under `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
std::vector<StreamSet> read_streams(const std::filesystem::path& streams);

}  // namespace gpa::codec
