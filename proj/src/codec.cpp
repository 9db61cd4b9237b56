// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/codec.hpp"

#include <fstream>
#include <map>
#include <set>

#include "gpa/error.hpp"

namespace gpa::codec {

namespace {

constexpr int kFiveInverse = 205;  // 5 * 205 = 1025 = 1 (mod 1024)

int mod(long long v, int m) {
  long long r = v % m;
  return static_cast<int>(r < 0 ? r + m : r);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const char* split_name(Split s) { return s == Split::Train ? "train" : "heldout"; }

}  // namespace

const std::vector<std::string_view>& word_list() {
  static const std::vector<std::string_view> words = {
      "a",     "i",     "an",    "as",    "at",    "be",    "by",    "do",    "go",    "he",
      "in",    "is",    "it",    "me",    "my",    "no",    "of",    "on",    "or",    "so",
      "to",    "up",    "us",    "we",    "and",   "are",   "bad",   "big",   "box",   "boy",
      "but",   "can",   "car",   "cat",   "cup",   "day",   "dog",   "ear",   "egg",   "eye",
      "far",   "fix",   "fly",   "fox",   "fun",   "get",   "got",   "had",   "has",   "hat",
      "her",   "him",   "his",   "hot",   "how",   "ice",   "jam",   "job",   "joy",   "key",
      "kid",   "law",   "leg",   "let",   "lip",   "low",   "man",   "map",   "mix",   "new",
      "not",   "now",   "odd",   "old",   "one",   "our",   "out",   "owl",   "pen",   "pig",
      "put",   "quiz",  "ran",   "red",   "run",   "sat",   "saw",   "say",   "sea",   "see",
      "she",   "sky",   "sun",   "ten",   "the",   "top",   "two",   "van",   "was",   "way",
      "web",   "who",   "why",   "win",   "yes",   "you",   "zoo",   "able",  "back",  "blue",
      "book",  "calm",  "cold",  "dark",  "deep",  "door",  "down",  "each",  "easy",  "fast",
      "fish",  "from",  "game",  "gold",  "good",  "hand",  "have",  "here",  "high",  "home",
      "jump",  "just",  "kind",  "king",  "lake",  "last",  "left",  "life",  "like",  "long",
      "make",  "many",  "moon",  "more",  "name",  "near",  "next",  "nice",  "open",  "over",
      "park",  "play",  "rain",  "read",  "rich",  "road",  "rock",  "room",  "safe",  "ship",
      "slow",  "snow",  "soft",  "star",  "stop",  "talk",  "tree",  "true",  "very",  "walk",
      "warm",  "when",  "wide",  "wind",  "with",  "word",  "work",  "year",  "zero",  "about",
      "after", "apple", "black", "bread", "bring", "clean", "cloud", "dream", "early", "field",
      "first", "fresh", "glass", "green", "happy", "heavy", "horse", "house", "large", "light",
      "lucky", "music", "night", "ocean", "paper", "plant", "quick", "quiet", "river", "round",
      "seven", "sharp", "small", "smile", "sound", "stone", "storm", "sweet", "table", "think",
      "three", "tiger", "today", "under", "voice", "water", "white", "world", "young", "zebra",
      "garden", "window", "yellow", "orange", "silver", "winter", "summer", "forest", "bridge",
      "friend", "jacket", "kitten", "little", "market", "purple", "rabbit", "spring", "travel",
      "valley", "wonder", "brother", "morning", "journey", "kitchen", "machine", "weather",
  };
  return words;
}

std::vector<int> global_tokens(int speaker) {
  std::vector<int> g(kGlobalTokens);
  for (int k = 0; k < kGlobalTokens; ++k) g[k] = (speaker >> (6 * k)) % kGlobalModulus;
  return g;
}

int speaker_from_global(const std::vector<int>& global) {
  if (global.size() != static_cast<std::size_t>(kGlobalTokens))
    throw Error(Errc::InvalidArgument, "expected 4 global tokens, got " +
                                           std::to_string(global.size()));
  int speaker = 0;
  for (int k = kGlobalTokens - 1; k >= 0; --k) {
    if (global[k] < 0 || global[k] >= kGlobalModulus)
      throw Error(Errc::InvalidArgument, "global token out of range");
    speaker = speaker * kGlobalModulus + global[k];
  }
  return speaker;
}

StreamSet encode(std::string_view text, int speaker) {
  if (text.empty()) throw Error(Errc::EmptyText, "cannot encode empty text");
  if (speaker < 0 || speaker >= kMaxSpeakers)
    throw Error(Errc::SpeakerOutOfRange, "speaker " + std::to_string(speaker));
  StreamSet s;
  s.text = std::string(text);
  s.speaker = speaker;
  s.glm.reserve(text.size());
  s.bi.reserve(text.size());
  s.acoustic.reserve(text.size() * kAcousticPerChar);
  int prev = 0;
  for (unsigned char ch : text) {
    int c = ch;
    s.glm.push_back(mod(7LL * c + 3, kGlmModulus));
    s.bi.push_back(mod(13LL * c + 3LL * prev + 5, kBiModulus));
    s.acoustic.push_back(mod(5LL * c + 11LL * speaker + 1, kAcousticModulus));
    s.acoustic.push_back(mod(9LL * c + 17LL * speaker + 2, kAcousticModulus));
    prev = c;
  }
  s.global = global_tokens(speaker);
  return s;
}

Decoded decode_acoustic(const std::vector<int>& acoustic, const std::vector<int>& global) {
  if (acoustic.size() % kAcousticPerChar != 0)
    throw Error(Errc::InconsistentFrame,
                "odd acoustic length " + std::to_string(acoustic.size()) + " at frame " +
                    std::to_string(acoustic.size() / kAcousticPerChar));
  Decoded out;
  out.speaker = speaker_from_global(global);
  out.text.reserve(acoustic.size() / kAcousticPerChar);
  for (std::size_t f = 0; f < acoustic.size() / kAcousticPerChar; ++f) {
    int a0 = acoustic[2 * f], a1 = acoustic[2 * f + 1];
    int c = mod(static_cast<long long>(a0 - 11LL * out.speaker - 1) * kFiveInverse,
                kAcousticModulus);
    if (c >= 256 || a1 != mod(9LL * c + 17LL * out.speaker + 2, kAcousticModulus))
      throw Error(Errc::InconsistentFrame, "frame " + std::to_string(f));
    out.text.push_back(static_cast<char>(c));
  }
  return out;
}

double audio_duration(std::size_t acoustic_tokens) {
  return static_cast<double>(acoustic_tokens) / kFrameRate;
}

double StreamSet::audio_duration() const { return codec::audio_duration(acoustic.size()); }

Split split_for(std::string_view utterance_id) {
  return fnv1a(utterance_id) % 100 < 5 ? Split::Heldout : Split::Train;
}

std::string random_text(std::mt19937_64& rng, std::size_t min_chars, std::size_t max_chars) {
  if (min_chars < 1 || max_chars < min_chars)
    throw Error(Errc::InvalidArgument, "bad text length range");
  const auto& words = word_list();
  std::size_t target = std::uniform_int_distribution<std::size_t>(min_chars, max_chars)(rng);
  std::string text;
  while (text.size() < target) {
    std::size_t room = max_chars - text.size() - (text.empty() ? 0 : 1);
    if (room == 0) break;
    std::string_view w = words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
    if (w.size() > room) {
      // Redraw among words that still fit; "a" and "i" always do.
      std::vector<std::string_view> fitting;
      for (auto cand : words)
        if (cand.size() <= room) fitting.push_back(cand);
      w = fitting[std::uniform_int_distribution<std::size_t>(0, fitting.size() - 1)(rng)];
    }
    if (!text.empty()) text.push_back(' ');
    text.append(w);
  }
  return text;
}

Corpus generate_corpus(const CorpusOptions& opts) {
  if (opts.n < 1) throw Error(Errc::InvalidArgument, "corpus needs n >= 1");
  if (opts.speakers < 1 || opts.speakers > kMaxSpeakers)
    throw Error(Errc::SpeakerOutOfRange, "speaker count " + std::to_string(opts.speakers));
  Corpus corpus;
  corpus.manifest.reserve(opts.n);
  corpus.streams.reserve(opts.n);
  for (std::size_t i = 0; i < opts.n; ++i) {
    std::mt19937_64 rng(splitmix64(opts.seed ^ static_cast<std::uint64_t>(i)));
    char id[32];
    std::snprintf(id, sizeof(id), "utt-%07zu", i);
    std::string text = random_text(rng, opts.min_chars, opts.max_chars);
    int speaker = std::uniform_int_distribution<int>(0, opts.speakers - 1)(rng);
    StreamSet s = encode(text, speaker);
    s.id = id;
    corpus.manifest.push_back({id, text, speaker, "streams.jsonl", split_for(id)});
    corpus.streams.push_back(std::move(s));
  }
  return corpus;
}

nlohmann::json to_json(const StreamSet& s) {
  return {{"id", s.id},   {"text", s.text},         {"speaker", s.speaker},
          {"glm", s.glm}, {"bi", s.bi},             {"acoustic", s.acoustic},
          {"global", s.global}, {"frame_rate", kFrameRate}};
}

StreamSet stream_from_json(const nlohmann::json& j) {
  try {
    StreamSet s;
    s.id = j.value("id", "");
    s.text = j.value("text", "");
    s.speaker = j.value("speaker", 0);
    if (j.contains("glm")) s.glm = j["glm"].get<std::vector<int>>();
    if (j.contains("bi")) s.bi = j["bi"].get<std::vector<int>>();
    if (j.contains("acoustic")) s.acoustic = j["acoustic"].get<std::vector<int>>();
    if (j.contains("global")) s.global = j["global"].get<std::vector<int>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("stream record: ") + e.what());
  }
}

nlohmann::json to_json(const ManifestEntry& e) {
  return {{"id", e.id},
          {"text", e.text},
          {"speaker", e.speaker},
          {"streams_path", e.streams_path},
          {"split", split_name(e.split)}};
}

ManifestEntry manifest_entry_from_json(const nlohmann::json& j) {
  try {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.text = j.at("text").get<std::string>();
    e.speaker = j.at("speaker").get<int>();
    e.streams_path = j.value("streams_path", "");
    std::string split = j.value("split", "train");
    if (split != "train" && split != "heldout")
      throw Error(Errc::Parse, "unknown split '" + split + "'");
    e.split = split == "train" ? Split::Train : Split::Heldout;
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Parse, std::string("manifest entry: ") + ex.what());
  }
}

namespace {

template <class F>
void for_each_jsonl(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    f(j);
  }
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::set<std::string> seen;
  std::ofstream manifest(dir / "manifest.jsonl");
  std::ofstream streams(dir / "streams.jsonl");
  if (!manifest || !streams) throw Error(Errc::Io, "cannot write corpus to " + dir.string());
  for (const auto& e : corpus.manifest) {
    if (!seen.insert(e.id).second) throw Error(Errc::InvalidArgument, "duplicate id " + e.id);
    manifest << to_json(e).dump() << '\n';
  }
  for (const auto& s : corpus.streams) streams << to_json(s).dump() << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  for_each_jsonl(manifest, [&](const nlohmann::json& j) {
    out.push_back(manifest_entry_from_json(j));
    if (!seen.insert(out.back().id).second)
      throw Error(Errc::Parse, "duplicate utterance id " + out.back().id);
  });
  return out;
}

std::vector<StreamSet> read_streams(const std::filesystem::path& streams) {
  std::vector<StreamSet> out;
  for_each_jsonl(streams, [&](const nlohmann::json& j) { out.push_back(stream_from_json(j)); });
  return out;
}

}  // namespace gpa::codec
