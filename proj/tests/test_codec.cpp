// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "gpa/codec.hpp"
#include "gpa/error.hpp"
#include "oracles.hpp"

using namespace gpa;
using namespace gpa::codec;

namespace {

std::string random_bytes(std::mt19937& rng, std::size_t max_len) {
  std::string s(1 + rng() % max_len, '\0');
  for (auto& c : s) c = static_cast<char>(rng() % 256);
  return s;
}

}  // namespace

TEST_SUITE("codec") {
  TEST_CASE("hand-computed encodings") {
    auto s = encode("a", 0);
    CHECK(s.glm == std::vector<int>{170});
    CHECK(s.bi == std::vector<int>{242});
    CHECK(s.acoustic == std::vector<int>{486, 875});
    CHECK(s.global == std::vector<int>{0, 0, 0, 0});
    CHECK(encode("a", 1).acoustic == std::vector<int>{497, 892});
    CHECK_THROWS_AS(encode("", 0), Error);
    CHECK_THROWS_AS(encode("a", 4096), Error);
    CHECK_THROWS_AS(encode("a", -1), Error);
  }

  TEST_CASE("encode matches the direct formulas") {
    std::mt19937 rng(11);
    for (int t = 0; t < 200; ++t) {
      const std::string text = random_bytes(rng, 40);
      const int speaker = static_cast<int>(rng() % 4096);
      const auto s = encode(text, speaker);
      const auto o = oracle::encode(text, speaker);
      REQUIRE(s.glm == o.glm);
      REQUIRE(s.bi == o.bi);
      REQUIRE(s.acoustic == o.acoustic);
      REQUIRE(s.global == o.global);
      CHECK(s.acoustic.size() == 2 * text.size());
      CHECK(s.audio_duration() == doctest::Approx(s.acoustic.size() / 50.0));
    }
  }

  TEST_CASE("decode_acoustic round trip and errors") {
    CHECK(decode_acoustic(encode("a", 0).acoustic, {0, 0, 0, 0}) == Decoded{"a", 0});
    const auto cat = encode("cat sat", 37);
    CHECK(decode_acoustic(cat.acoustic, cat.global) == Decoded{"cat sat", 37});
    try {
      decode_acoustic({486, 999}, {0, 0, 0, 0});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InconsistentFrame);
      CHECK(std::string(e.what()).find("frame 0") != std::string::npos);
    }
    auto bad = encode("abc", 5).acoustic;
    bad[4] = (bad[4] + 1) % 1024;
    try {
      decode_acoustic(bad, global_tokens(5));
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }
  }

  TEST_CASE("round trip property over random text and speakers") {
    std::mt19937 rng(12);
    for (int t = 0; t < 500; ++t) {
      const std::string text = random_bytes(rng, 30);
      const int speaker = static_cast<int>(rng() % 4096);
      const auto s = encode(text, speaker);
      REQUIRE(decode_acoustic(s.acoustic, s.global) == Decoded{text, speaker});
      CHECK(speaker_from_global(s.global) == speaker);
    }
  }

  TEST_CASE("speaker invariance of semantics; speaker sensitivity of acoustics") {
    std::mt19937 rng(13);
    for (int t = 0; t < 200; ++t) {
      const std::string text = random_bytes(rng, 20);
      const int s1 = static_cast<int>(rng() % 4096);
      int s2 = static_cast<int>(rng() % 4096);
      if (s2 == s1) s2 = (s1 + 1) % 4096;
      const auto a = encode(text, s1), b = encode(text, s2);
      CHECK(a.bi == b.bi);
      CHECK(a.glm == b.glm);
      CHECK(a.acoustic != b.acoustic);
    }
    CHECK(encode("ab", 0).bi[1] != encode("cb", 0).bi[1]);
    CHECK(encode("ab", 0).glm[1] == encode("cb", 0).glm[1]);
  }

  TEST_CASE("audio_duration") {
    CHECK(audio_duration(322) == doctest::Approx(6.44));
    CHECK(audio_duration(0) == 0.0);
    CHECK(audio_duration(100) == 2.0);
  }

  TEST_CASE("corpus generation is deterministic and split by id hash") {
    CorpusOptions o{7, 3};
    const auto a = generate_corpus(o), b = generate_corpus(o);
    REQUIRE(a.manifest.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(to_json(a.manifest[i]).dump() == to_json(b.manifest[i]).dump());
      CHECK(a.streams[i] == b.streams[i]);
    }
    o.seed = 8;
    const auto c = generate_corpus(o);
    bool differ = false;
    for (std::size_t i = 0; i < 3; ++i) differ = differ || a.manifest[i].text != c.manifest[i].text;
    CHECK(differ);

    const auto big = generate_corpus({7, 50000, 4, 32, 64});
    std::size_t heldout = 0;
    std::set<std::string> ids;
    for (const auto& e : big.manifest) {
      heldout += e.split == Split::Heldout;
      ids.insert(e.id);
      REQUIRE(e.text.size() >= 4);
      REQUIRE(e.text.size() <= 32);
      REQUIRE(e.speaker < 64);
      for (char ch : e.text) REQUIRE(((ch >= 'a' && ch <= 'z') || ch == ' '));
      REQUIRE(e.split == split_for(e.id));
    }
    CHECK(ids.size() == big.manifest.size());
    CHECK(heldout >= 1);
    // about 5% heldout
    CHECK(heldout > 2000);
    CHECK(heldout < 3000);
  }

  TEST_CASE("corpus files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "gpa_codec_test";
    std::filesystem::remove_all(dir);
    const auto corpus = generate_corpus({5, 20});
    write_corpus(corpus, dir);
    const auto m = read_manifest(dir / "manifest.jsonl");
    const auto s = read_streams(dir / "streams.jsonl");
    REQUIRE(m.size() == 20);
    REQUIRE(s.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(m[i].id == corpus.manifest[i].id);
      CHECK(m[i].text == corpus.manifest[i].text);
      CHECK(s[i] == corpus.streams[i]);
    }
    std::filesystem::remove_all(dir);
  }
}
