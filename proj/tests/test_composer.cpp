// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "gpa/composer.hpp"
#include "gpa/error.hpp"
#include "oracles.hpp"

using namespace gpa;

namespace {

const VocabLayout& L() {
  static const VocabLayout layout = build_vocab(default_vocab_config());
  return layout;
}
TokenId ctl(Control c) { return L().control(c); }
TokenId off(PartitionKind k) { return L().offset(k); }

std::string random_text(std::mt19937& rng) {
  std::string s(1 + rng() % 24, ' ');
  for (auto& c : s) c = rng() % 6 == 0 ? ' ' : static_cast<char>('a' + rng() % 26);
  return s;
}

}  // namespace

TEST_SUITE("composer") {
  TEST_CASE("TTS layout for 'a' speaker 0") {
    const auto src = codec::encode("a", 0);
    const auto seq = compose(L(), TaskKind::TTS, src);
    const std::vector<TokenId> prompt{ctl(Control::BOS), ctl(Control::TASK_TTS), 97, ctl(Control::SEP),
                                      2304, 2304, 2304, 2304, ctl(Control::GEN)};
    CHECK(seq.prompt.ids == prompt);
    const std::vector<TokenId> target{256 + 170, 768 + 242, 1280 + 486, 1280 + 875, ctl(Control::EOS)};
    CHECK(seq.target.ids == target);
    CHECK(expected_units(L(), TaskKind::TTS, seq.prompt) == 1);
    CHECK(length_cap(L(), TaskKind::TTS, seq.prompt) == 20);
  }

  TEST_CASE("ASR and VC layouts match the oracle encoding") {
    std::mt19937 rng(21);
    for (int t = 0; t < 100; ++t) {
      const std::string text = random_text(rng);
      const int s = static_cast<int>(rng() % 4096);
      const int s2 = (s + 1 + static_cast<int>(rng() % 4095)) % 4096;
      const auto o = oracle::encode(text, s);
      const auto o2 = oracle::encode(text, s2);

      const auto asr = compose(L(), TaskKind::ASR, codec::encode(text, s));
      std::vector<TokenId> p{ctl(Control::BOS), ctl(Control::TASK_ASR)};
      for (std::size_t i = 0; i < text.size(); ++i) {
        p.push_back(256 + o.glm[i]);
        p.push_back(768 + o.bi[i]);
      }
      p.push_back(ctl(Control::GEN));
      REQUIRE(asr.prompt.ids == p);
      std::vector<TokenId> tgt(text.begin(), text.end());
      tgt.push_back(ctl(Control::EOS));
      REQUIRE(asr.target.ids == tgt);
      CHECK(length_cap(L(), TaskKind::ASR, asr.prompt) == 2 * text.size() + 16);

      const auto vc_target = codec::encode(text, s2);
      const auto vc = compose(L(), TaskKind::VC, codec::encode(text, s), &vc_target);
      p[1] = ctl(Control::TASK_VC);
      p.back() = ctl(Control::SEP);
      for (int g : o2.global) p.push_back(2304 + g);
      p.push_back(ctl(Control::GEN));
      REQUIRE(vc.prompt.ids == p);
      std::vector<TokenId> vt;
      for (int a : o2.acoustic) vt.push_back(1280 + a);
      vt.push_back(ctl(Control::EOS));
      REQUIRE(vc.target.ids == vt);
      CHECK(expected_units(L(), TaskKind::VC, vc.prompt) == text.size());
      CHECK(length_cap(L(), TaskKind::VC, vc.prompt) == 4 * text.size() + 16);
    }
  }

  TEST_CASE("composed sequences satisfy their grammars") {
    std::mt19937 rng(22);
    for (int t = 0; t < 100; ++t) {
      const std::string text = random_text(rng);
      const auto src = codec::encode(text, static_cast<int>(rng() % 64));
      const auto other = codec::encode(text, 64 + static_cast<int>(rng() % 64));
      for (auto task : kAllTasks) {
        const auto seq = compose(L(), task, src, &other);
        CHECK_FALSE(validate_sequence(L(), seq.prompt, prompt_grammar(task)).has_value());
        CHECK_FALSE(validate_sequence(L(), seq.target, target_grammar(task)).has_value());
      }
    }
  }

  TEST_CASE("parse_output inverts compose") {
    std::mt19937 rng(23);
    for (int t = 0; t < 100; ++t) {
      const std::string text = random_text(rng);
      const int s = static_cast<int>(rng() % 4096);
      const auto src = codec::encode(text, s);
      const auto vt = codec::encode(text, (s + 7) % 4096);
      const auto tts = parse_output(L(), TaskKind::TTS, compose(L(), TaskKind::TTS, src).target);
      CHECK(tts.glm == src.glm);
      CHECK(tts.bi == src.bi);
      CHECK(tts.acoustic == src.acoustic);
      CHECK_FALSE(tts.truncated);
      const auto asr = parse_output(L(), TaskKind::ASR, compose(L(), TaskKind::ASR, src).target);
      CHECK(asr.text == text);
      const auto vc = parse_output(L(), TaskKind::VC, compose(L(), TaskKind::VC, src, &vt).target);
      CHECK(vc.acoustic == vt.acoustic);
    }
  }

  TEST_CASE("parser errors and truncation") {
    const auto seq = compose(L(), TaskKind::TTS, codec::encode("ab", 3));
    auto ids = seq.target.ids;

    // Acoustic token where a Bi token belongs.
    auto wrong = ids;
    wrong[1] = off(PartitionKind::Acoustic);
    try {
      parse_output(L(), TaskKind::TTS, std::span<const TokenId>(wrong));
      FAIL("no violation");
    } catch (const GrammarViolation& e) {
      CHECK(e.index() == 1);
      CHECK(e.got() == PartitionKind::Acoustic);
    }

    // EOS inside a frame.
    std::vector<TokenId> mid(ids.begin(), ids.begin() + 2);
    mid.push_back(ctl(Control::EOS));
    CHECK_THROWS_AS(parse_output(L(), TaskKind::TTS, std::span<const TokenId>(mid)), GrammarViolation);

    // Token after EOS.
    auto after = ids;
    after.push_back(65);
    CHECK_THROWS_AS(parse_output(L(), TaskKind::TTS, std::span<const TokenId>(after)), GrammarViolation);

    // No EOS: truncated, partial frame dropped.
    std::vector<TokenId> cut(ids.begin(), ids.begin() + 6);
    const auto r = parse_output(L(), TaskKind::TTS, std::span<const TokenId>(cut));
    CHECK(r.truncated);
    CHECK(r.units() == 1);
    CHECK(r.acoustic.size() == 2);
  }

  TEST_CASE("partial results count complete frames only") {
    const auto seq = compose(L(), TaskKind::TTS, codec::encode("ab", 3));
    StreamParser p(L(), TaskKind::TTS);
    const std::size_t expect[] = {0, 0, 0, 1, 1, 1, 1, 2};
    for (std::size_t i = 0; i < 8; ++i) {
      p.push(seq.target.ids[i]);
      CHECK(p.units() == expect[i]);
    }
  }

  TEST_CASE("missing inputs and bad VC target") {
    codec::StreamSet empty;
    CHECK_THROWS_AS(compose_prompt(L(), TaskKind::ASR, empty), Error);
    const auto src = codec::encode("hi", 1);
    CHECK_THROWS_AS(compose(L(), TaskKind::VC, src), Error);
    const auto other_text = codec::encode("ho", 2);
    CHECK_THROWS_AS(compose(L(), TaskKind::VC, src, &other_text), Error);
  }

  TEST_CASE("layout too small for the codec") {
    auto cfg = default_vocab_config();
    cfg[PartitionKind::Acoustic] = 512;
    const auto small = build_vocab(cfg);
    try {
      check_layout_fits_codec(small);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::LayoutMismatch);
    }
  }

  TEST_CASE("task names") {
    CHECK(task_from_name("tts") == TaskKind::TTS);
    CHECK(task_from_name("ASR") == TaskKind::ASR);
    CHECK(task_name(TaskKind::VC) == "vc");
    CHECK_THROWS_AS(task_from_name("mt"), Error);
  }

  TEST_CASE("training batches follow the mix and are deterministic") {
    const auto corpus = codec::generate_corpus({7, 600});
    TaskMix mix{0.5, 0.25, 0.25};
    BatchOptions o{9, 64};
    const auto a = make_training_batch(L(), corpus.manifest, mix, o);
    const auto b = make_training_batch(L(), corpus.manifest, mix, o);
    REQUIRE(a.size() == corpus.manifest.size());
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].prompt.ids == b[i].prompt.ids);
      CHECK(a[i].target.ids == b[i].target.ids);
      ++counts[static_cast<int>(a[i].task)];
    }
    CHECK(counts[0] > 240);
    CHECK(counts[0] < 360);
    CHECK(counts[1] > 100);
    CHECK(counts[2] > 100);

    const auto only_asr = make_training_batch(L(), corpus.manifest, {0, 1, 0}, o);
    for (const auto& s : only_asr) CHECK(s.task == TaskKind::ASR);
  }
}
