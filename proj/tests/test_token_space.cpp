// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <functional>
#include <random>
#include <set>

#include "doctest.h"
#include "gpa/error.hpp"
#include "gpa/token_space.hpp"

using namespace gpa;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

const VocabLayout& L() {
  static const VocabLayout layout = build_vocab(default_vocab_config());
  return layout;
}

TokenId ctl(Control c) { return L().control(c); }

}  // namespace

TEST_SUITE("token_space") {
  TEST_CASE("default layout offsets") {
    // cumulative sums of 256, 512, 512, 1024, 64, 16
    const int sizes[] = {256, 512, 512, 1024, 64, 16};
    int start = 0;
    for (std::size_t i = 0; i < kPartitionOrder.size(); ++i) {
      const auto& p = L().partition(kPartitionOrder[i]);
      CHECK(p.start == start);
      CHECK(p.size == sizes[i]);
      start += sizes[i];
    }
    CHECK(L().total() == 2384);
    CHECK(L().offset(PartitionKind::GlmSemantic) == 256);
    CHECK(L().offset(PartitionKind::BiSemantic) == 768);
    CHECK(L().offset(PartitionKind::Acoustic) == 1280);
    CHECK(L().offset(PartitionKind::Global) == 2304);
    CHECK(L().offset(PartitionKind::Control) == 2368);
  }

  TEST_CASE("minimal layout and control overflow") {
    VocabConfig c;
    for (auto k : kPartitionOrder) c[k] = 1;
    c[PartitionKind::Control] = 8;
    CHECK(build_vocab(c).total() == 13);

    auto big = default_vocab_config();
    big[PartitionKind::Control] = 4;
    CHECK(code_of([&] { build_vocab(big); }) == Errc::ControlOverflow);
    auto zero = default_vocab_config();
    zero[PartitionKind::Acoustic] = 0;
    CHECK(code_of([&] { build_vocab(zero); }) == Errc::ZeroPartition);
  }

  TEST_CASE("partition_of") {
    CHECK(L().partition_of(0) == PartitionKind::Text);
    CHECK(L().partition_of(1280) == PartitionKind::Acoustic);
    CHECK(L().partition_of(2383) == PartitionKind::Control);
    CHECK(code_of([] { L().partition_of(2384); }) == Errc::OutOfVocab);
    CHECK(code_of([] { L().partition_of(-1); }) == Errc::OutOfVocab);
  }

  TEST_CASE("every id has exactly one partition; starts map back") {
    for (TokenId id = 0; id < L().total(); ++id) {
      int hits = 0;
      for (const auto& p : L().partitions()) hits += p.contains(id);
      REQUIRE(hits == 1);
    }
    for (const auto& p : L().partitions()) CHECK(L().partition_of(p.start) == p.kind);
  }

  TEST_CASE("controls live in the control partition and are distinct") {
    std::set<TokenId> seen;
    for (int c = 0; c < kNumControls; ++c) {
      const TokenId id = L().control(static_cast<Control>(c));
      CHECK(L().partition_of(id) == PartitionKind::Control);
      seen.insert(id);
    }
    CHECK(seen.size() == kNumControls);
  }

  TEST_CASE("build_vocab is pure; json round trip") {
    CHECK(build_vocab(default_vocab_config()) == L());
    const auto j = L().to_json();
    CHECK(VocabLayout::from_json(j) == L());
    CHECK(VocabLayout::from_json(nlohmann::json::parse(j.dump())).fingerprint() == L().fingerprint());
    auto bad = j;
    bad["GlmSemantic"]["start"] = 300;
    CHECK_THROWS_AS(VocabLayout::from_json(bad), Error);
  }

  TEST_CASE("validate_sequence") {
    const Grammar asr("BOS TASK_ASR (GlmSemantic BiSemantic)+ GEN");
    const TokenId glm = L().offset(PartitionKind::GlmSemantic) + 170;
    const TokenId bi = L().offset(PartitionKind::BiSemantic) + 242;
    const TokenId ac = L().offset(PartitionKind::Acoustic);
    std::vector<TokenId> ok{ctl(Control::BOS), ctl(Control::TASK_ASR), glm, bi, ctl(Control::GEN)};
    CHECK_FALSE(validate_sequence(L(), ok, asr).has_value());

    std::vector<TokenId> empty;
    auto v = validate_sequence(L(), empty, asr);
    REQUIRE(v.has_value());
    CHECK(v->index == 0);

    std::vector<TokenId> bad{ctl(Control::BOS), ac};
    v = validate_sequence(L(), bad, asr);
    REQUIRE(v.has_value());
    CHECK(v->index == 1);

    std::vector<TokenId> prefix{ctl(Control::BOS), ctl(Control::TASK_ASR), glm};
    v = validate_sequence(L(), prefix, asr);
    REQUIRE(v.has_value());
    CHECK(v->index == prefix.size());

    std::vector<TokenId> oov{ctl(Control::BOS), 5000};
    v = validate_sequence(L(), oov, asr);
    REQUIRE(v.has_value());
    CHECK(v->index == 1);
  }

  TEST_CASE("grammar operators") {
    const TokenId t = 65;
    const TokenId g = L().offset(PartitionKind::Global);
    auto ok = [&](const char* pat, std::vector<TokenId> ids) {
      return !validate_sequence(L(), ids, Grammar(pat)).has_value();
    };
    CHECK(ok("Text{2}", {t, t}));
    CHECK_FALSE(ok("Text{2}", {t}));
    CHECK_FALSE(ok("Text{2}", {t, t, t}));
    CHECK(ok("Text{1,3} Global?", {t, t, t}));
    CHECK(ok("Text{1,3} Global?", {t, g}));
    CHECK_FALSE(ok("Text{1,3} Global?", {g}));
    CHECK(ok("(Text | Global)*", {}));
    CHECK(ok("(Text | Global)*", {g, t, g}));
    CHECK(ok("EOS | Text+", {ctl(Control::EOS)}));
    CHECK_THROWS_AS(Grammar("Text ("), Error);
    CHECK_THROWS_AS(Grammar("Nonsense"), Error);
  }

  TEST_CASE("grammar matches a brute-force check on random sequences") {
    // (Glm Bi)+ checked directly: even length, alternating kinds.
    const Grammar g("(GlmSemantic BiSemantic)+");
    std::mt19937 rng(3);
    const TokenId glm = L().offset(PartitionKind::GlmSemantic), bi = L().offset(PartitionKind::BiSemantic);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<TokenId> ids(rng() % 7);
      for (auto& id : ids) id = rng() % 2 ? glm : bi;
      bool expect = !ids.empty() && ids.size() % 2 == 0;
      for (std::size_t i = 0; i < ids.size(); ++i) expect = expect && ids[i] == (i % 2 ? bi : glm);
      CHECK(!validate_sequence(L(), ids, g).has_value() == expect);
    }
  }

  TEST_CASE("make_token_seq checks range") {
    auto s = make_token_seq(L(), {0, 1, 2383});
    CHECK(s.layout_ref == L().fingerprint());
    CHECK(code_of([] { make_token_seq(L(), {2384}); }) == Errc::OutOfVocab);
  }
}
