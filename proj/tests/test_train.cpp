// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "gpa/checkpoint.hpp"
#include "gpa/codec.hpp"
#include "gpa/error.hpp"
#include "gpa/inference.hpp"
#include "gpa/train.hpp"

using namespace gpa;
using namespace gpa::model;

namespace {

const VocabLayout& L() {
  static const VocabLayout layout = build_vocab(default_vocab_config());
  return layout;
}

ModelConfig small() {
  ModelConfig c;
  c.layers = 1;
  c.heads = 2;
  c.model_dim = 32;
  c.ff_dim = 48;
  c.max_seq_len = 64;
  return c;
}

TrainConfig quick(int steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 4;
  t.warmup = 2;
  t.lr = 3e-3;
  t.seed = 5;
  t.eval_interval = steps;
  t.eval_items = 4;
  return t;
}

std::vector<codec::ManifestEntry> corpus(std::size_t n) {
  return codec::generate_corpus({3, n, 4, 8, 16}).manifest;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("learning-rate schedule") {
    TrainConfig c;
    c.lr = 1e-3;
    c.warmup = 10;
    c.steps = 110;
    c.min_lr_ratio = 0.1;
    CHECK(c.lr_at(0) == doctest::Approx(1e-4));
    CHECK(c.lr_at(4) == doctest::Approx(5e-4));
    CHECK(c.lr_at(9) == doctest::Approx(1e-3));
    CHECK(c.lr_at(10) == doctest::Approx(1e-3));
    // halfway through the cosine
    CHECK(c.lr_at(60) == doctest::Approx(1e-3 * (0.1 + 0.9 * 0.5)));
    CHECK(c.lr_at(110) == doctest::Approx(1e-4));
    CHECK(c.lr_at(500) == doctest::Approx(1e-4));
    for (int s = 10; s < 110; ++s) CHECK(c.lr_at(s + 1) <= c.lr_at(s));
    const double x = 0.3;
    CHECK(c.lr_at(10 + 30) ==
          doctest::Approx(1e-3 * (0.1 + 0.9 * 0.5 * (1 + std::cos(std::numbers::pi * x)))));
  }

  TEST_CASE("adamw first step moves each parameter by about lr") {
    ModelConfig mc = small();
    TrainState<double> st(mc);
    st.model.init(1);
    st.adam_m.assign(st.model.num_params(), 0);
    st.adam_v.assign(st.model.num_params(), 0);
    const auto before = st.model.params();
    std::vector<double> grad(st.model.num_params(), 0);
    grad[0] = 1e-3;
    grad[1] = -2e-3;
    TrainConfig tc;
    tc.weight_decay = 0;
    tc.grad_clip = 0;
    adamw_step(st, std::span<double>(grad), tc, 0.01);
    CHECK(st.model.params()[0] - before[0] == doctest::Approx(-0.01).epsilon(1e-3));
    CHECK(st.model.params()[1] - before[1] == doctest::Approx(0.01).epsilon(1e-3));
    CHECK(st.model.params()[2] == before[2]);
  }

  TEST_CASE("gradient clipping reports the pre-clip norm") {
    TrainState<double> st(small());
    st.model.init(1);
    st.adam_m.assign(st.model.num_params(), 0);
    st.adam_v.assign(st.model.num_params(), 0);
    std::vector<double> grad(st.model.num_params(), 0);
    grad[0] = 3;
    grad[1] = 4;
    TrainConfig tc;
    tc.grad_clip = 1.0;
    CHECK(adamw_step(st, std::span<double>(grad), tc, 1e-3) == doctest::Approx(5.0));
  }

  TEST_CASE("training is deterministic and reduces loss") {
    const auto c = corpus(300);
    std::vector<MetricsRow> rows;
    const auto a = train<float>(L(), c, small(), quick(150), [&](const MetricsRow& r) { rows.push_back(r); });
    const auto b = train<float>(L(), c, small(), quick(150));
    CHECK(a.state.model.params() == b.state.model.params());
    REQUIRE(a.metrics.size() == 150);
    CHECK(rows.size() == 150);
    auto mean_loss = [&](std::size_t from) {
      double s = 0;
      for (std::size_t i = from; i < from + 10; ++i) s += a.metrics[i].loss;
      return s / 10;
    };
    CHECK(mean_loss(140) < mean_loss(0) - 1.0);
    CHECK(a.metrics.back().accuracy[0].has_value());
    CHECK_FALSE(a.metrics[5].accuracy[0].has_value());
    auto other = quick(5);
    other.seed = 6;
    const auto d = train<float>(L(), c, small(), other);
    CHECK(d.state.model.params() != train<float>(L(), c, small(), quick(5)).state.model.params());
  }

  TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(train<float>(L(), {}, small(), quick(2)), Error);
  }

  TEST_CASE("metrics csv") {
    MetricsRow r;
    r.step = 3;
    r.loss = 1.5;
    r.lr = 0.001;
    CHECK(metrics_csv_header() == "step,loss,lr,acc_tts,acc_asr,acc_vc");
    const auto row = metrics_csv_row(r);
    CHECK(row.rfind("3,", 0) == 0);
    CHECK(std::count(row.begin(), row.end(), ',') == 5);
  }

  TEST_CASE("checkpoint round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "gpa_ckpt_test";
    std::filesystem::create_directories(dir);
    Transformer<float> m(small());
    m.init(9);
    save_checkpoint(dir / "m.ckpt", L(), m, 17, {{"note", "x"}});
    const auto ck = load_checkpoint(dir / "m.ckpt");
    CHECK(ck.step == 17);
    CHECK(ck.meta["note"] == "x");
    CHECK(ck.layout == L());
    CHECK(ck.model.config() == m.config());
    CHECK(ck.model.params() == m.params());
    const auto h = read_checkpoint_header(dir / "m.ckpt");
    CHECK(h["fingerprint"] == L().fingerprint());

    // double checkpoints load as float
    Transformer<double> md(small());
    md.init(9);
    save_checkpoint(dir / "d.ckpt", L(), md, 1);
    const auto ckd = load_checkpoint(dir / "d.ckpt");
    CHECK(ckd.model.params()[10] == doctest::Approx(static_cast<float>(md.params()[10])));

    {
      std::ofstream(dir / "junk.ckpt") << "hello";
    }
    try {
      load_checkpoint(dir / "junk.ckpt");
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Parse);
    }
    std::filesystem::resize_file(dir / "m.ckpt", std::filesystem::file_size(dir / "m.ckpt") - 8);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt"), Error);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("generate respects caps and constraints on an untrained model") {
    Transformer<float> m(small());
    m.init(2);
    const auto src = codec::encode("abcd", 3);
    for (auto task : kAllTasks) {
      const auto item = make_infer_item(L(), task, src, task == TaskKind::VC ? 4 : -1);
      DecodePolicy constrained{{}, true};
      const auto g = generate(m, L(), task, item.prompt, constrained);
      CHECK_FALSE(g.error.has_value());
      CHECK(g.tokens.size() <= length_cap(L(), task, item.prompt));
      // With room in the context, constrained output is complete and has the
      // implied length.
      if (static_cast<int>(item.prompt.ids.size() + g.tokens.size()) < m.config().max_seq_len) {
        CHECK_FALSE(g.result.truncated);
        CHECK(g.result.units() == 4);
      }
      const auto free = generate(m, L(), task, item.prompt, DecodePolicy{});
      CHECK(free.tokens.size() <= length_cap(L(), task, item.prompt));
    }
  }

  TEST_CASE("vc target derivation") {
    for (int s = 0; s < 64; ++s) {
      const int t = vc_target_for("utt" + std::to_string(s), s, 64, 7);
      CHECK(t != s);
      CHECK(t >= 0);
      CHECK(t < 64);
      CHECK(t == vc_target_for("utt" + std::to_string(s), s, 64, 7));
    }
    CHECK_THROWS_AS(vc_target_for("x", 0, 1, 0), Error);
  }

  TEST_CASE("scoring against the codec oracle") {
    const auto src = codec::encode("hello", 5);
    auto item = make_infer_item(L(), TaskKind::TTS, src);
    Generation g;
    g.result.task = TaskKind::TTS;
    g.result.acoustic = src.acoustic;
    CHECK(score(L(), item, g).correct);
    g.result.acoustic = codec::encode("hello", 6).acoustic;
    const auto wrong_speaker = score(L(), item, g);
    CHECK_FALSE(wrong_speaker.correct);
    CHECK(wrong_speaker.decoded_speaker == 6);
    g.result.acoustic = codec::encode("hallo", 5).acoustic;
    const auto sub = score(L(), item, g);
    CHECK_FALSE(sub.correct);
    CHECK(sub.edits.distance() == 1);

    auto asr = make_infer_item(L(), TaskKind::ASR, src);
    Generation ga;
    ga.result.task = TaskKind::ASR;
    ga.result.text = "hello";
    CHECK(score(L(), asr, ga).correct);
    ga.result.truncated = true;
    CHECK_FALSE(score(L(), asr, ga).correct);
  }
}
