// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <memory>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gpa/bench.hpp"
#include "gpa/error.hpp"
#include "gpa/http_server.hpp"
#include "gpa/inference.hpp"
#include "httplib.h"
#include "oracles.hpp"

using namespace gpa;
using namespace gpa::bench;

namespace {

const VocabLayout& L() {
  static const VocabLayout layout = build_vocab(default_vocab_config());
  return layout;
}

std::shared_ptr<const model::Transformer<float>> tiny_model() {
  static auto m = [] {
    model::ModelConfig c;
    c.layers = 1;
    c.heads = 2;
    c.model_dim = 32;
    c.ff_dim = 48;
    c.max_seq_len = 512;
    auto t = std::make_shared<model::Transformer<float>>(c);
    t->init(12);
    return t;
  }();
  return m;
}

LatencySample sample(double ttf, double total = 0, double audio = 1, double gen = 0.5) {
  LatencySample s;
  s.ttf_ms = ttf;
  s.total_ms = std::max(total, ttf);
  s.audio_duration_s = audio;
  s.generation_time_s = gen;
  return s;
}

RequestOptions short_requests() {
  RequestOptions o;
  o.min_words = 2;
  o.max_words = 4;
  return o;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("rtf") {
    CHECK(rtf(1.269, 6.44) == doctest::Approx(0.197).epsilon(0.002));
    CHECK(rtf(2.5, 2.5) == 1.0);
    CHECK(code_of([] { rtf(1.0, 0.0); }) == Errc::ZeroDuration);
  }

  TEST_CASE("percentile examples") {
    std::vector<double> grid;
    for (int i = 1; i <= 100; ++i) grid.push_back(i);
    CHECK(percentile(grid, 50) == 50);
    CHECK(percentile(grid, 99) == 99);
    CHECK(percentile(grid, 100) == 100);
    std::vector<double> one{7};
    CHECK(percentile(one, 1) == 7);
    CHECK(percentile(one, 100) == 7);
    std::vector<double> three{3, 1, 2};
    CHECK(percentile(three, 50) == 2);
    std::vector<double> none;
    CHECK(code_of([&] { percentile(none, 50); }) == Errc::EmptySamples);
    CHECK_THROWS_AS(percentile(three, 0), Error);
    CHECK_THROWS_AS(percentile(three, 101), Error);
  }

  TEST_CASE("percentile matches the linear-scan oracle") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(0, 1000);
    for (int t = 0; t < 500; ++t) {
      std::vector<double> v(1 + rng() % 300);
      for (auto& x : v) x = u(rng);
      for (double p : {50.0, 99.0, 1.0, 100.0, 0.1 + (rng() % 999) / 10.0}) REQUIRE(percentile(v, p) == oracle::percentile(v, p));
    }
  }

  TEST_CASE("summarize") {
    std::vector<LatencySample> s{sample(100), sample(200), sample(300)};
    const auto r = summarize(s, TaskKind::TTS);
    CHECK(r.ttf_avg == 200);
    CHECK(r.ttf_p50 == 200);
    CHECK(r.ttf_p99 == 300);
    CHECK(r.ttf_min == 100);
    CHECK(r.ttf_max == 300);
    CHECK(r.n_requests == 3);
    CHECK(r.rtf_avg == doctest::Approx(0.5));
    CHECK(r.audio_avg_s == doctest::Approx(1.0));

    std::vector<LatencySample> one{sample(42)};
    one[0].task = TaskKind::ASR;
    const auto o = summarize(one, TaskKind::ASR);
    CHECK(o.ttf_avg == 42);
    CHECK(o.ttf_p50 == 42);
    CHECK(o.ttf_p99 == 42);

    std::vector<LatencySample> mixed{sample(1), sample(2)};
    mixed[1].task = TaskKind::ASR;
    CHECK_THROWS_AS(summarize(mixed, TaskKind::TTS), Error);
    std::vector<LatencySample> none;
    CHECK(code_of([&] { summarize(none, TaskKind::TTS); }) == Errc::EmptySamples);
  }

  TEST_CASE("requests are deterministic and sized by word count") {
    const auto a = make_request(TaskKind::TTS, 3, 9), b = make_request(TaskKind::TTS, 3, 9);
    CHECK(a.body.dump() == b.body.dump());
    CHECK(make_request(TaskKind::TTS, 4, 9).body.dump() != a.body.dump());
    for (std::size_t i = 0; i < 50; ++i) {
      const auto r = make_request(TaskKind::TTS, i, 1);
      const auto words = oracle::words(r.body["text"].get<std::string>());
      CHECK(words.size() >= 15);
      CHECK(words.size() <= 40);
      for (auto task : kAllTasks) CHECK_NOTHROW(serving::request_from_json(L(), task, make_request(task, i, 1).body));
    }
  }

  TEST_CASE("closed-loop load keeps exactly c in flight") {
    serving::Engine engine(tiny_model(), L());
    LocalEndpoint ep(engine);
    LoadOptions o;
    o.task = TaskKind::TTS;
    o.concurrency = 1;
    o.n_requests = 5;
    o.request = short_requests();
    LoadStats st;
    auto samples = run_load(ep, o, &st);
    CHECK(samples.size() == 5);
    CHECK(st.max_in_flight == 1);
    CHECK(st.max_started_plus_completed <= 5);

    o.concurrency = 4;
    o.n_requests = 12;
    samples = run_load(ep, o, &st);
    CHECK(samples.size() == 12);
    CHECK(st.max_in_flight == 4);
    CHECK(st.max_started_plus_completed <= 12);
    for (const auto& s : samples) {
      CHECK(s.ttf_ms <= s.total_ms);
      CHECK(s.audio_duration_s > 0);
      CHECK(s.status == "finished");
    }
    o.n_requests = 3;
    CHECK_THROWS_AS(run_load(ep, o), Error);
    engine.shutdown();
  }

  TEST_CASE("sweep and report formats") {
    serving::Engine engine(tiny_model(), L());
    LocalEndpoint ep(engine);
    SweepConfig cfg;
    cfg.task = TaskKind::ASR;
    cfg.concurrency = {1, 2, 4};
    cfg.requests_per_level = 4;
    cfg.request = short_requests();
    int levels = 0;
    const auto rows = sweep(ep, cfg, [&](const BenchReport&) { ++levels; });
    CHECK(levels == 3);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
      CHECK(r.ttf_p50 <= r.ttf_p99);
      CHECK(r.ttf_min <= r.ttf_avg);
      CHECK(r.ttf_avg <= r.ttf_max);
      CHECK(r.n_requests == 4);
    }
    const auto j = report_json(cfg, rows);
    CHECK(j["rows"].size() == 3);
    const auto md = markdown_table(rows);
    CHECK(md.find("TTFT") != std::string::npos);
    CHECK(std::count(md.begin(), md.end(), '\n') >= 5);
    CHECK(SweepConfig{}.concurrency == std::vector<int>{1, 5, 10, 20, 40, 80, 160});
    engine.shutdown();
  }

  TEST_CASE("unreachable endpoint") {
    CHECK(code_of([] { HttpEndpoint("127.0.0.1", 1); }) == Errc::EndpointUnreachable);
  }
}

TEST_SUITE("http") {
  TEST_CASE("streaming over HTTP matches the engine") {
    serving::Engine engine(tiny_model(), L());
    serving::HttpServer server(engine, {"127.0.0.1", 0, 16});
    const int port = server.start();
    REQUIRE(port > 0);

    httplib::Client cli("127.0.0.1", port);
    auto health = cli.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    const auto src = codec::encode("hello there", 4);
    nlohmann::json body{{"id", "r1"}, {"glm", src.glm}, {"bi", src.bi}, {"constrained", true}};
    auto res = cli.Post("/v1/asr", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    std::istringstream lines(res->body);
    std::string line, text;
    int n = 0;
    bool final = false;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto ev = nlohmann::json::parse(line);
      CHECK(ev["seq"] == n++);
      text += ev["payload"]["text"].get<std::string>();
      final = ev["final"].get<bool>();
    }
    CHECK(final);
    const auto item = make_infer_item(L(), TaskKind::ASR, src);
    const auto g = generate(*tiny_model(), L(), TaskKind::ASR, item.prompt, DecodePolicy{{}, true});
    // An untrained model emits arbitrary bytes; each one-byte chunk goes out
    // as JSON, with U+FFFD standing in for bytes that are not valid UTF-8.
    std::string expected;
    for (char c : g.result.text)
      expected += nlohmann::json::parse(nlohmann::json(std::string(1, c))
                                            .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace))
                      .get<std::string>();
    CHECK(n == static_cast<int>(g.result.text.size()) + 1);
    CHECK(text == expected);

    auto bad = cli.Post("/v1/tts", R"({"text": ""})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto junk = cli.Post("/v1/vc", "not json", "application/json");
    REQUIRE(junk);
    CHECK(junk->status == 400);

    HttpEndpoint ep("127.0.0.1", port);
    LoadOptions o;
    o.task = TaskKind::TTS;
    o.concurrency = 2;
    o.n_requests = 4;
    o.request = short_requests();
    const auto samples = run_load(ep, o);
    CHECK(samples.size() == 4);
    for (const auto& s : samples) CHECK(s.audio_duration_s > 0);
    server.stop();
    engine.shutdown();
  }
}
