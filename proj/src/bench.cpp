// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "gpa/codec.hpp"
#include "gpa/error.hpp"
#include "gpa/http_server.hpp"
#include "httplib.h"

namespace gpa::bench {

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double rtf(double generation_time_s, double audio_duration_s) {
  if (!(audio_duration_s > 0)) throw Error(Errc::ZeroDuration, "audio duration must be positive");
  return generation_time_s / audio_duration_s;
}

double percentile(std::span<const double> samples, double p) {
  if (samples.empty()) throw Error(Errc::EmptySamples, "percentile of no samples");
  if (!(p > 0 && p <= 100)) throw Error(Errc::InvalidArgument, "percentile must be in (0, 100]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // p*n is exact for integral p; the shave keeps 99*100/100 at rank 99.
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0 * (1 - 1e-12)));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

BenchReport summarize(std::span<const LatencySample> samples, TaskKind task) {
  if (samples.empty()) throw Error(Errc::EmptySamples, "nothing to summarize");
  std::vector<double> ttf, total, rtfs, audio;
  for (const auto& s : samples) {
    if (s.task != task)
      throw Error(Errc::InvalidArgument, "summarize needs samples of a single task");
    ttf.push_back(s.ttf_ms);
    total.push_back(s.total_ms);
    if (task != TaskKind::ASR) {
      audio.push_back(s.audio_duration_s);
      if (s.audio_duration_s > 0) rtfs.push_back(rtf(s.generation_time_s, s.audio_duration_s));
    }
  }
  BenchReport r;
  r.task = task;
  r.n_requests = samples.size();
  r.ttf_avg = mean(ttf);
  r.ttf_p50 = percentile(ttf, 50);
  r.ttf_p99 = percentile(ttf, 99);
  r.ttf_min = *std::min_element(ttf.begin(), ttf.end());
  r.ttf_max = *std::max_element(ttf.begin(), ttf.end());
  r.total_avg_ms = mean(total);
  if (!rtfs.empty()) {
    r.rtf_avg = mean(rtfs);
    r.rtf_p50 = percentile(rtfs, 50);
    r.rtf_p99 = percentile(rtfs, 99);
  }
  if (!audio.empty()) r.audio_avg_s = mean(audio);
  return r;
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json j{{"task", task_name(task)},
                   {"concurrency", concurrency},
                   {"n_requests", n_requests},
                   {"ttf_ms", {{"avg", ttf_avg}, {"p50", ttf_p50}, {"p99", ttf_p99}, {"min", ttf_min}, {"max", ttf_max}}},
                   {"total_ms_avg", total_avg_ms}};
  if (task != TaskKind::ASR) {
    j["rtf"] = {{"avg", rtf_avg}, {"p50", rtf_p50}, {"p99", rtf_p99}};
    j["audio_duration_s_avg"] = audio_avg_s;
  }
  return j;
}

BenchRequest make_request(TaskKind task, std::size_t index, std::uint64_t seed,
                          const RequestOptions& opts) {
  if (opts.min_words < 1 || opts.max_words < opts.min_words || opts.speakers < 2)
    throw Error(Errc::InvalidArgument, "bad request options");
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                   static_cast<std::uint32_t>(task)};
  std::mt19937_64 rng(ss);
  const auto& words = codec::word_list();
  const int n_words = std::uniform_int_distribution<int>(opts.min_words, opts.max_words)(rng);
  std::string text;
  for (int w = 0; w < n_words; ++w) {
    if (w) text.push_back(' ');
    text += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
  }
  const int speaker = std::uniform_int_distribution<int>(0, opts.speakers - 1)(rng);
  BenchRequest req;
  req.task = task;
  char id[48];
  std::snprintf(id, sizeof id, "%s-%06zu", std::string(task_name(task)).c_str(), index);
  req.id = id;
  req.body = {{"id", req.id}, {"constrained", opts.constrained}};
  if (task == TaskKind::TTS) {
    req.body["text"] = text;
    req.body["speaker"] = speaker;
  } else {
    const auto s = codec::encode(text, speaker);
    req.body["glm"] = s.glm;
    req.body["bi"] = s.bi;
    if (task == TaskKind::VC) {
      const int t = std::uniform_int_distribution<int>(0, opts.speakers - 2)(rng);
      req.body["target_speaker"] = t >= speaker ? t + 1 : t;
    }
  }
  return req;
}

namespace {

// Per-request measurement shared by both endpoint kinds.
struct Tracker {
  LatencySample s;
  Clock::time_point t0 = Clock::now();
  bool first = true;
  std::size_t acoustic = 0;

  void on_chunk(std::size_t acoustic_tokens, bool final, const std::string& status) {
    const double t = ms_since(t0);
    if (first) {
      s.ttf_ms = t;
      first = false;
    }
    acoustic += acoustic_tokens;
    if (final) {
      s.total_ms = t;
      s.status = status;
    }
  }
  LatencySample finish() {
    if (s.task != TaskKind::ASR) {
      s.audio_duration_s = codec::audio_duration(acoustic);
      s.generation_time_s = s.total_ms / 1000.0;
    }
    return s;
  }
};

}  // namespace

LatencySample LocalEndpoint::execute(const BenchRequest& req) {
  Tracker tr;
  tr.s.id = req.id;
  tr.s.task = req.task;
  const auto id = engine_.submit(serving::request_from_json(engine_.layout(), req.task, req.body));
  for (;;) {
    auto next = engine_.next_chunk(id, std::chrono::milliseconds(1000));
    if (std::holds_alternative<serving::Done>(next)) break;
    if (std::holds_alternative<serving::Pending>(next)) continue;
    const auto& c = std::get<serving::StreamChunk>(next);
    tr.on_chunk(c.payload.acoustic.size(), c.final, c.final ? std::string(serving::state_name(c.status)) : "");
    if (c.final) break;
  }
  return tr.finish();
}

HttpEndpoint::HttpEndpoint(std::string host, int port) : host_(std::move(host)), port_(port) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(std::chrono::seconds(2));
  auto res = cli.Get("/v1/health");
  if (!res || res->status != 200)
    throw Error(Errc::EndpointUnreachable,
                host_ + ":" + std::to_string(port_) +
                    (res ? " answered " + std::to_string(res->status) : " " + httplib::to_string(res.error())));
}

LatencySample HttpEndpoint::execute(const BenchRequest& req) {
  Tracker tr;
  tr.s.id = req.id;
  tr.s.task = req.task;
  std::string buffer;
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(std::chrono::seconds(5));
  cli.set_read_timeout(std::chrono::seconds(3600));
  httplib::Request hreq;
  hreq.method = "POST";
  hreq.path = "/v1/" + std::string(task_name(req.task));
  hreq.body = req.body.dump();
  hreq.set_header("Content-Type", "application/json");
  std::string error_body;
  hreq.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
    buffer.append(data, len);
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("seq")) {
        error_body = line;
        continue;
      }
      const auto& p = j["payload"];
      const std::size_t ac = p.contains("acoustic") ? p["acoustic"].size() : 0;
      const bool final = j.value("final", false);
      tr.on_chunk(ac, final, j.value("status", ""));
    }
    return true;
  };
  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  if (!cli.send(hreq, res, err))
    throw Error(Errc::EndpointUnreachable, host_ + ":" + std::to_string(port_) + " " + httplib::to_string(err));
  if (res.status != 200)
    throw Error(Errc::InvalidArgument, "server answered " + std::to_string(res.status) + ": " + error_body);
  if (tr.first) throw Error(Errc::Parse, "stream ended without chunks");
  return tr.finish();
}

std::vector<LatencySample> run_load(Endpoint& endpoint, const LoadOptions& opts, LoadStats* stats) {
  if (opts.concurrency < 1) throw Error(Errc::InvalidArgument, "concurrency must be at least 1");
  if (opts.n_requests < static_cast<std::size_t>(opts.concurrency))
    throw Error(Errc::InvalidArgument, "n_requests must be at least the concurrency");
  std::vector<BenchRequest> requests;
  for (std::size_t i = 0; i < opts.n_requests; ++i)
    requests.push_back(make_request(opts.task, i, opts.seed, opts.request));

  std::vector<LatencySample> samples(opts.n_requests);
  std::atomic<std::size_t> next{0};
  std::mutex mu;  // stats and first error
  int in_flight = 0;
  std::size_t completed = 0;
  LoadStats local;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard l(mu);
        if (error) return;
        i = next++;
        if (i >= opts.n_requests) return;
        ++in_flight;
        local.max_in_flight = std::max(local.max_in_flight, in_flight);
        local.max_started_plus_completed =
            std::max(local.max_started_plus_completed, completed + static_cast<std::size_t>(in_flight));
      }
      try {
        samples[i] = endpoint.execute(requests[i]);
      } catch (...) {
        std::lock_guard l(mu);
        if (!error) error = std::current_exception();
        --in_flight;
        return;
      }
      std::lock_guard l(mu);
      --in_flight;
      ++completed;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < opts.concurrency; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  if (stats) *stats = local;
  return samples;
}

nlohmann::json SweepConfig::to_json() const {
  return {{"task", task_name(task)},
          {"concurrency", concurrency},
          {"requests_per_level", requests_per_level},
          {"seed", seed},
          {"min_words", request.min_words},
          {"max_words", request.max_words},
          {"speakers", request.speakers},
          {"constrained", request.constrained}};
}

std::vector<BenchReport> sweep(Endpoint& endpoint, const SweepConfig& cfg,
                               const std::function<void(const BenchReport&)>& on_level) {
  std::vector<BenchReport> rows;
  for (int c : cfg.concurrency) {
    LoadOptions lo;
    lo.task = cfg.task;
    lo.concurrency = c;
    lo.n_requests = std::max(cfg.requests_per_level, static_cast<std::size_t>(std::max(c, 1)));
    lo.seed = cfg.seed;
    lo.request = cfg.request;
    const auto samples = run_load(endpoint, lo);
    BenchReport r = summarize(samples, cfg.task);
    r.concurrency = c;
    rows.push_back(r);
    if (on_level) on_level(r);
  }
  return rows;
}

nlohmann::json report_json(const SweepConfig& cfg, const std::vector<BenchReport>& rows) {
  nlohmann::json j{{"config", cfg.to_json()}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) j["rows"].push_back(r.to_json());
  return j;
}

std::string markdown_table(const std::vector<BenchReport>& rows) {
  std::ostringstream o;
  char buf[256];
  const bool asr = !rows.empty() && rows.front().task == TaskKind::ASR;
  if (asr) {
    o << "| Concurrency | Avg TTFT (ms) | P50 TTFT (ms) | P99 TTFT (ms) | Avg Total (ms) |\n"
      << "|---:|---:|---:|---:|---:|\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "| %d | %.1f | %.1f | %.1f | %.1f |\n", r.concurrency, r.ttf_avg,
                    r.ttf_p50, r.ttf_p99, r.total_avg_ms);
      o << buf;
    }
  } else {
    o << "| Concurrency | Avg TTFC (ms) | P50 TTFC (ms) | P99 TTFC (ms) | Avg RTF | P50 RTF | P99 RTF | "
         "Audio Dur (s) |\n"
      << "|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "| %d | %.1f | %.1f | %.1f | %.3f | %.3f | %.3f | %.2f |\n",
                    r.concurrency, r.ttf_avg, r.ttf_p50, r.ttf_p99, r.rtf_avg, r.rtf_p50, r.rtf_p99,
                    r.audio_avg_s);
      o << buf;
    }
  }
  return o.str();
}

}  // namespace gpa::bench
