// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gpa/composer.hpp"
#include "gpa/serving.hpp"
#include "json.hpp"

namespace gpa::bench {

struct LatencySample {
  std::string id;
  TaskKind task = TaskKind::TTS;
  double ttf_ms = 0;    // submit to first chunk (TTFC) or first token (TTFT)
  double total_ms = 0;  // submit to final chunk
  double audio_duration_s = 0;   // TTS/VC
  double generation_time_s = 0;  // TTS/VC
  std::string status = "finished";
};

struct BenchReport {
  TaskKind task = TaskKind::TTS;
  int concurrency = 0;
  std::size_t n_requests = 0;
  double ttf_avg = 0, ttf_p50 = 0, ttf_p99 = 0;
  double rtf_avg = 0, rtf_p50 = 0, rtf_p99 = 0;  // TTS/VC
  double total_avg_ms = 0;
  double audio_avg_s = 0;  // TTS/VC
  double ttf_min = 0, ttf_max = 0;
  nlohmann::json to_json() const;
};

// generation / audio. Throws ZeroDuration when audio_duration_s <= 0.
double rtf(double generation_time_s, double audio_duration_s);

// Nearest rank: sorted[ceil(p/100 * n) - 1]. Throws EmptySamples; p must be
// in (0, 100].
double percentile(std::span<const double> samples, double p);

// Throws EmptySamples, or InvalidArgument when samples mix tasks.
BenchReport summarize(std::span<const LatencySample> samples, TaskKind task);

// Deterministic request payload for index i: 15-40 words from the mock word
// list, mock-encoded for ASR/VC. Body uses the HTTP request format.
struct BenchRequest {
  std::string id;
  TaskKind task = TaskKind::TTS;
  nlohmann::json body;
};

struct RequestOptions {
  int min_words = 15;
  int max_words = 40;
  int speakers = 64;
  bool constrained = true;
};

BenchRequest make_request(TaskKind task, std::size_t index, std::uint64_t seed,
                          const RequestOptions& opts = {});

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  // Blocks until the final chunk and returns the measured timings.
  virtual LatencySample execute(const BenchRequest& req) = 0;
};

class LocalEndpoint : public Endpoint {
 public:
  explicit LocalEndpoint(serving::Engine& engine) : engine_(engine) {}
  LatencySample execute(const BenchRequest& req) override;

 private:
  serving::Engine& engine_;
};

// Throws EndpointUnreachable when the health check fails, and from execute()
// when the connection drops.
class HttpEndpoint : public Endpoint {
 public:
  HttpEndpoint(std::string host, int port);
  LatencySample execute(const BenchRequest& req) override;

 private:
  std::string host_;
  int port_;
};

struct LoadOptions {
  TaskKind task = TaskKind::TTS;
  int concurrency = 1;
  std::size_t n_requests = 1;
  std::uint64_t seed = 0;
  RequestOptions request;
};

struct LoadStats {
  int max_in_flight = 0;
  std::size_t max_started_plus_completed = 0;  // completed + in flight, peak
};

// Closed loop: exactly `concurrency` requests in flight until n complete.
// Samples come back in request-index order.
std::vector<LatencySample> run_load(Endpoint& endpoint, const LoadOptions& opts,
                                    LoadStats* stats = nullptr);

struct SweepConfig {
  TaskKind task = TaskKind::TTS;
  std::vector<int> concurrency{1, 5, 10, 20, 40, 80, 160};
  std::size_t requests_per_level = 64;  // each level runs max(this, c)
  std::uint64_t seed = 0;
  RequestOptions request;
  nlohmann::json to_json() const;
};

std::vector<BenchReport> sweep(Endpoint& endpoint, const SweepConfig& cfg,
                               const std::function<void(const BenchReport&)>& on_level = {});

nlohmann::json report_json(const SweepConfig& cfg, const std::vector<BenchReport>& rows);

// Table layout: TTS columns Concurrency | Avg TTFC | P50 | P99 | Avg RTF |
// P50 | P99 | Audio Dur; ASR columns Concurrency | Avg TTFT | P50 | P99 | Avg Total.
std::string markdown_table(const std::vector<BenchReport>& rows);

}  // namespace gpa::bench
