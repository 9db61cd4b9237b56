// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <thread>

#include "gpa/serving.hpp"
#include "json.hpp"

namespace gpa::serving {

// Request body fields, by task:
//   tts: text, and speaker or global[4]
//   asr: glm[] and bi[] (partition-relative), or text + speaker to mock-encode
//   vc:  as asr, plus target_speaker or target_global[4]
// Common: id, chunk_size, sampler {kind, top_k, temperature, seed}, constrained.
Request request_from_json(const VocabLayout& layout, TaskKind task, const nlohmann::json& body);

nlohmann::json payload_to_json(const TaskResult& r);

// {seq, payload, final, t_emit_ms}, plus status/error on the final event.
nlohmann::json chunk_to_json(const StreamChunk& c);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  int threads = 256;  // connection handlers; bounds concurrent streams
};

// POST /v1/tts, /v1/asr, /v1/vc stream line-delimited JSON events.
// GET /v1/health reports the engine queue.
class HttpServer {
 public:
  HttpServer(Engine& engine, ServerOptions opts);
  ~HttpServer();

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Engine& engine_;
  ServerOptions opts_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace gpa::serving
