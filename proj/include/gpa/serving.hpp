// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "gpa/composer.hpp"
#include "gpa/model.hpp"
#include "gpa/train.hpp"

namespace gpa::serving {

using SessionId = std::uint64_t;

enum class SessionState { Queued, Prefilling, Decoding, Finished, Cancelled, Failed };
std::string_view state_name(SessionState s);

// Default chunk sizes: 8 frames for TTS/VC (0.32 s of audio), 1 token for ASR.
int default_chunk_size(TaskKind task);

struct Request {
  std::string id;
  TaskKind task = TaskKind::TTS;
  TokenSeq prompt;
  model::SamplerConfig sampler;
  int chunk_size = 0;  // 0 = default_chunk_size(task)
  bool constrained = false;
};

// Payload holds only the units produced since the previous chunk.
struct StreamChunk {
  SessionId session = 0;
  std::string request_id;
  std::uint64_t seq = 0;
  TaskResult payload;
  bool final = false;
  double t_emit_ms = 0;
  SessionState status = SessionState::Decoding;  // terminal state on the final chunk
  std::string error;
};

struct Pending {};
struct Done {};
using NextChunk = std::variant<StreamChunk, Pending, Done>;

struct Timing {
  std::optional<double> enqueue, prefill_start, first_emit, last_emit;
};

struct SessionInfo {
  std::string request_id;
  TaskKind task = TaskKind::TTS;
  SessionState state = SessionState::Queued;
  std::vector<TokenId> emitted;  // target tokens so far
  Timing timing;
};

struct EngineOptions {
  int max_batch = 32;
  // Run the decode loop on an internal thread. When false the caller drives
  // it with scheduler_step().
  bool background = true;
};

class Engine {
 public:
  Engine(std::shared_ptr<const model::Transformer<float>> model, VocabLayout layout,
         EngineOptions opts = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Non-blocking. Throws EngineShutdown or InvalidPrompt.
  SessionId submit(Request req);

  // Admits queued sessions FIFO up to max_batch, then advances every active
  // session by one token. Returns the number advanced. Manual mode only.
  int scheduler_step();

  // Waits up to `timeout` for the next chunk. Done once the final chunk has
  // been consumed. Throws UnknownSession.
  NextChunk next_chunk(SessionId id, std::chrono::milliseconds timeout);

  // Takes effect at the start of the next scheduler step. Throws
  // UnknownSession or AlreadyFinished.
  void cancel(SessionId id);

  SessionInfo info(SessionId id) const;

  // Stops the loop; unfinished sessions end Cancelled with error "shutdown".
  void shutdown();

  std::size_t queued() const;
  std::size_t active() const;
  double now_ms() const;
  const VocabLayout& layout() const { return layout_; }
  const model::Transformer<float>& model() const { return *model_; }
  const EngineOptions& options() const { return opts_; }

 private:
  struct Session;

  int run_step();
  void loop();
  void emit(Session& s, bool final, SessionState status, std::string error = {});
  void retire(Session& s, SessionState status, std::string error = {});
  std::shared_ptr<Session> find(SessionId id) const;

  std::shared_ptr<const model::Transformer<float>> model_;
  VocabLayout layout_;
  EngineOptions opts_;
  std::chrono::steady_clock::time_point t0_;

  mutable std::mutex mu_;  // sessions_, incoming_, stop_, next_id_
  std::condition_variable wake_;
  std::unordered_map<SessionId, std::shared_ptr<Session>> sessions_;
  std::deque<std::shared_ptr<Session>> incoming_;
  SessionId next_id_ = 1;
  bool stop_ = false;

  // Owned by the decode loop.
  std::deque<std::shared_ptr<Session>> queue_;
  std::vector<std::shared_ptr<Session>> active_;
  std::size_t queued_count_ = 0, active_count_ = 0;  // mirrors for observers (under mu_)

  std::mutex step_mu_;  // serializes scheduler steps
  std::thread thread_;
};

}  // namespace gpa::serving
