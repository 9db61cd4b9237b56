// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/serving.hpp"

#include <algorithm>
#include <atomic>

#include "gpa/error.hpp"
#include "gpa/inference.hpp"

namespace gpa::serving {

std::string_view state_name(SessionState s) {
  switch (s) {
    case SessionState::Queued: return "queued";
    case SessionState::Prefilling: return "prefilling";
    case SessionState::Decoding: return "decoding";
    case SessionState::Finished: return "finished";
    case SessionState::Cancelled: return "cancelled";
    case SessionState::Failed: return "failed";
  }
  return "?";
}

int default_chunk_size(TaskKind task) { return task == TaskKind::ASR ? 1 : 8; }

namespace {

bool terminal(SessionState s) {
  return s == SessionState::Finished || s == SessionState::Cancelled || s == SessionState::Failed;
}

// Units [from, to) of `r` as a standalone result.
TaskResult slice(const TaskResult& r, std::size_t from, std::size_t to) {
  TaskResult out;
  out.task = r.task;
  switch (r.task) {
    case TaskKind::ASR:
      out.text = r.text.substr(from, to - from);
      break;
    case TaskKind::TTS:
      out.glm.assign(r.glm.begin() + from, r.glm.begin() + to);
      out.bi.assign(r.bi.begin() + from, r.bi.begin() + to);
      [[fallthrough]];
    case TaskKind::VC:
      out.acoustic.assign(r.acoustic.begin() + 2 * from, r.acoustic.begin() + 2 * to);
      break;
  }
  return out;
}

}  // namespace

struct Engine::Session {
  SessionId id = 0;
  Request req;

  // Decode-loop only.
  std::optional<model::DecodeCache<float>> cache;
  std::vector<float> logits;
  std::optional<StreamParser> parser;
  std::optional<model::Sampler> sampler;
  std::size_t expected_units = 0;
  std::size_t cap = 0;
  std::size_t chunked_units = 0;

  std::atomic<bool> cancel_requested{false};

  // Shared with clients, under m.
  mutable std::mutex m;
  std::condition_variable cv;
  SessionState state = SessionState::Queued;
  std::vector<TokenId> emitted;
  Timing timing;
  std::deque<StreamChunk> chunks;
  std::uint64_t next_seq = 0;
  bool final_enqueued = false;
  bool final_consumed = false;
};

Engine::Engine(std::shared_ptr<const model::Transformer<float>> model, VocabLayout layout,
               EngineOptions opts)
    : model_(std::move(model)), layout_(std::move(layout)), opts_(opts),
      t0_(std::chrono::steady_clock::now()) {
  if (!model_) throw Error(Errc::InvalidArgument, "engine needs a model");
  if (opts_.max_batch < 1) throw Error(Errc::InvalidArgument, "max_batch must be at least 1");
  if (model_->config().vocab_size != layout_.total())
    throw Error(Errc::LayoutMismatch, "model vocabulary does not match the layout");
  if (opts_.background) thread_ = std::thread([this] { loop(); });
}

Engine::~Engine() { shutdown(); }

double Engine::now_ms() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
}

SessionId Engine::submit(Request req) {
  if (auto v = validate_sequence(layout_, std::span<const TokenId>(req.prompt.ids), prompt_grammar(req.task)))
    throw Error(Errc::InvalidPrompt, "token " + std::to_string(v->index) + ": " + v->message);
  if (static_cast<int>(req.prompt.size()) >= model_->config().max_seq_len)
    throw Error(Errc::InvalidPrompt, "prompt of " + std::to_string(req.prompt.size()) +
                                         " tokens does not fit the context");
  if (req.chunk_size < 0) throw Error(Errc::InvalidPrompt, "negative chunk_size");
  if (req.chunk_size == 0) req.chunk_size = default_chunk_size(req.task);
  auto s = std::make_shared<Session>();
  s->req = std::move(req);
  {
    std::lock_guard l(mu_);
    if (stop_) throw Error(Errc::EngineShutdown, "engine is shut down");
    s->id = next_id_++;
    s->timing.enqueue = now_ms();
    sessions_[s->id] = s;
    incoming_.push_back(s);
  }
  wake_.notify_all();
  return s->id;
}

std::shared_ptr<Engine::Session> Engine::find(SessionId id) const {
  std::lock_guard l(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::UnknownSession, "session " + std::to_string(id));
  return it->second;
}

void Engine::cancel(SessionId id) {
  auto s = find(id);
  {
    std::lock_guard l(s->m);
    if (terminal(s->state) || s->cancel_requested)
      throw Error(Errc::AlreadyFinished, "session " + std::to_string(id) + " is " +
                                             std::string(state_name(s->state)));
    s->cancel_requested = true;
  }
  wake_.notify_all();
}

SessionInfo Engine::info(SessionId id) const {
  auto s = find(id);
  std::lock_guard l(s->m);
  return {s->req.id, s->req.task, s->state, s->emitted, s->timing};
}

NextChunk Engine::next_chunk(SessionId id, std::chrono::milliseconds timeout) {
  auto s = find(id);
  std::unique_lock l(s->m);
  s->cv.wait_for(l, timeout, [&] { return !s->chunks.empty() || s->final_consumed; });
  if (!s->chunks.empty()) {
    StreamChunk c = std::move(s->chunks.front());
    s->chunks.pop_front();
    if (c.final) s->final_consumed = true;
    return c;
  }
  if (s->final_consumed) return Done{};
  return Pending{};
}

std::size_t Engine::queued() const {
  std::lock_guard l(mu_);
  return queued_count_ + incoming_.size();
}

std::size_t Engine::active() const {
  std::lock_guard l(mu_);
  return active_count_;
}

void Engine::emit(Session& s, bool final, SessionState status, std::string error) {
  TaskResult payload;
  if (s.parser) {
    const TaskResult full = final ? s.parser->finish() : s.parser->partial();
    const std::size_t units = full.units();
    payload = slice(full, std::min(s.chunked_units, units), units);
    s.chunked_units = std::max(s.chunked_units, units);
  } else {
    payload.task = s.req.task;
  }
  {
    std::lock_guard l(s.m);
    const double t = now_ms();
    StreamChunk c{s.id, s.req.id, s.next_seq++, std::move(payload), final, t, status, std::move(error)};
    if (!s.timing.first_emit) s.timing.first_emit = t;
    s.timing.last_emit = t;
    s.chunks.push_back(std::move(c));
    if (final) {
      s.final_enqueued = true;
      s.state = status;
    }
  }
  s.cv.notify_all();
}

void Engine::retire(Session& s, SessionState status, std::string error) {
  emit(s, true, status, std::move(error));
  s.cache.reset();
  s.logits.clear();
  s.logits.shrink_to_fit();
}

int Engine::scheduler_step() {
  if (opts_.background) throw Error(Errc::InvalidArgument, "scheduler_step is for manual engines");
  return run_step();
}

int Engine::run_step() {
  std::lock_guard step_lock(step_mu_);
  {
    std::lock_guard l(mu_);
    while (!incoming_.empty()) {
      queue_.push_back(std::move(incoming_.front()));
      incoming_.pop_front();
    }
  }

  // Cancellations free their slots before admission.
  auto drop_cancelled = [&](auto& container) {
    for (auto& s : container)
      if (s->cancel_requested) retire(*s, SessionState::Cancelled);
    container.erase(std::remove_if(container.begin(), container.end(),
                                   [](const auto& s) { return s->cancel_requested.load(); }),
                    container.end());
  };
  drop_cancelled(queue_);
  drop_cancelled(active_);

  const auto& model = *model_;
  while (static_cast<int>(active_.size()) < opts_.max_batch && !queue_.empty()) {
    auto s = std::move(queue_.front());
    queue_.pop_front();
    {
      std::lock_guard l(s->m);
      s->state = SessionState::Prefilling;
      s->timing.prefill_start = now_ms();
    }
    try {
      s->parser.emplace(layout_, s->req.task);
      s->sampler.emplace(s->req.sampler);
      s->expected_units = expected_units(layout_, s->req.task, s->req.prompt);
      s->cap = length_cap(layout_, s->req.task, s->req.prompt);
      s->cache = model.new_cache();
      auto logits = model.forward(s->req.prompt.ids, *s->cache, true);
      s->logits.assign(logits.data(), logits.data() + logits.cols());
    } catch (const std::exception& e) {
      retire(*s, SessionState::Failed, e.what());
      continue;
    }
    {
      std::lock_guard l(s->m);
      s->state = SessionState::Decoding;
    }
    active_.push_back(std::move(s));
  }

  const TokenId eos = layout_.control(Control::EOS);
  const int max_len = model.config().max_seq_len;
  int advanced = 0;
  std::vector<Session*> cont;
  std::vector<int> next_tokens;
  std::vector<bool> done(active_.size(), false);
  for (std::size_t i = 0; i < active_.size(); ++i) {
    Session& s = *active_[i];
    try {
      model::AllowedRanges allowed;
      if (s.req.constrained) allowed = allowed_next(layout_, *s.parser, s.expected_units);
      const int tok = s.sampler->sample(std::span<const float>(s.logits), allowed);
      {
        std::lock_guard l(s.m);
        s.emitted.push_back(tok);
      }
      ++advanced;
      const auto ev = s.parser->push(tok);
      if (ev == StreamParser::Event::End || tok == eos) {
        retire(s, SessionState::Finished);
        done[i] = true;
        continue;
      }
      if (s.parser->units() - s.chunked_units >= static_cast<std::size_t>(s.req.chunk_size))
        emit(s, false, SessionState::Decoding);
      if (s.emitted.size() >= s.cap || s.cache->length >= max_len) {
        retire(s, SessionState::Finished);  // truncated
        done[i] = true;
        continue;
      }
      cont.push_back(&s);
      next_tokens.push_back(tok);
    } catch (const std::exception& e) {
      retire(s, SessionState::Failed, e.what());
      done[i] = true;
    }
  }

  if (!cont.empty()) {
    std::vector<model::DecodeCache<float>*> caches;
    for (auto* s : cont) caches.push_back(&*s->cache);
    try {
      auto logits = model.forward_batch(next_tokens, caches);
      for (std::size_t r = 0; r < cont.size(); ++r)
        cont[r]->logits.assign(logits.row(r).data(), logits.row(r).data() + logits.cols());
    } catch (const std::exception& e) {
      for (std::size_t i = 0; i < active_.size(); ++i)
        if (!done[i]) {
          retire(*active_[i], SessionState::Failed, e.what());
          done[i] = true;
        }
    }
  }

  std::vector<std::shared_ptr<Session>> still;
  for (std::size_t i = 0; i < active_.size(); ++i)
    if (!done[i]) still.push_back(std::move(active_[i]));
  active_ = std::move(still);
  {
    std::lock_guard l(mu_);
    queued_count_ = queue_.size();
    active_count_ = active_.size();
  }
  return advanced;
}

void Engine::loop() {
  for (;;) {
    {
      std::unique_lock l(mu_);
      wake_.wait(l, [&] { return stop_ || !incoming_.empty() || queued_count_ + active_count_ > 0; });
      if (stop_) return;
    }
    run_step();
  }
}

void Engine::shutdown() {
  {
    std::lock_guard l(mu_);
    if (stop_ && !thread_.joinable()) return;
    stop_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
  std::lock_guard step_lock(step_mu_);
  {
    std::lock_guard l(mu_);
    while (!incoming_.empty()) {
      queue_.push_back(std::move(incoming_.front()));
      incoming_.pop_front();
    }
  }
  for (auto& s : queue_) retire(*s, SessionState::Cancelled, "shutdown");
  for (auto& s : active_) retire(*s, SessionState::Cancelled, "shutdown");
  queue_.clear();
  active_.clear();
  std::lock_guard l(mu_);
  queued_count_ = active_count_ = 0;
}

}  // namespace gpa::serving
