// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/http_server.hpp"

#include "gpa/codec.hpp"
#include "gpa/error.hpp"
#include "httplib.h"

namespace gpa::serving {

namespace {

std::vector<int> int_array(const nlohmann::json& body, const char* key) {
  if (!body.at(key).is_array()) throw Error(Errc::Parse, std::string(key) + " must be an array");
  return body.at(key).get<std::vector<int>>();
}

codec::StreamSet source_from(const nlohmann::json& body, TaskKind task) {
  const bool has_text = body.contains("text");
  if (task != TaskKind::TTS && body.contains("glm") && body.contains("bi")) {
    codec::StreamSet s;
    s.glm = int_array(body, "glm");
    s.bi = int_array(body, "bi");
    return s;
  }
  if (!has_text) throw Error(Errc::MissingInput, "request needs text or glm/bi streams");
  const std::string text = body.at("text").get<std::string>();
  if (body.contains("speaker")) return codec::encode(text, body.at("speaker").get<int>());
  if (task == TaskKind::TTS && body.contains("global")) {
    codec::StreamSet s;
    s.text = text;
    s.global = int_array(body, "global");
    return s;
  }
  throw Error(Errc::MissingInput, "request needs speaker or global tokens");
}

}  // namespace

Request request_from_json(const VocabLayout& layout, TaskKind task, const nlohmann::json& body) {
  try {
    if (!body.is_object()) throw Error(Errc::Parse, "request body must be a JSON object");
    Request req;
    req.task = task;
    req.id = body.value("id", std::string());
    req.chunk_size = body.value("chunk_size", 0);
    req.constrained = body.value("constrained", false);
    if (body.contains("sampler")) req.sampler = model::SamplerConfig::from_json(body.at("sampler"));
    codec::StreamSet source = source_from(body, task);
    if (task == TaskKind::VC) {
      std::vector<int> g;
      if (body.contains("target_global"))
        g = int_array(body, "target_global");
      else if (body.contains("target_speaker"))
        g = codec::global_tokens(body.at("target_speaker").get<int>());
      else
        throw Error(Errc::MissingInput, "vc needs target_speaker or target_global");
      req.prompt = compose_prompt(layout, task, source, &g);
    } else {
      req.prompt = compose_prompt(layout, task, source);
    }
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, e.what());
  }
}

nlohmann::json payload_to_json(const TaskResult& r) {
  switch (r.task) {
    case TaskKind::ASR: return {{"text", r.text}};
    case TaskKind::TTS: return {{"glm", r.glm}, {"bi", r.bi}, {"acoustic", r.acoustic}};
    case TaskKind::VC: return {{"acoustic", r.acoustic}};
  }
  return nlohmann::json::object();
}

nlohmann::json chunk_to_json(const StreamChunk& c) {
  nlohmann::json j{{"seq", c.seq},
                   {"payload", payload_to_json(c.payload)},
                   {"final", c.final},
                   {"t_emit_ms", c.t_emit_ms}};
  if (c.final) {
    j["status"] = state_name(c.status);
    if (!c.error.empty()) j["error"] = c.error;
  }
  if (!c.request_id.empty()) j["id"] = c.request_id;
  return j;
}

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::EngineShutdown: return 503;
    case Errc::Io: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, const Error& e) {
  res.status = http_status(e.code());
  res.set_content(nlohmann::json{{"error", errc_name(e.code())}, {"message", e.what()}}.dump() + "\n",
                  "application/json");
}

}  // namespace

HttpServer::HttpServer(Engine& engine, ServerOptions opts)
    : impl_(std::make_unique<Impl>()), engine_(engine), opts_(std::move(opts)) {
  auto& svr = impl_->server;
  const int threads = std::max(1, opts_.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };

  svr.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json{{"status", "ok"},
                                   {"queued", engine_.queued()},
                                   {"active", engine_.active()},
                                   {"max_batch", engine_.options().max_batch},
                                   {"vocab", engine_.layout().fingerprint()}}
                            .dump() + "\n",
                    "application/json");
  });

  for (TaskKind task : kAllTasks) {
    const std::string path = "/v1/" + std::string(task_name(task));
    svr.Post(path, [this, task](const httplib::Request& req, httplib::Response& res) {
      SessionId id = 0;
      try {
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::Parse, e.what());
        }
        id = engine_.submit(request_from_json(engine_.layout(), task, body));
      } catch (const Error& e) {
        send_error(res, e);
        return;
      }
      auto finished = std::make_shared<bool>(false);
      res.set_chunked_content_provider(
          "application/x-ndjson",
          [this, id, finished](std::size_t, httplib::DataSink& sink) {
            for (;;) {
              auto next = engine_.next_chunk(id, std::chrono::milliseconds(200));
              if (std::holds_alternative<Pending>(next)) {
                if (!sink.is_writable()) return false;
                continue;
              }
              if (std::holds_alternative<Done>(next)) {
                *finished = true;
                sink.done();
                return true;
              }
              const auto& chunk = std::get<StreamChunk>(next);
              const std::string line =
                  chunk_to_json(chunk).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
              if (!sink.write(line.data(), line.size())) return false;
              if (chunk.final) {
                *finished = true;
                sink.done();
                return true;
              }
            }
          },
          [this, id, finished](bool) {
            if (*finished) return;
            try {
              engine_.cancel(id);
            } catch (const Error&) {
            }
          });
    });
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& svr = impl_->server;
  if (opts_.port == 0)
    port_ = svr.bind_to_any_port(opts_.host);
  else
    port_ = svr.bind_to_port(opts_.host, opts_.port) ? opts_.port : -1;
  if (port_ <= 0)
    throw Error(Errc::Io, "cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
  thread_ = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return port_;
}

void HttpServer::run() {
  auto& svr = impl_->server;
  if (!svr.listen(opts_.host, opts_.port))
    throw Error(Errc::Io, "cannot listen on " + opts_.host + ":" + std::to_string(opts_.port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace gpa::serving
