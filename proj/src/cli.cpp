// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "gpa/bench.hpp"
#include "gpa/checkpoint.hpp"
#include "gpa/codec.hpp"
#include "gpa/curation.hpp"
#include "gpa/error.hpp"
#include "gpa/http_server.hpp"
#include "gpa/inference.hpp"
#include "gpa/serving.hpp"
#include "gpa/train.hpp"

namespace gpa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int verbosity() {
  const char* v = std::getenv("GPA_VERBOSE");
  return v ? std::atoi(v) : 1;
}

void log(const std::string& msg) {
  if (verbosity() > 0) std::cerr << msg << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
}

// Effective config (re-readable with --config) and the result summary.
struct RunRecord {
  const CLI::App* sub = nullptr;
  fs::path dir;

  void begin() const {
    fs::create_directories(dir);
    // Keys carry the subcommand prefix so the echo reads back via --config.
    std::istringstream in(sub->config_to_str(true, false));
    std::string line, text;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line[0] == '[') continue;
      text += sub->get_name() + "." + line + "\n";
    }
    write_text(dir / "config.toml", text);
  }
  void finish(const json& summary) const {
    write_text(dir / "summary.json", summary.dump(2) + "\n");
  }
};

std::vector<double> parse_mix(const std::string& s) {
  std::vector<double> w;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) w.push_back(std::stod(part));
  if (w.size() != 3) throw Error(Errc::InvalidArgument, "mix needs three weights tts,asr,vc");
  return w;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

// ---------------------------------------------------------------------------

struct GenCorpusArgs {
  codec::CorpusOptions opts{7, 50000};
  std::string out = "data";
};

int gen_corpus(const GenCorpusArgs& a, const RunRecord& rec) {
  rec.begin();
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = codec::generate_corpus(a.opts);
  codec::write_corpus(corpus, a.out);
  std::size_t heldout = 0;
  for (const auto& e : corpus.manifest) heldout += e.split == codec::Split::Heldout;
  rec.finish({{"utterances", corpus.manifest.size()},
              {"train", corpus.manifest.size() - heldout},
              {"heldout", heldout},
              {"manifest", (fs::path(a.out) / "manifest.jsonl").string()},
              {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  log("wrote " + std::to_string(corpus.manifest.size()) + " utterances to " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CurateArgs {
  curation::PipelineInputs in;
  curation::PipelineOptions opts;
  std::string out = "kept.jsonl";
  std::string rejected;  // default: rejected.jsonl beside out
};

int curate(const CurateArgs& a, const RunRecord& rec) {
  rec.begin();
  const auto r = curation::run_pipeline(a.in, a.opts);
  std::string kept, rejected;
  for (const auto& j : r.kept) kept += j.dump() + "\n";
  for (const auto& j : r.rejected) rejected += j.dump() + "\n";
  const fs::path rejected_path =
      a.rejected.empty() ? fs::path(a.out).parent_path() / "rejected.jsonl" : fs::path(a.rejected);
  write_text(a.out, kept);
  write_text(rejected_path, rejected);
  json reasons = json::object();
  for (const auto& j : r.rejected) reasons[j.value("reason", "unknown")] = reasons.value(j.value("reason", "unknown"), 0) + 1;
  rec.finish({{"kept", r.kept.size()}, {"rejected", r.rejected.size()}, {"reject_reasons", reasons},
              {"pwer_threshold", a.opts.pwer_threshold}});
  log("kept " + std::to_string(r.kept.size()) + ", rejected " + std::to_string(r.rejected.size()));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string corpus = "data";
  std::string out = "run";
  model::ModelConfig model;
  model::TrainConfig train;
  std::string mix = "0.333333333333,0.333333333333,0.333333333334";
  bool learned_positions = false;
  std::string dtype = "f32";
};

template <class T>
int train_impl(const TrainArgs& a, const RunRecord& rec, const VocabLayout& layout,
               const std::vector<codec::ManifestEntry>& manifest, model::TrainConfig tc) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ofstream metrics(fs::path(a.out) / "metrics.csv");
  metrics << model::metrics_csv_header() << "\n";
  const int every = std::max(1, tc.steps / 100);
  auto result = model::train<T>(layout, manifest, a.model, tc, [&](const model::MetricsRow& row) {
    metrics << model::metrics_csv_row(row) << "\n";
    if (row.accuracy[0]) metrics.flush();
    if (row.step % every == 0 || row.accuracy[0]) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "step %d loss %.4f lr %.2e", row.step, row.loss, row.lr);
      std::string line = buf;
      if (row.accuracy[0])
        for (TaskKind t : kAllTasks) {
          std::snprintf(buf, sizeof buf, " acc_%s %.4f", std::string(task_name(t)).c_str(),
                        *row.accuracy[static_cast<int>(t)]);
          line += buf;
        }
      log(line);
    }
    if (g_interrupted) throw Error(Errc::InvalidArgument, "interrupted");
  });
  const fs::path ckpt = fs::path(a.out) / "model.ckpt";
  save_checkpoint(ckpt, layout, result.state.model, result.state.step,
                  {{"train", tc.to_json()}, {"corpus", a.corpus}});
  json summary{{"checkpoint", ckpt.string()},
               {"steps", result.state.step},
               {"params", result.state.model.num_params()},
               {"dtype", a.dtype},
               {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  if (!result.metrics.empty()) {
    summary["final_loss"] = result.metrics.back().loss;
    for (auto it = result.metrics.rbegin(); it != result.metrics.rend(); ++it)
      if (it->accuracy[0]) {
        for (TaskKind t : kAllTasks)
          summary["heldout_token_accuracy"][std::string(task_name(t))] = *it->accuracy[static_cast<int>(t)];
        break;
      }
  }
  rec.finish(summary);
  log("saved " + ckpt.string());
  return kExitOk;
}

int train(TrainArgs a, const RunRecord& rec) {
  rec.begin();
  const auto w = parse_mix(a.mix);
  a.train.mix = {w[0], w[1], w[2]};
  const double sum = w[0] + w[1] + w[2];
  if (sum <= 0) throw Error(Errc::InvalidArgument, "mix weights sum to zero");
  a.train.mix = {w[0] / sum, w[1] / sum, w[2] / sum};
  a.model.rope = !a.learned_positions;
  const auto layout = build_vocab(default_vocab_config());
  a.model.vocab_size = layout.total();
  a.model.validate();
  std::vector<codec::ManifestEntry> manifest;
  if (a.train.steps > 0) manifest = codec::read_manifest(fs::path(a.corpus) / "manifest.jsonl");
  if (a.dtype == "f64") return train_impl<double>(a, rec, layout, manifest, a.train);
  if (a.dtype != "f32") throw Error(Errc::InvalidArgument, "dtype must be f32 or f64");
  return train_impl<float>(a, rec, layout, manifest, a.train);
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::string task = "asr";
  std::string input;
  std::string out = "-";
  std::string split = "all";
  std::size_t limit = 0;
  int target_speaker = -1;
  int speaker_pool = 64;
  std::uint64_t vc_seed = 7;
  bool constrained = false;
  model::SamplerConfig sampler;
  std::string sampler_kind = "greedy";
};

int infer(InferArgs a, const RunRecord& rec) {
  rec.begin();
  const TaskKind task = task_from_name(a.task);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  check_layout_fits_codec(ck.layout);
  if (a.sampler_kind == "topk")
    a.sampler.kind = model::SamplerConfig::Kind::TopK;
  else if (a.sampler_kind != "greedy")
    throw Error(Errc::InvalidArgument, "sampler must be greedy or topk");

  std::vector<codec::StreamSet> streams = codec::read_streams(a.input);
  std::ostringstream buf;
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (a.out != "-") {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    file.open(a.out);
    if (!file) throw Error(Errc::Io, "cannot write " + a.out);
    out = &file;
  }
  DecodePolicy policy{a.sampler, a.constrained};
  TaskScore total;
  total.task = task;
  std::size_t processed = 0, failed_inputs = 0;
  for (const auto& s : streams) {
    if (a.limit && processed >= a.limit) break;
    const auto split = codec::split_for(s.id);
    if ((a.split == "heldout" && split != codec::Split::Heldout) ||
        (a.split == "train" && split != codec::Split::Train))
      continue;
    ++processed;
    InferItem item;
    try {
      const int target = task != TaskKind::VC ? -1
                         : a.target_speaker >= 0
                             ? a.target_speaker
                             : vc_target_for(s.id, s.speaker, a.speaker_pool, a.vc_seed);
      item = make_infer_item(ck.layout, task, s, target);
    } catch (const Error& e) {
      ++failed_inputs;
      *out << json{{"id", s.id}, {"error", e.what()}}.dump() << "\n";
      continue;
    }
    const Generation g = generate(ck.model, ck.layout, task, item.prompt, policy);
    const ItemScore sc = score(ck.layout, item, g);
    ++total.items;
    total.correct += sc.correct;
    total.violations += g.error.has_value();
    total.char_edits += sc.edits.distance();
    total.char_reference += sc.edits.reference_length;
    *out << result_to_json(item, g, sc).dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
  }
  out->flush();
  json summary = total.to_json();
  summary["input_errors"] = failed_inputs;
  summary["checkpoint"] = a.checkpoint;
  rec.finish(summary);
  log(std::string(task_name(task)) + ": " + std::to_string(total.correct) + "/" +
      std::to_string(total.items) + " correct, " + std::to_string(total.violations) +
      " grammar violations");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string checkpoint;
  serving::ServerOptions server;
  int max_batch = 32;
};

int serve(const ServeArgs& a, const RunRecord& rec) {
  rec.begin();
  Checkpoint ck = load_checkpoint(a.checkpoint);
  auto model = std::make_shared<const model::Transformer<float>>(std::move(ck.model));
  serving::Engine engine(model, ck.layout, {a.max_batch, true});
  serving::HttpServer server(engine, a.server);
  const int port = server.start();
  log("serving on " + a.server.host + ":" + std::to_string(port));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  engine.shutdown();
  rec.finish({{"port", port}, {"checkpoint", a.checkpoint}, {"max_batch", a.max_batch}});
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string task = "tts";
  std::vector<int> concurrency{1, 5, 10, 20, 40, 80, 160};
  std::size_t requests_per_level = 64;
  std::uint64_t seed = 0;
  std::string out = "report.json";
  std::string markdown;
  std::string checkpoint;
  std::string endpoint;
  int max_batch = 32;
  bool unconstrained = false;
  int min_words = 15, max_words = 40;
};

int bench_cmd(const BenchArgs& a, const RunRecord& rec) {
  rec.begin();
  bench::SweepConfig cfg;
  cfg.task = task_from_name(a.task);
  cfg.concurrency = a.concurrency;
  cfg.requests_per_level = a.requests_per_level;
  cfg.seed = a.seed;
  cfg.request.constrained = !a.unconstrained;
  cfg.request.min_words = a.min_words;
  cfg.request.max_words = a.max_words;

  std::unique_ptr<serving::Engine> engine;
  std::unique_ptr<bench::Endpoint> endpoint;
  if (!a.endpoint.empty()) {
    const auto colon = a.endpoint.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "endpoint must be host:port");
    endpoint = std::make_unique<bench::HttpEndpoint>(a.endpoint.substr(0, colon),
                                                     std::stoi(a.endpoint.substr(colon + 1)));
  } else {
    if (a.checkpoint.empty()) throw Error(Errc::MissingInput, "bench needs --checkpoint or --endpoint");
    Checkpoint ck = load_checkpoint(a.checkpoint);
    auto model = std::make_shared<const model::Transformer<float>>(std::move(ck.model));
    engine = std::make_unique<serving::Engine>(model, ck.layout, serving::EngineOptions{a.max_batch, true});
    endpoint = std::make_unique<bench::LocalEndpoint>(*engine);
  }
  const auto rows = bench::sweep(*endpoint, cfg, [](const bench::BenchReport& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "concurrency %d: avg ttf %.1f ms, p99 %.1f ms", r.concurrency, r.ttf_avg,
                  r.ttf_p99);
    log(buf);
  });
  const json report = bench::report_json(cfg, rows);
  write_text(a.out, report.dump(2) + "\n");
  const std::string table = bench::markdown_table(rows);
  if (!a.markdown.empty()) write_text(a.markdown, table);
  if (verbosity() > 0) std::cout << table;
  rec.finish({{"report", a.out}, {"levels", rows.size()}});
  return kExitOk;
}

fs::path default_run_dir(const std::string& out, const char* name) {
  if (out.empty() || out == "-") return fs::path("runs") / name;
  const fs::path p(out);
  return p.has_extension() ? p.parent_path() / (p.stem().string() + ".run") : p;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Unified speech token model toolkit: corpus, curation, training, inference, serving, benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gpa 0.1.0");
  app.set_config("--config", "", "TOML file of subcommand.key=value settings; flags override it");

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate a mock-codec corpus (manifest.jsonl, streams.jsonl)");
  gen_cmd->add_option("--seed", gen.opts.seed, "Corpus seed")->capture_default_str();
  gen_cmd->add_option("--n", gen.opts.n, "Number of utterances")->capture_default_str();
  gen_cmd->add_option("--min-chars", gen.opts.min_chars)->capture_default_str();
  gen_cmd->add_option("--max-chars", gen.opts.max_chars)->capture_default_str();
  gen_cmd->add_option("--speakers", gen.opts.speakers)->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  CurateArgs cur;
  std::string cur_manifest, cur_hyps, cur_align;
  auto* cur_cmd = app.add_subcommand("curate", "Normalize, segment and consensus-filter a speech collection");
  cur_cmd->add_option("--manifest", cur_manifest, "JSONL {id, audio, speaker?}")->required();
  cur_cmd->add_option("--hypotheses", cur_hyps, "JSONL {id, model, text}")->required();
  cur_cmd->add_option("--alignments", cur_align, "JSONL {id, words:[{w,start,end,punct}]}");
  cur_cmd->add_option("--pwer-threshold", cur.opts.pwer_threshold, "Keep when pWER is below this")->capture_default_str();
  cur_cmd->add_option("--workers", cur.opts.workers, "0 = all cores")->capture_default_str();
  cur_cmd->add_option("--frame-ms", cur.opts.vad.frame_ms)->capture_default_str();
  cur_cmd->add_option("--energy-threshold", cur.opts.vad.energy_threshold)->capture_default_str();
  cur_cmd->add_option("--hangover-frames", cur.opts.vad.hangover_frames)->capture_default_str();
  cur_cmd->add_option("--min-segment-ms", cur.opts.vad.min_segment_ms)->capture_default_str();
  cur_cmd->add_option("--out", cur.out, "Kept utterances JSONL")->capture_default_str();
  cur_cmd->add_option("--rejected", cur.rejected, "Rejected utterances JSONL");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train the unified model on a corpus");
  tr_cmd->add_option("--corpus", tr.corpus, "Corpus directory with manifest.jsonl")->capture_default_str();
  tr_cmd->add_option("--out", tr.out, "Run directory")->capture_default_str();
  tr_cmd->add_option("--layers", tr.model.layers)->capture_default_str();
  tr_cmd->add_option("--heads", tr.model.heads)->capture_default_str();
  tr_cmd->add_option("--dim", tr.model.model_dim)->capture_default_str();
  tr_cmd->add_option("--ff-dim", tr.model.ff_dim)->capture_default_str();
  tr_cmd->add_option("--max-seq-len", tr.model.max_seq_len)->capture_default_str();
  tr_cmd->add_flag("--learned-positions", tr.learned_positions, "Learned position table instead of RoPE");
  tr_cmd->add_option("--steps", tr.train.steps, "0 writes the initialized model")->capture_default_str();
  tr_cmd->add_option("--batch", tr.train.batch_size)->capture_default_str();
  tr_cmd->add_option("--lr", tr.train.lr)->capture_default_str();
  tr_cmd->add_option("--min-lr-ratio", tr.train.min_lr_ratio)->capture_default_str();
  tr_cmd->add_option("--warmup", tr.train.warmup)->capture_default_str();
  tr_cmd->add_option("--weight-decay", tr.train.weight_decay)->capture_default_str();
  tr_cmd->add_option("--grad-clip", tr.train.grad_clip)->capture_default_str();
  tr_cmd->add_option("--seed", tr.train.seed)->capture_default_str();
  tr_cmd->add_option("--eval-interval", tr.train.eval_interval)->capture_default_str();
  tr_cmd->add_option("--eval-items", tr.train.eval_items)->capture_default_str();
  tr_cmd->add_option("--speaker-pool", tr.train.speaker_pool)->capture_default_str();
  tr_cmd->add_option("--mix", tr.mix, "Task weights tts,asr,vc")->capture_default_str();
  tr_cmd->add_option("--dtype", tr.dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Run one task over stream inputs with a checkpoint");
  inf_cmd->add_option("--checkpoint", inf.checkpoint)->required();
  inf_cmd->add_option("--task", inf.task)->check(CLI::IsMember({"tts", "asr", "vc"}))->capture_default_str();
  inf_cmd->add_option("--input", inf.input, "streams.jsonl")->required();
  inf_cmd->add_option("--out", inf.out, "Results JSONL, - for stdout")->capture_default_str();
  inf_cmd->add_option("--split", inf.split)->check(CLI::IsMember({"all", "train", "heldout"}))->capture_default_str();
  inf_cmd->add_option("--limit", inf.limit, "0 = no limit")->capture_default_str();
  inf_cmd->add_option("--target-speaker", inf.target_speaker, "VC target; default derives one per item")->capture_default_str();
  inf_cmd->add_option("--speaker-pool", inf.speaker_pool)->capture_default_str();
  inf_cmd->add_option("--vc-seed", inf.vc_seed)->capture_default_str();
  inf_cmd->add_flag("--constrained", inf.constrained, "Grammar- and length-constrained decoding");
  inf_cmd->add_option("--sampler", inf.sampler_kind)->check(CLI::IsMember({"greedy", "topk"}))->capture_default_str();
  inf_cmd->add_option("--top-k", inf.sampler.top_k)->capture_default_str();
  inf_cmd->add_option("--temperature", inf.sampler.temperature)->capture_default_str();
  inf_cmd->add_option("--sampler-seed", inf.sampler.seed)->capture_default_str();

  ServeArgs srv;
  auto* srv_cmd = app.add_subcommand("serve", "Serve streaming HTTP endpoints");
  srv_cmd->add_option("--checkpoint", srv.checkpoint)->required();
  srv_cmd->add_option("--max-batch", srv.max_batch)->capture_default_str();
  srv_cmd->add_option("--host", srv.server.host)->capture_default_str();
  srv_cmd->add_option("--port", srv.server.port)->capture_default_str();
  srv_cmd->add_option("--threads", srv.server.threads)->capture_default_str();
  std::string srv_run_dir = "runs/serve";
  srv_cmd->add_option("--run-dir", srv_run_dir)->capture_default_str();

  BenchArgs bn;
  auto* bn_cmd = app.add_subcommand("bench", "Closed-loop concurrency sweep against an engine");
  bn_cmd->add_option("--task", bn.task)->check(CLI::IsMember({"tts", "asr", "vc"}))->capture_default_str();
  bn_cmd->add_option("--concurrency", bn.concurrency)->delimiter(',')->capture_default_str();
  bn_cmd->add_option("--requests-per-level", bn.requests_per_level)->capture_default_str();
  bn_cmd->add_option("--seed", bn.seed)->capture_default_str();
  bn_cmd->add_option("--out", bn.out)->capture_default_str();
  bn_cmd->add_option("--markdown", bn.markdown, "Also write the Markdown table here");
  bn_cmd->add_option("--checkpoint", bn.checkpoint, "Benchmark an in-process engine");
  bn_cmd->add_option("--endpoint", bn.endpoint, "Benchmark a running server, host:port");
  bn_cmd->add_option("--max-batch", bn.max_batch)->capture_default_str();
  bn_cmd->add_option("--min-words", bn.min_words)->capture_default_str();
  bn_cmd->add_option("--max-words", bn.max_words)->capture_default_str();
  bn_cmd->add_flag("--unconstrained", bn.unconstrained, "Let the model end outputs itself");

  std::string inf_run_dir, bn_run_dir;
  inf_cmd->add_option("--run-dir", inf_run_dir, "Config echo and summary directory");
  bn_cmd->add_option("--run-dir", bn_run_dir, "Config echo and summary directory");

  // --config may follow the subcommand; CLI11 reads it at the top level.
  std::vector<std::string> args(argv, argv + argc);
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      std::string file = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      args.insert(args.begin() + 1, {"--config", file});
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      std::string opt = args[i];
      args.erase(args.begin() + i);
      args.insert(args.begin() + 1, opt);
      break;
    }
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return gen_corpus(gen, {gen_cmd, gen.out});
    if (cur_cmd->parsed()) {
      cur.in = {cur_manifest, cur_hyps, cur_align};
      return curate(cur, {cur_cmd, default_run_dir(cur.out, "curate")});
    }
    if (tr_cmd->parsed()) return train(tr, {tr_cmd, tr.out});
    if (inf_cmd->parsed())
      return infer(inf, {inf_cmd, inf_run_dir.empty() ? default_run_dir(inf.out, "infer") : fs::path(inf_run_dir)});
    if (srv_cmd->parsed()) return serve(srv, {srv_cmd, srv_run_dir});
    if (bn_cmd->parsed())
      return bench_cmd(bn, {bn_cmd, bn_run_dir.empty() ? default_run_dir(bn.out, "bench") : fs::path(bn_run_dir)});
  } catch (const Error& e) {
    std::cerr << "gpa: " << e.what() << "\n";
    return kExitDomain;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "gpa: Parse: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "gpa: Io: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace gpa::cli
