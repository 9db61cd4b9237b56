// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "gpa/error.hpp"

namespace gpa::model {

Example make_example(const TaskSequence& seq) {
  Example ex;
  std::vector<int> all(seq.prompt.ids.begin(), seq.prompt.ids.end());
  all.insert(all.end(), seq.target.ids.begin(), seq.target.ids.end());
  if (all.size() < 2) return ex;
  ex.inputs.assign(all.begin(), all.end() - 1);
  ex.labels.assign(ex.inputs.size(), -1);
  for (std::size_t t = seq.prompt.ids.size() - 1; t < ex.inputs.size(); ++t) ex.labels[t] = all[t + 1];
  return ex;
}

nlohmann::json SamplerConfig::to_json() const {
  return {{"kind", kind == Kind::Greedy ? "greedy" : "top_k"},
          {"top_k", top_k},
          {"temperature", temperature},
          {"seed", seed}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  if (j.is_null()) return c;
  const std::string kind = j.value("kind", "greedy");
  if (kind == "greedy")
    c.kind = Kind::Greedy;
  else if (kind == "top_k" || kind == "topk")
    c.kind = Kind::TopK;
  else
    throw Error(Errc::InvalidArgument, "unknown sampler '" + kind + "'");
  c.top_k = j.value("top_k", c.top_k);
  c.temperature = j.value("temperature", c.temperature);
  c.seed = j.value("seed", c.seed);
  if (c.top_k < 1) throw Error(Errc::InvalidArgument, "top_k must be >= 1");
  return c;
}

namespace {

bool in_ranges(int id, const AllowedRanges& allowed) {
  if (allowed.empty()) return true;
  for (auto [lo, hi] : allowed)
    if (id >= lo && id < hi) return true;
  return false;
}

}  // namespace

template <class T>
int argmax(std::span<const T> logits, const AllowedRanges& allowed) {
  int best = -1;
  for (int j = 0; j < static_cast<int>(logits.size()); ++j) {
    if (!in_ranges(j, allowed)) continue;
    if (best < 0 || logits[j] > logits[best]) best = j;
  }
  if (best < 0) throw Error(Errc::InvalidArgument, "no token allowed");
  return best;
}

template <class T>
int Sampler::sample(std::span<const T> logits, const AllowedRanges& allowed) {
  if (cfg_.kind == SamplerConfig::Kind::Greedy || cfg_.temperature <= 1e-6 || cfg_.top_k == 1)
    return argmax(logits, allowed);
  std::vector<int> ids;
  ids.reserve(logits.size());
  for (int j = 0; j < static_cast<int>(logits.size()); ++j)
    if (in_ranges(j, allowed)) ids.push_back(j);
  if (ids.empty()) throw Error(Errc::InvalidArgument, "no token allowed");
  const std::size_t k = std::min<std::size_t>(cfg_.top_k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](int a, int b) {
    return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
  });
  ids.resize(k);
  std::vector<double> w(k);
  const double mx = static_cast<double>(logits[ids[0]]);
  double sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((static_cast<double>(logits[ids[i]]) - mx) / cfg_.temperature);
    sum += w[i];
  }
  double u = std::uniform_real_distribution<double>(0.0, sum)(rng_);
  for (std::size_t i = 0; i < k; ++i) {
    if (u < w[i]) return ids[i];
    u -= w[i];
  }
  return ids[k - 1];
}

template <class T>
int decode_step(const Transformer<T>& model, DecodeCache<T>& cache, int last_token, Sampler& sampler,
                const AllowedRanges& allowed) {
  const int token = last_token;
  Mat<T> logits = model.forward(std::span<const int>(&token, 1), cache, true);
  return sampler.sample(std::span<const T>(logits.row(0).data(), logits.cols()), allowed);
}

double TrainConfig::lr_at(int step) const {
  if (warmup > 0 && step < warmup) return lr * (step + 1) / warmup;
  const int decay_steps = std::max(1, steps - warmup);
  const double progress = std::clamp(static_cast<double>(step - warmup) / decay_steps, 0.0, 1.0);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return lr * (min_lr_ratio + (1.0 - min_lr_ratio) * cosine);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"min_lr_ratio", min_lr_ratio},
          {"warmup", warmup},
          {"steps", steps},
          {"batch_size", batch_size},
          {"weight_decay", weight_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"grad_clip", grad_clip},
          {"seed", seed},
          {"eval_interval", eval_interval},
          {"eval_items", eval_items},
          {"speaker_pool", speaker_pool},
          {"mix", {{"tts", mix.tts}, {"asr", mix.asr}, {"vc", mix.vc}}}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.min_lr_ratio = j.value("min_lr_ratio", c.min_lr_ratio);
  c.warmup = j.value("warmup", c.warmup);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.eval_items = j.value("eval_items", c.eval_items);
  c.speaker_pool = j.value("speaker_pool", c.speaker_pool);
  if (j.contains("mix")) {
    c.mix.tts = j["mix"].value("tts", c.mix.tts);
    c.mix.asr = j["mix"].value("asr", c.mix.asr);
    c.mix.vc = j["mix"].value("vc", c.mix.vc);
  }
  return c;
}

std::string metrics_csv_header() { return "step,loss,lr,acc_tts,acc_asr,acc_vc"; }

std::string metrics_csv_row(const MetricsRow& row) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g", row.step, row.loss, row.lr);
  out << buf;
  for (const auto& acc : row.accuracy) {
    out << ',';
    if (acc) {
      std::snprintf(buf, sizeof(buf), "%.6f", *acc);
      out << buf;
    }
  }
  return out.str();
}

template <class T>
double adamw_step(TrainState<T>& state, std::span<T> grad, const TrainConfig& cfg, double lr) {
  auto& params = state.model.params();
  if (state.adam_m.size() != params.size()) {
    state.adam_m.assign(params.size(), T(0));
    state.adam_v.assign(params.size(), T(0));
  }
  double norm_sq = 0;
  for (T g : grad) norm_sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(norm_sq);
  const T clip = (cfg.grad_clip > 0 && norm > cfg.grad_clip) ? static_cast<T>(cfg.grad_clip / norm) : T(1);
  const int t = state.step + 1;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const T lr_t = static_cast<T>(lr), eps = static_cast<T>(cfg.eps);
  for (const TensorInfo& info : state.model.tensors()) {
    const T decay = info.decay ? static_cast<T>(lr * cfg.weight_decay) : T(0);
    T* p = params.data() + info.offset;
    T* m = state.adam_m.data() + info.offset;
    T* v = state.adam_v.data() + info.offset;
    const T* g = grad.data() + info.offset;
    for (std::size_t i = 0; i < info.size(); ++i) {
      const T gi = g[i] * clip;
      m[i] = b1 * m[i] + (T(1) - b1) * gi;
      v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
      p[i] -= lr_t * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps) + decay * p[i];
    }
  }
  state.step = t;
  return norm;
}

std::array<std::vector<TaskSequence>, 3> heldout_eval_sets(const VocabLayout& layout,
                                                           const std::vector<codec::ManifestEntry>& corpus,
                                                           int items, int speaker_pool,
                                                           std::uint64_t seed) {
  std::array<std::vector<TaskSequence>, 3> sets;
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  int taken = 0;
  for (const auto& e : corpus) {
    if (e.split != codec::Split::Heldout) continue;
    if (taken++ >= items) break;
    int target = std::uniform_int_distribution<int>(0, std::max(0, speaker_pool - 2))(rng);
    if (target >= e.speaker) ++target;
    for (TaskKind task : kAllTasks)
      sets[static_cast<int>(task)].push_back(instantiate(layout, task, e, target));
  }
  return sets;
}

template <class T>
double target_accuracy(const Transformer<T>& model, const std::vector<TaskSequence>& items,
                       int batch_size) {
  std::size_t correct = 0, count = 0;
  for (std::size_t i = 0; i < items.size(); i += batch_size) {
    std::vector<Example> batch;
    for (std::size_t j = i; j < std::min(items.size(), i + batch_size); ++j)
      batch.push_back(make_example(items[j]));
    LossStats<T> s = model.loss(batch);
    correct += s.correct;
    count += s.count;
  }
  return count == 0 ? 0.0 : static_cast<double>(correct) / count;
}

template <class T>
TrainResult<T> train(const VocabLayout& layout, const std::vector<codec::ManifestEntry>& corpus,
                     const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const MetricsCallback& on_metrics) {
  if (model_cfg.vocab_size != layout.total())
    throw Error(Errc::LayoutMismatch, "model vocab " + std::to_string(model_cfg.vocab_size) +
                                          " vs layout " + std::to_string(layout.total()));
  if (cfg.batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].split == codec::Split::Train) train_idx.push_back(i);
  if (train_idx.empty() && cfg.steps > 0) throw Error(Errc::EmptyBatch, "corpus has no train split");

  TrainResult<T> result{TrainState<T>(model_cfg), {}};
  TrainState<T>& state = result.state;
  state.seed = cfg.seed;
  state.model.init(cfg.seed);
  state.adam_m.assign(state.model.num_params(), T(0));
  state.adam_v.assign(state.model.num_params(), T(0));

  const auto eval_sets = heldout_eval_sets(layout, corpus, cfg.eval_items, cfg.speaker_pool, cfg.seed);
  auto evaluate = [&](MetricsRow& row) {
    for (TaskKind task : kAllTasks) {
      const auto& items = eval_sets[static_cast<int>(task)];
      if (!items.empty()) row.accuracy[static_cast<int>(task)] = target_accuracy(state.model, items);
    }
  };

  std::mt19937_64 order_rng(cfg.seed ^ 0x0dde7ULL);
  std::vector<std::size_t> order = train_idx;
  std::shuffle(order.begin(), order.end(), order_rng);
  std::size_t cursor = 0;
  std::vector<T> grad(state.model.num_params());

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<codec::ManifestEntry> entries;
    entries.reserve(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      entries.push_back(corpus[order[cursor++]]);
    }
    BatchOptions bo;
    bo.seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(step);
    bo.speaker_pool = cfg.speaker_pool;
    const auto seqs = make_training_batch(layout, entries, cfg.mix, bo);
    std::vector<Example> batch;
    batch.reserve(seqs.size());
    for (const auto& s : seqs) batch.push_back(make_example(s));

    LossStats<T> stats = state.model.loss_and_grad(batch, grad);
    const double lr = cfg.lr_at(step);
    adamw_step(state, std::span<T>(grad), cfg, lr);

    MetricsRow row;
    row.step = state.step;
    row.loss = static_cast<double>(stats.loss);
    row.lr = lr;
    if (cfg.eval_interval > 0 && (state.step % cfg.eval_interval == 0 || state.step == cfg.steps))
      evaluate(row);
    result.metrics.push_back(row);
    if (on_metrics) on_metrics(row);
  }
  return result;
}

GradCheckResult grad_check(Transformer<double>& model, std::span<const Example> batch,
                           std::size_t samples, double h, std::uint64_t seed, double floor) {
  std::vector<double> analytic(model.num_params());
  model.loss_and_grad(batch, analytic);

  std::set<int> used_tokens;
  std::size_t max_len = 0;
  for (const auto& ex : batch) {
    used_tokens.insert(ex.inputs.begin(), ex.inputs.end());
    max_len = std::max(max_len, ex.inputs.size());
  }
  const auto& tensors = model.tensors();
  const std::size_t per_tensor = (samples + tensors.size() - 1) / tensors.size();
  std::mt19937_64 rng(seed);
  GradCheckResult out;
  auto& params = model.params();
  for (const TensorInfo& info : tensors) {
    for (std::size_t s = 0; s < per_tensor; ++s) {
      std::size_t local;
      if (info.name == "tok_emb" && !used_tokens.empty()) {
        auto it = used_tokens.begin();
        std::advance(it, std::uniform_int_distribution<std::size_t>(0, used_tokens.size() - 1)(rng));
        local = static_cast<std::size_t>(*it) * info.cols +
                std::uniform_int_distribution<std::size_t>(0, info.cols - 1)(rng);
      } else if (info.name == "pos_emb" && max_len > 0) {
        local = std::uniform_int_distribution<std::size_t>(0, max_len * info.cols - 1)(rng);
      } else {
        local = std::uniform_int_distribution<std::size_t>(0, info.size() - 1)(rng);
      }
      const std::size_t idx = info.offset + local;
      const double saved = params[idx];
      params[idx] = saved + h;
      const double up = model.loss(batch).loss;
      params[idx] = saved - h;
      const double down = model.loss(batch).loss;
      params[idx] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[idx];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_tensor = info.name;
      }
    }
  }
  return out;
}

#define GPA_INSTANTIATE(T)                                                                        \
  template int argmax<T>(std::span<const T>, const AllowedRanges&);                               \
  template int Sampler::sample<T>(std::span<const T>, const AllowedRanges&);                      \
  template int decode_step<T>(const Transformer<T>&, DecodeCache<T>&, int, Sampler&,             \
                              const AllowedRanges&);                                              \
  template double adamw_step<T>(TrainState<T>&, std::span<T>, const TrainConfig&, double);       \
  template double target_accuracy<T>(const Transformer<T>&, const std::vector<TaskSequence>&, int); \
  template TrainResult<T> train<T>(const VocabLayout&, const std::vector<codec::ManifestEntry>&,  \
                                   const ModelConfig&, const TrainConfig&, const MetricsCallback&);

GPA_INSTANTIATE(float)
GPA_INSTANTIATE(double)

#undef GPA_INSTANTIATE

}  // namespace gpa::model
