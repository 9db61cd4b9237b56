// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gpa/codec.hpp"
#include "gpa/composer.hpp"
#include "gpa/model.hpp"
#include "gpa/token_space.hpp"

namespace gpa::model {

// Prompt positions are masked; the last prompt position predicts the first
// target token.
Example make_example(const TaskSequence& seq);

struct SamplerConfig {
  enum class Kind { Greedy, TopK };
  Kind kind = Kind::Greedy;
  int top_k = 1;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

// Token id ranges [first, second) a draw may land in; empty means unrestricted.
using AllowedRanges = std::vector<std::pair<int, int>>;

// Lowest id wins ties.
template <class T>
int argmax(std::span<const T> logits, const AllowedRanges& allowed = {});

class Sampler {
 public:
  explicit Sampler(const SamplerConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  template <class T>
  int sample(std::span<const T> logits, const AllowedRanges& allowed = {});

  const SamplerConfig& config() const { return cfg_; }

 private:
  SamplerConfig cfg_;
  std::mt19937_64 rng_;
};

// Feeds `last_token` through the cache and draws the next token.
template <class T>
int decode_step(const Transformer<T>& model, DecodeCache<T>& cache, int last_token, Sampler& sampler,
                const AllowedRanges& allowed = {});

struct TrainConfig {
  double lr = 3e-4;
  double min_lr_ratio = 0.1;
  int warmup = 500;
  int steps = 1000;
  int batch_size = 64;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int eval_interval = 500;
  int eval_items = 64;  // heldout items per task for teacher-forced accuracy
  int speaker_pool = 64;
  TaskMix mix;

  double lr_at(int step) const;  // warmup then cosine decay
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct MetricsRow {
  int step = 0;
  double loss = 0;
  double lr = 0;
  // Teacher-forced heldout next-token accuracy on target positions, indexed
  // by TaskKind; present on eval steps only.
  std::array<std::optional<double>, 3> accuracy;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

template <class T>
struct TrainState {
  Transformer<T> model;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  int step = 0;
  std::uint64_t seed = 0;

  explicit TrainState(const ModelConfig& cfg) : model(cfg) {}
};

template <class T>
struct TrainResult {
  TrainState<T> state;
  std::vector<MetricsRow> metrics;
};

// Decoupled-weight-decay Adam step with global-norm clipping; returns the
// pre-clip gradient norm.
template <class T>
double adamw_step(TrainState<T>& state, std::span<T> grad, const TrainConfig& cfg, double lr);

using MetricsCallback = std::function<void(const MetricsRow&)>;

// Heldout items used for accuracy: the first eval_items heldout entries
// instantiated as each task.
std::array<std::vector<TaskSequence>, 3> heldout_eval_sets(const VocabLayout& layout,
                                                           const std::vector<codec::ManifestEntry>& corpus,
                                                           int items, int speaker_pool,
                                                           std::uint64_t seed);

template <class T>
TrainResult<T> train(const VocabLayout& layout, const std::vector<codec::ManifestEntry>& corpus,
                     const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const MetricsCallback& on_metrics = {});

// Mean teacher-forced accuracy on the target positions of `items`.
template <class T>
double target_accuracy(const Transformer<T>& model, const std::vector<TaskSequence>& items,
                       int batch_size = 64);

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst_tensor;
};

// Central finite differences (step h) against the analytic gradient on a
// stratified sample of at least `samples` parameters. Relative error is
// |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(Transformer<double>& model, std::span<const Example> batch,
                           std::size_t samples = 112, double h = 1e-5, std::uint64_t seed = 0,
                           double floor = 1e-7);

}  // namespace gpa::model
