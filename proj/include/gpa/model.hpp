// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace gpa::model {

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  int model_dim = 128;
  int ff_dim = 384;
  int vocab_size = 2384;
  int max_seq_len = 512;
  bool rope = true;  // false: learned absolute position table
  double rope_base = 10000.0;
  double init_std = 0.02;

  int head_dim() const { return model_dim / heads; }
  void validate() const;  // throws Errc::InvalidArgument
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// One named slice of the flat parameter vector.
struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  bool decay = false;  // receives decoupled weight decay
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Next-token training example. labels[t] < 0 is excluded from the loss.
struct Example {
  std::vector<int> inputs;
  std::vector<int> labels;
};

template <class T>
struct LossStats {
  T loss = 0;             // mean cross-entropy over counted positions
  std::size_t count = 0;  // counted positions
  std::size_t correct = 0;  // argmax == label
};

// Per-session attention state for incremental decoding. Rows hold post-RoPE
// keys and values for positions [0, length).
template <class T>
struct DecodeCache {
  std::vector<std::vector<T>> keys;    // per layer, length * model_dim
  std::vector<std::vector<T>> values;  // per layer, length * model_dim
  int length = 0;

  void clear() {
    for (auto& k : keys) k.clear();
    for (auto& v : values) v.clear();
    length = 0;
  }
};

// Pre-norm decoder-only transformer: RMSNorm, rotary attention, SiLU-gated
// feed-forward, one embedding table and one output head over the whole
// vocabulary.
template <class T>
class Transformer {
 public:
  explicit Transformer(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t num_params() const { return params_.size(); }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  void init(std::uint64_t seed);

  // Mean target-position cross-entropy. When `grad` is non-empty it must be
  // num_params() long and receives d(loss)/d(params) (overwritten).
  LossStats<T> loss_and_grad(std::span<const Example> batch, std::span<T> grad) const {
    return run(batch, grad, nullptr);
  }
  LossStats<T> loss(std::span<const Example> batch) const { return run(batch, {}, nullptr); }

  // Full-sequence logits through the training kernels; reference for the
  // cached path. Throws Errc::ContextOverflow beyond max_seq_len.
  Mat<T> full_logits(std::span<const int> tokens) const;

  DecodeCache<T> new_cache() const;

  // Appends `tokens` to `cache` and returns logits for the new positions
  // (all of them, or only the last when `last_only`). Each row goes through
  // the same per-row kernels, so results do not depend on how tokens are
  // split across calls.
  Mat<T> forward(std::span<const int> tokens, DecodeCache<T>& cache, bool last_only = false) const;

  // One token for each of several independent sessions.
  Mat<T> forward_batch(std::span<const int> tokens, std::span<DecodeCache<T>* const> caches) const;

  // Testing hook: scales the gradient of one tensor, simulating a backward bug.
  void set_gradient_fault(int tensor_index, T scale) {
    fault_tensor_ = tensor_index;
    fault_scale_ = scale;
  }

 private:
  LossStats<T> run(std::span<const Example> batch, std::span<T> grad, Mat<T>* logits_out) const;
  void forward_rows(std::span<const int> tokens, std::span<DecodeCache<T>* const> caches,
                    std::span<T* const> logits_out) const;

  ModelConfig config_;
  std::vector<TensorInfo> tensors_;
  std::vector<T> params_;
  std::vector<T> rope_cos_, rope_sin_;  // max_seq_len x head_dim/2
  int fault_tensor_ = -1;
  T fault_scale_ = 1;

  // tensor indices
  int tok_emb_ = 0, pos_emb_ = -1, final_norm_ = 0, head_ = 0;
  struct LayerIdx {
    int attn_norm, wqkv, wo, ffn_norm, w13, wdown;
  };
  std::vector<LayerIdx> layer_idx_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace gpa::model
