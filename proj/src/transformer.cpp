// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gpa/error.hpp"
#include "gpa/model.hpp"

namespace gpa::model {

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(Errc::InvalidArgument, "model config: " + m); };
  if (layers < 1 || heads < 1 || model_dim < 1 || ff_dim < 1) bad("sizes must be positive");
  if (model_dim % heads != 0) bad("model_dim must be divisible by heads");
  if (rope && head_dim() % 2 != 0) bad("rotary positions need an even head_dim");
  if (vocab_size < 1) bad("vocab_size must be positive");
  if (max_seq_len < 1) bad("max_seq_len must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"layers", layers},         {"heads", heads},         {"model_dim", model_dim},
          {"ff_dim", ff_dim},         {"vocab_size", vocab_size}, {"max_seq_len", max_seq_len},
          {"rope", rope},             {"rope_base", rope_base}, {"init_std", init_std}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.rope = j.value("rope", c.rope);
  c.rope_base = j.value("rope_base", c.rope_base);
  c.init_std = j.value("init_std", c.init_std);
  c.validate();
  return c;
}

namespace {

template <class T>
using MapMat = Eigen::Map<Mat<T>>;
template <class T>
using CMapMat = Eigen::Map<const Mat<T>>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <class T>
constexpr T kNormEps = T(1e-6);

// y = x * W for one row; W is row-major in x out. Accumulation order over `in`
// is fixed, so a row's result never depends on what else is in the batch.
template <class T>
void row_matmul(const T* __restrict x, const T* __restrict w, int in, int out, T* __restrict y) {
  std::fill(y, y + out, T(0));
  for (int k = 0; k < in; ++k) {
    const T xk = x[k];
    const T* __restrict wr = w + static_cast<std::size_t>(k) * out;
    for (int j = 0; j < out; ++j) y[j] += xk * wr[j];
  }
}

template <class T>
void row_rmsnorm(const T* x, const T* g, int d, T* y) {
  T ss = 0;
  for (int i = 0; i < d; ++i) ss += x[i] * x[i];
  const T inv = T(1) / std::sqrt(ss / T(d) + kNormEps<T>);
  for (int i = 0; i < d; ++i) y[i] = x[i] * inv * g[i];
}

template <class T>
T silu(T v) {
  return v / (T(1) + std::exp(-v));
}

template <class T>
void rmsnorm_forward(const Mat<T>& x, const T* gain, Mat<T>& y, Vec<T>& inv) {
  const Eigen::Index n = x.rows(), d = x.cols();
  y.resize(n, d);
  inv.resize(n);
  Eigen::Map<const RowVec<T>> g(gain, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T ss = x.row(r).squaredNorm() / T(d);
    inv[r] = T(1) / std::sqrt(ss + kNormEps<T>);
    y.row(r) = x.row(r).cwiseProduct(g) * inv[r];
  }
}

// dx += d(norm)/dx . dy ; dgain += sum_rows dy * x * inv
template <class T>
void rmsnorm_backward(const Mat<T>& x, const T* gain, const Vec<T>& inv, const Mat<T>& dy, Mat<T>& dx,
                      T* dgain) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::Map<const RowVec<T>> g(gain, d);
  Eigen::Map<RowVec<T>> dg(dgain, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T iv = inv[r];
    RowVec<T> dyg = dy.row(r).cwiseProduct(g);
    const T dot = dyg.dot(x.row(r));
    dx.row(r) += dyg * iv - x.row(r) * (iv * iv * iv * dot / T(d));
    if (dgain) dg += dy.row(r).cwiseProduct(x.row(r)) * iv;
  }
}

}  // namespace

template <class T>
Transformer<T>::Transformer(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int D = config_.model_dim, F = config_.ff_dim, V = config_.vocab_size;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols, bool decay) {
    tensors_.push_back({std::move(name), offset, rows, cols, decay});
    offset += static_cast<std::size_t>(rows) * cols;
    return static_cast<int>(tensors_.size()) - 1;
  };
  tok_emb_ = add("tok_emb", V, D, true);
  if (!config_.rope) pos_emb_ = add("pos_emb", config_.max_seq_len, D, true);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerIdx li{};
    li.attn_norm = add(p + "attn_norm", 1, D, false);
    li.wqkv = add(p + "wqkv", D, 3 * D, true);
    li.wo = add(p + "wo", D, D, true);
    li.ffn_norm = add(p + "ffn_norm", 1, D, false);
    li.w13 = add(p + "w13", D, 2 * F, true);
    li.wdown = add(p + "wdown", F, D, true);
    layer_idx_.push_back(li);
  }
  final_norm_ = add("final_norm", 1, D, false);
  head_ = add("head", D, V, true);
  params_.assign(offset, T(0));

  if (config_.rope) {
    const int half = config_.head_dim() / 2;
    rope_cos_.resize(static_cast<std::size_t>(config_.max_seq_len) * half);
    rope_sin_.resize(rope_cos_.size());
    for (int p = 0; p < config_.max_seq_len; ++p) {
      for (int i = 0; i < half; ++i) {
        const double freq = std::pow(config_.rope_base, -2.0 * i / config_.head_dim());
        rope_cos_[static_cast<std::size_t>(p) * half + i] = static_cast<T>(std::cos(p * freq));
        rope_sin_[static_cast<std::size_t>(p) * half + i] = static_cast<T>(std::sin(p * freq));
      }
    }
  }
  init(0);
}

template <class T>
void Transformer<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double residual_scale = 1.0 / std::sqrt(2.0 * config_.layers);
  for (std::size_t t = 0; t < tensors_.size(); ++t) {
    const TensorInfo& info = tensors_[t];
    T* p = params_.data() + info.offset;
    const bool is_norm = info.rows == 1;
    double std = config_.init_std;
    if (info.name.ends_with(".wo") || info.name.ends_with(".wdown")) std *= residual_scale;
    for (std::size_t i = 0; i < info.size(); ++i)
      p[i] = is_norm ? T(1) : static_cast<T>(normal(rng) * std);
  }
}

template <class T>
DecodeCache<T> Transformer<T>::new_cache() const {
  DecodeCache<T> c;
  c.keys.resize(config_.layers);
  c.values.resize(config_.layers);
  return c;
}

// ---------------------------------------------------------------------------
// Training path: packed batch, Eigen GEMMs, explicit backward.

template <class T>
LossStats<T> Transformer<T>::run(std::span<const Example> batch, std::span<T> grad,
                                 Mat<T>* logits_out) const {
  const bool need_grad = !grad.empty();
  if (need_grad && grad.size() != params_.size())
    throw Error(Errc::InvalidArgument, "gradient buffer has wrong size");
  const int D = config_.model_dim, F = config_.ff_dim, V = config_.vocab_size;
  const int H = config_.heads, hd = config_.head_dim(), half = hd / 2;
  const T scale = T(1) / std::sqrt(T(hd));

  std::vector<int> starts, lens;
  int N = 0;
  for (const Example& ex : batch) {
    if (ex.inputs.size() != ex.labels.size())
      throw Error(Errc::InvalidArgument, "inputs and labels differ in length");
    if (static_cast<int>(ex.inputs.size()) > config_.max_seq_len)
      throw Error(Errc::ContextOverflow, "sequence of " + std::to_string(ex.inputs.size()) +
                                            " exceeds max_seq_len " +
                                            std::to_string(config_.max_seq_len));
    starts.push_back(N);
    lens.push_back(static_cast<int>(ex.inputs.size()));
    N += lens.back();
  }

  auto P = [&](int t) { return params_.data() + tensors_[t].offset; };
  auto cmat = [&](int t) {
    return CMapMat<T>(P(t), tensors_[t].rows, tensors_[t].cols);
  };

  // Embedding
  Mat<T> x(N, D);
  std::vector<int> tokens(N), positions(N);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    for (int i = 0; i < lens[s]; ++i) {
      const int tok = batch[s].inputs[i];
      if (tok < 0 || tok >= V) throw Error(Errc::OutOfVocab, "token " + std::to_string(tok));
      const int row = starts[s] + i;
      tokens[row] = tok;
      positions[row] = i;
      x.row(row) = Eigen::Map<const RowVec<T>>(P(tok_emb_) + static_cast<std::size_t>(tok) * D, D);
      if (pos_emb_ >= 0)
        x.row(row) += Eigen::Map<const RowVec<T>>(P(pos_emb_) + static_cast<std::size_t>(i) * D, D);
    }
  }

  struct LayerAct {
    Mat<T> x_in, h1, qkv, att, x_mid, h2, gu, act;
    Vec<T> inv1, inv2;
    std::vector<Mat<T>> probs;  // [seq * H + h], L x L
  };
  std::vector<LayerAct> acts(config_.layers);

  auto rope_rows = [&](Mat<T>& m, int col0, bool inverse) {
    if (!config_.rope) return;
    for (int r = 0; r < N; ++r) {
      const T* c = rope_cos_.data() + static_cast<std::size_t>(positions[r]) * half;
      const T* s = rope_sin_.data() + static_cast<std::size_t>(positions[r]) * half;
      T* row = m.row(r).data() + col0;
      for (int h = 0; h < H; ++h) {
        T* v = row + h * hd;
        for (int i = 0; i < half; ++i) {
          const T a = v[i], b = v[i + half];
          const T sn = inverse ? -s[i] : s[i];
          v[i] = a * c[i] - b * sn;
          v[i + half] = a * sn + b * c[i];
        }
      }
    }
  };

  for (int l = 0; l < config_.layers; ++l) {
    const LayerIdx& li = layer_idx_[l];
    LayerAct& a = acts[l];
    a.x_in = x;
    rmsnorm_forward(x, P(li.attn_norm), a.h1, a.inv1);
    a.qkv.noalias() = a.h1 * cmat(li.wqkv);
    rope_rows(a.qkv, 0, false);
    rope_rows(a.qkv, D, false);
    a.att.setZero(N, D);
    a.probs.resize(batch.size() * H);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const int L = lens[s], r0 = starts[s];
      for (int h = 0; h < H; ++h) {
        auto q = a.qkv.block(r0, h * hd, L, hd);
        auto k = a.qkv.block(r0, D + h * hd, L, hd);
        auto v = a.qkv.block(r0, 2 * D + h * hd, L, hd);
        Mat<T>& pr = a.probs[s * H + h];
        pr.noalias() = (q * k.transpose()) * scale;
        for (int i = 0; i < L; ++i) {
          auto head = pr.row(i).head(i + 1);
          const T mx = head.maxCoeff();
          head.array() = (head.array() - mx).exp();
          head /= head.sum();
          pr.row(i).tail(L - i - 1).setZero();
        }
        a.att.block(r0, h * hd, L, hd).noalias() = pr * v;
      }
    }
    a.x_mid = x;
    a.x_mid.noalias() += a.att * cmat(li.wo);
    rmsnorm_forward(a.x_mid, P(li.ffn_norm), a.h2, a.inv2);
    a.gu.noalias() = a.h2 * cmat(li.w13);
    {
      auto g = a.gu.leftCols(F).array();
      a.act = (g / ((-g).exp() + T(1))) * a.gu.rightCols(F).array();
    }
    x = a.x_mid;
    x.noalias() += a.act * cmat(li.wdown);
    if (!need_grad && !logits_out) {
      // Activations of finished layers are not needed without a backward pass.
      a = LayerAct{};
    }
  }

  Mat<T> hf;
  Vec<T> invf;
  rmsnorm_forward(x, P(final_norm_), hf, invf);

  // Only labelled rows go through the output head.
  std::vector<int> rows;
  std::vector<int> labels;
  for (std::size_t s = 0; s < batch.size(); ++s)
    for (int i = 0; i < lens[s]; ++i)
      if (batch[s].labels[i] >= 0) {
        if (batch[s].labels[i] >= V) throw Error(Errc::OutOfVocab, "label out of vocab");
        rows.push_back(starts[s] + i);
        labels.push_back(batch[s].labels[i]);
      }
  const int M = static_cast<int>(rows.size());
  LossStats<T> stats;
  stats.count = M;
  if (need_grad) std::fill(grad.begin(), grad.end(), T(0));
  if (M == 0) {
    if (logits_out) logits_out->resize(0, V);
    return stats;
  }
  Mat<T> hsel(M, D);
  for (int m = 0; m < M; ++m) hsel.row(m) = hf.row(rows[m]);
  Mat<T> logits;
  logits.noalias() = hsel * cmat(head_);
  if (logits_out) *logits_out = logits;

  // Softmax in place; `logits` becomes the probability matrix.
  double total = 0;
  for (int m = 0; m < M; ++m) {
    auto z = logits.row(m);
    Eigen::Index arg;
    const T mx = z.maxCoeff(&arg);  // first maximum = lowest id
    const T label_logit = z(labels[m]) - mx;
    z.array() = (z.array() - mx).exp();
    const T sum = z.sum();
    total += static_cast<double>(std::log(sum) - label_logit);
    if (arg == labels[m]) ++stats.correct;
    z /= sum;
  }
  stats.loss = static_cast<T>(total / M);
  if (!std::isfinite(static_cast<double>(stats.loss)))
    throw Error(Errc::NaNLoss, "non-finite loss");
  if (!need_grad) return stats;

  // ---- backward ----
  auto G = [&](int t) { return grad.data() + tensors_[t].offset; };
  auto gmat = [&](int t) { return MapMat<T>(G(t), tensors_[t].rows, tensors_[t].cols); };

  Mat<T>& dlogits = logits;
  {
    const T invM = T(1) / T(M);
    dlogits *= invM;
    for (int m = 0; m < M; ++m) dlogits(m, labels[m]) -= invM;
  }
  gmat(head_).noalias() += hsel.transpose() * dlogits;
  Mat<T> dhsel;
  dhsel.noalias() = dlogits * cmat(head_).transpose();
  Mat<T> dhf = Mat<T>::Zero(N, D);
  for (int m = 0; m < M; ++m) dhf.row(rows[m]) += dhsel.row(m);
  Mat<T> dx = Mat<T>::Zero(N, D);
  rmsnorm_backward(x, P(final_norm_), invf, dhf, dx, G(final_norm_));

  Mat<T> dact(N, F), dgu(N, 2 * F), dh(N, D), datt(N, D), dqkv(N, 3 * D);
  for (int l = config_.layers - 1; l >= 0; --l) {
    const LayerIdx& li = layer_idx_[l];
    LayerAct& a = acts[l];
    // x = x_mid + act * wdown
    gmat(li.wdown).noalias() += a.act.transpose() * dx;
    dact.noalias() = dx * cmat(li.wdown).transpose();
    {
      auto g = a.gu.leftCols(F).array();
      auto u = a.gu.rightCols(F).array();
      auto da = dact.array();
      Mat<T> sig = (T(1) / ((-g).exp() + T(1))).matrix();
      auto sa = sig.array();
      dgu.rightCols(F).array() = da * g * sa;
      dgu.leftCols(F).array() = da * u * sa * (T(1) + g * (T(1) - sa));
    }
    gmat(li.w13).noalias() += a.h2.transpose() * dgu;
    dh.noalias() = dgu * cmat(li.w13).transpose();
    // dx currently holds d/dx_mid through the residual; add the norm branch.
    rmsnorm_backward(a.x_mid, P(li.ffn_norm), a.inv2, dh, dx, G(li.ffn_norm));

    // x_mid = x_in + att * wo
    gmat(li.wo).noalias() += a.att.transpose() * dx;
    datt.noalias() = dx * cmat(li.wo).transpose();
    dqkv.setZero();
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const int L = lens[s], r0 = starts[s];
      for (int h = 0; h < H; ++h) {
        auto q = a.qkv.block(r0, h * hd, L, hd);
        auto k = a.qkv.block(r0, D + h * hd, L, hd);
        auto v = a.qkv.block(r0, 2 * D + h * hd, L, hd);
        const Mat<T>& pr = a.probs[s * H + h];
        auto dout = datt.block(r0, h * hd, L, hd);
        Mat<T> dp;
        dp.noalias() = dout * v.transpose();
        dqkv.block(r0, 2 * D + h * hd, L, hd).noalias() = pr.transpose() * dout;
        for (int i = 0; i < L; ++i) {
          T dot = 0;
          for (int j = 0; j <= i; ++j) dot += dp(i, j) * pr(i, j);
          for (int j = 0; j <= i; ++j) dp(i, j) = pr(i, j) * (dp(i, j) - dot) * scale;
          for (int j = i + 1; j < L; ++j) dp(i, j) = 0;
        }
        dqkv.block(r0, h * hd, L, hd).noalias() = dp * k;
        dqkv.block(r0, D + h * hd, L, hd).noalias() = dp.transpose() * q;
      }
    }
    rope_rows(dqkv, 0, true);
    rope_rows(dqkv, D, true);
    gmat(li.wqkv).noalias() += a.h1.transpose() * dqkv;
    dh.noalias() = dqkv * cmat(li.wqkv).transpose();
    rmsnorm_backward(a.x_in, P(li.attn_norm), a.inv1, dh, dx, G(li.attn_norm));
  }

  T* demb = G(tok_emb_);
  for (int r = 0; r < N; ++r) {
    Eigen::Map<RowVec<T>>(demb + static_cast<std::size_t>(tokens[r]) * D, D) += dx.row(r);
    if (pos_emb_ >= 0)
      Eigen::Map<RowVec<T>>(G(pos_emb_) + static_cast<std::size_t>(positions[r]) * D, D) +=
          dx.row(r);
  }

  if (fault_tensor_ >= 0) {
    T* g = G(fault_tensor_);
    for (std::size_t i = 0; i < tensors_[fault_tensor_].size(); ++i) g[i] *= fault_scale_;
  }
  return stats;
}

template <class T>
Mat<T> Transformer<T>::full_logits(std::span<const int> tokens) const {
  Example ex{std::vector<int>(tokens.begin(), tokens.end()), std::vector<int>(tokens.size(), 0)};
  Mat<T> logits;
  run(std::span<const Example>(&ex, 1), {}, &logits);
  return logits;
}

// ---------------------------------------------------------------------------
// Incremental path.

template <class T>
void Transformer<T>::forward_rows(std::span<const int> tokens,
                                  std::span<DecodeCache<T>* const> caches,
                                  std::span<T* const> logits_out) const {
  const int D = config_.model_dim, F = config_.ff_dim, V = config_.vocab_size;
  const int H = config_.heads, hd = config_.head_dim(), half = hd / 2;
  const T scale = T(1) / std::sqrt(T(hd));
  const std::size_t B = tokens.size();
  auto P = [&](int t) { return params_.data() + tensors_[t].offset; };

  for (std::size_t b = 0; b < B; ++b) {
    if (caches[b]->length + 1 > config_.max_seq_len)
      throw Error(Errc::ContextOverflow, "cache at max_seq_len " + std::to_string(config_.max_seq_len));
    if (tokens[b] < 0 || tokens[b] >= V) throw Error(Errc::OutOfVocab, "token " + std::to_string(tokens[b]));
    if (static_cast<int>(caches[b]->keys.size()) != config_.layers)
      throw Error(Errc::InvalidArgument, "cache built for a different model");
  }

  std::vector<T> x(B * D), h(D), qkv(3 * D), att(D), proj(std::max(D, 2 * F)), act(F);
  std::vector<T> scores(config_.max_seq_len);
  for (std::size_t b = 0; b < B; ++b) {
    const int pos = caches[b]->length;
    std::copy_n(P(tok_emb_) + static_cast<std::size_t>(tokens[b]) * D, D, x.data() + b * D);
    if (pos_emb_ >= 0)
      for (int i = 0; i < D; ++i) x[b * D + i] += P(pos_emb_)[static_cast<std::size_t>(pos) * D + i];
  }

  for (int l = 0; l < config_.layers; ++l) {
    const LayerIdx& li = layer_idx_[l];
    for (std::size_t b = 0; b < B; ++b) {
      DecodeCache<T>& cache = *caches[b];
      const int pos = cache.length;
      T* xr = x.data() + b * D;
      row_rmsnorm(xr, P(li.attn_norm), D, h.data());
      row_matmul(h.data(), P(li.wqkv), D, 3 * D, qkv.data());
      if (config_.rope) {
        const T* c = rope_cos_.data() + static_cast<std::size_t>(pos) * half;
        const T* s = rope_sin_.data() + static_cast<std::size_t>(pos) * half;
        for (int part = 0; part < 2; ++part) {
          for (int hh = 0; hh < H; ++hh) {
            T* v = qkv.data() + part * D + hh * hd;
            for (int i = 0; i < half; ++i) {
              const T a = v[i], bb = v[i + half];
              v[i] = a * c[i] - bb * s[i];
              v[i + half] = a * s[i] + bb * c[i];
            }
          }
        }
      }
      auto& keys = cache.keys[l];
      auto& values = cache.values[l];
      keys.resize(static_cast<std::size_t>(pos + 1) * D);
      values.resize(static_cast<std::size_t>(pos + 1) * D);
      std::copy_n(qkv.data() + D, D, keys.data() + static_cast<std::size_t>(pos) * D);
      std::copy_n(qkv.data() + 2 * D, D, values.data() + static_cast<std::size_t>(pos) * D);
      for (int hh = 0; hh < H; ++hh) {
        const T* q = qkv.data() + hh * hd;
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j <= pos; ++j) {
          const T* k = keys.data() + static_cast<std::size_t>(j) * D + hh * hd;
          T dot = 0;
          for (int i = 0; i < hd; ++i) dot += q[i] * k[i];
          scores[j] = dot * scale;
          mx = std::max(mx, scores[j]);
        }
        T sum = 0;
        for (int j = 0; j <= pos; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          sum += scores[j];
        }
        const T invs = T(1) / sum;
        T* o = att.data() + hh * hd;
        std::fill(o, o + hd, T(0));
        for (int j = 0; j <= pos; ++j) {
          const T p = scores[j] * invs;
          const T* v = values.data() + static_cast<std::size_t>(j) * D + hh * hd;
          for (int i = 0; i < hd; ++i) o[i] += p * v[i];
        }
      }
      row_matmul(att.data(), P(li.wo), D, D, proj.data());
      for (int i = 0; i < D; ++i) xr[i] += proj[i];
      row_rmsnorm(xr, P(li.ffn_norm), D, h.data());
      row_matmul(h.data(), P(li.w13), D, 2 * F, proj.data());
      for (int i = 0; i < F; ++i) act[i] = silu(proj[i]) * proj[F + i];
      row_matmul(act.data(), P(li.wdown), F, D, proj.data());
      for (int i = 0; i < D; ++i) xr[i] += proj[i];
    }
  }
  for (std::size_t b = 0; b < B; ++b) {
    caches[b]->length += 1;
    if (logits_out[b]) {
      row_rmsnorm(x.data() + b * D, P(final_norm_), D, h.data());
      row_matmul(h.data(), P(head_), D, V, logits_out[b]);
    }
  }
}

template <class T>
Mat<T> Transformer<T>::forward(std::span<const int> tokens, DecodeCache<T>& cache,
                               bool last_only) const {
  if (cache.length + static_cast<int>(tokens.size()) > config_.max_seq_len)
    throw Error(Errc::ContextOverflow,
                std::to_string(cache.length + tokens.size()) + " positions exceed max_seq_len " +
                    std::to_string(config_.max_seq_len));
  const Eigen::Index rows = last_only ? (tokens.empty() ? 0 : 1) : static_cast<Eigen::Index>(tokens.size());
  Mat<T> logits(rows, config_.vocab_size);
  DecodeCache<T>* cp = &cache;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    T* out = nullptr;
    if (!last_only)
      out = logits.row(static_cast<Eigen::Index>(i)).data();
    else if (i + 1 == tokens.size())
      out = logits.row(0).data();
    forward_rows(tokens.subspan(i, 1), std::span<DecodeCache<T>* const>(&cp, 1),
                 std::span<T* const>(&out, 1));
  }
  return logits;
}

template <class T>
Mat<T> Transformer<T>::forward_batch(std::span<const int> tokens,
                                     std::span<DecodeCache<T>* const> caches) const {
  if (tokens.size() != caches.size())
    throw Error(Errc::InvalidArgument, "one token per cache expected");
  for (std::size_t i = 0; i < caches.size(); ++i)
    for (std::size_t j = i + 1; j < caches.size(); ++j)
      if (caches[i] == caches[j]) throw Error(Errc::InvalidArgument, "cache appears twice in batch");
  Mat<T> logits(static_cast<Eigen::Index>(tokens.size()), config_.vocab_size);
  std::vector<T*> outs(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) outs[i] = logits.row(static_cast<Eigen::Index>(i)).data();
  forward_rows(tokens, caches, outs);
  return logits;
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace gpa::model
