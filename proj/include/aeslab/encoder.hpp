#pragma once

// Sequence encoder: embedding table -> BiLSTM -> restricted self-attention
// -> BiLSTM over [h_t, a_t].

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aeslab/corpus.hpp"
#include "aeslab/optim.hpp"
#include "aeslab/rng.hpp"
#include "aeslab/tensor.hpp"

namespace aeslab {

inline Tensor uniform_parameter(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::parameter(rows, cols, std::move(v));
}

// Dropout switch threaded through forward passes. Inactive means eval mode.
struct Dropout {
  bool active = false;
  double keep_prob = 1.0;
  Rng* rng = nullptr;

  Tensor operator()(const Tensor& x) const {
    if (!active || keep_prob >= 1.0 || x.size() == 0) return x;
    return dropout(x, dropout_mask(*rng, x.size(), keep_prob), keep_prob);
  }
};

// Single-direction LSTM; gate blocks in w_ih / w_hh / bias are ordered
// input, forget, cell candidate, output.
struct LstmParams {
  Tensor w_ih;  // input_dim x 4h
  Tensor w_hh;  // h x 4h
  Tensor bias;  // 1 x 4h

  std::size_t hidden() const { return w_hh.rows(); }

  static LstmParams init(Rng& rng, std::size_t input_dim, std::size_t hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    LstmParams p;
    p.w_ih = uniform_parameter(rng, input_dim, 4 * hidden, bound);
    p.w_hh = uniform_parameter(rng, hidden, 4 * hidden, bound);
    std::vector<double> b(4 * hidden, 0.0);
    std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden), b.begin() + static_cast<std::ptrdiff_t>(2 * hidden), 1.0);
    p.bias = Tensor::parameter(1, 4 * hidden, std::move(b));
    return p;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w_ih", w_ih});
    out.push_back({prefix + ".w_hh", w_hh});
    out.push_back({prefix + ".bias", bias});
  }
};

// Runs the recurrence over the rows of x (T x input_dim) with zero initial
// state; `reverse` walks from the last row. Row t of the result is the
// hidden state after consuming row t.
inline Tensor lstm_pass(const Tensor& x, const LstmParams& p, bool reverse) {
  const std::size_t T = x.rows();
  const std::size_t h = p.hidden();
  if (x.cols() != p.w_ih.rows()) detail::shape_mismatch("lstm", x.shape(), p.w_ih.shape());
  if (T == 0) return Tensor::zeros(0, h);
  const Tensor xw = add(matmul(x, p.w_ih), p.bias);
  Tensor hs = Tensor::zeros(1, h);
  Tensor cs = Tensor::zeros(1, h);
  std::vector<Tensor> outs(T);
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = reverse ? T - 1 - k : k;
    const Tensor gates = add(row(xw, t), matmul(hs, p.w_hh));
    const Tensor i = sigmoid(slice(gates, 1, 0, h));
    const Tensor f = sigmoid(slice(gates, 1, h, 2 * h));
    const Tensor g = tanh(slice(gates, 1, 2 * h, 3 * h));
    const Tensor o = sigmoid(slice(gates, 1, 3 * h, 4 * h));
    cs = add(mul(f, cs), mul(i, g));
    hs = mul(o, tanh(cs));
    outs[t] = hs;
  }
  return concat(outs, 0);
}

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  std::size_t hidden() const { return forward.hidden(); }

  static BiLstmParams init(Rng& rng, std::size_t input_dim, std::size_t hidden) {
    BiLstmParams p;
    p.forward = LstmParams::init(rng, input_dim, hidden);
    p.backward = LstmParams::init(rng, input_dim, hidden);
    return p;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    forward.collect(out, prefix + ".fwd");
    backward.collect(out, prefix + ".bwd");
  }
};

// T x k -> T x 2h: [left-to-right | right-to-left].
inline Tensor bilstm(const Tensor& x, const BiLstmParams& p) {
  if (x.rows() == 0) return Tensor::zeros(0, 2 * p.hidden());
  return concat({lstm_pass(x, p.forward, false), lstm_pass(x, p.backward, true)}, 1);
}

// Clipped attention window [lo, hi) of position i.
struct Window {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline Window attention_window(std::size_t i, std::size_t length, std::size_t k) {
  return {i >= k ? i - k : 0, std::min(length, i + k + 1)};
}

// Attention weights of one position, kept for inspection.
struct AttentionRow {
  Window window;
  std::vector<double> alpha;
};

// Restricted self-attention over rows of h (T x D) with scoring
// s_ij = w^T [h_i, h_j, h_i * h_j] and softmax over the clipped window
// |i - j| <= K. w_attn is 3D x 1.
inline Tensor rsa_attend(const Tensor& h, const Tensor& w_attn, std::size_t window,
                         std::vector<AttentionRow>* trace = nullptr) {
  const std::size_t T = h.rows();
  const std::size_t D = h.cols();
  if (window < 1) throw ContractError("rsa_attend: window size must be at least 1");
  if (w_attn.rows() != 3 * D || w_attn.cols() != 1) detail::shape_mismatch("rsa_attend", h.shape(), w_attn.shape());
  if (T == 0) return Tensor::zeros(0, D);
  const Tensor w_self = slice(w_attn, 0, 0, D);
  const Tensor w_other = slice(w_attn, 0, D, 2 * D);
  const Tensor w_prod = slice(w_attn, 0, 2 * D, 3 * D);
  const Tensor self_score = matmul(h, w_self);    // T x 1
  const Tensor other_score = matmul(h, w_other);  // T x 1
  std::vector<Tensor> rows(T);
  for (std::size_t i = 0; i < T; ++i) {
    const Window w = attention_window(i, T, window);
    const Tensor hw = slice(h, 0, w.lo, w.hi);
    const Tensor hi = row(h, i);
    const Tensor s = add(add(slice(other_score, 0, w.lo, w.hi), row(self_score, i)), matmul(mul(hw, hi), w_prod));
    const Tensor alpha = softmax(s, 0);
    rows[i] = matmul(transpose(alpha), hw);
    if (trace) trace->push_back({w, std::vector<double>(alpha.values().begin(), alpha.values().end())});
  }
  return concat(rows, 0);
}

struct EncoderConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden = 32;
  std::size_t window = 5;
  double keep_prob = 0.9;
};

struct EncoderParams {
  EncoderConfig config;
  Tensor embedding;  // vocab x d
  BiLstmParams lower;
  Tensor w_attn;  // 3 * 2h x 1
  BiLstmParams upper;

  std::size_t output_dim() const { return 2 * config.hidden; }

  static EncoderParams init(Rng& rng, std::size_t vocab_size, const EncoderConfig& cfg) {
    if (cfg.window < 1) throw ContractError("encoder: window size must be at least 1");
    EncoderParams p;
    p.config = cfg;
    p.embedding = uniform_parameter(rng, vocab_size, cfg.embed_dim, 0.5);
    p.lower = BiLstmParams::init(rng, cfg.embed_dim, cfg.hidden);
    p.w_attn = uniform_parameter(rng, 3 * 2 * cfg.hidden, 1, 0.1);
    p.upper = BiLstmParams::init(rng, 4 * cfg.hidden, cfg.hidden);
    return p;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".embedding", embedding});
    lower.collect(out, prefix + ".lower");
    out.push_back({prefix + ".w_attn", w_attn});
    upper.collect(out, prefix + ".upper");
  }
};

inline Tensor embed(const std::vector<std::size_t>& ids, const EncoderParams& p) {
  if (ids.empty()) return Tensor::zeros(0, p.config.embed_dim);
  return gather_rows(p.embedding, ids);
}

inline Tensor embed(const TokenSequence& seq, const EncoderParams& p) { return embed(seq.ids(), p); }

inline Tensor encode(const std::vector<std::size_t>& ids, const EncoderParams& p, const Dropout& drop = {}) {
  const Tensor e = drop(embed(ids, p));
  const Tensor h = drop(bilstm(e, p.lower));
  const Tensor a = rsa_attend(h, p.w_attn, p.config.window);
  if (h.rows() == 0) return Tensor::zeros(0, p.output_dim());
  return bilstm(concat({h, a}, 1), p.upper);
}

inline Tensor encode(const TokenSequence& seq, const EncoderParams& p, const Dropout& drop = {}) {
  return encode(seq.ids(), p, drop);
}

}  // namespace aeslab
