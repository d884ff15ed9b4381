#pragma once

// Linear-chain CRF over Inside/Outside labels, in log space throughout.
// A path y has score sum_t unary[t, y_t] + sum_{t>=1} transition[y_{t-1}, y_t];
// there are no start/end transitions.

#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aeslab/corpus.hpp"
#include "aeslab/encoder.hpp"
#include "aeslab/optim.hpp"
#include "aeslab/tensor.hpp"

namespace aeslab {

inline constexpr std::size_t kIoLabels = 2;  // index 0 = O, 1 = I

struct CrfParams {
  Tensor emission;    // D x L
  Tensor bias;        // 1 x L
  Tensor transition;  // L x L, row = previous label

  static CrfParams init(Rng& rng, std::size_t feature_dim, std::size_t labels = kIoLabels) {
    CrfParams p;
    p.emission = uniform_parameter(rng, feature_dim, labels, 1.0 / std::sqrt(static_cast<double>(feature_dim)));
    p.bias = Tensor::parameter(1, labels, std::vector<double>(labels, 0.0));
    p.transition = Tensor::parameter(labels, labels, std::vector<double>(labels * labels, 0.0));
    return p;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".emission", emission});
    out.push_back({prefix + ".bias", bias});
    out.push_back({prefix + ".transition", transition});
  }
};

// Per-position label log-potentials, T x L.
inline Tensor unary_scores(const Tensor& features, const CrfParams& p) {
  if (features.rows() == 0) throw ContractError("unary_scores: a CRF needs at least one position");
  return add(matmul(features, p.emission), p.bias);
}

// log Z by the forward recursion alpha_t = logsumexp_i(alpha_{t-1}[i] + A[i, .]) + u_t.
inline Tensor log_partition(const Tensor& unary, const Tensor& transition) {
  const std::size_t T = unary.rows();
  const std::size_t L = unary.cols();
  if (T == 0) throw ContractError("log_partition: empty sequence");
  if (transition.rows() != L || transition.cols() != L) {
    detail::shape_mismatch("log_partition", unary.shape(), transition.shape());
  }
  Tensor alpha = row(unary, 0);
  for (std::size_t t = 1; t < T; ++t) {
    alpha = add(logsumexp(add(transpose(alpha), transition), 0), row(unary, t));
  }
  return logsumexp(alpha, 1);
}

inline Tensor path_score(const Tensor& unary, const Tensor& transition, std::span<const std::size_t> labels) {
  const std::size_t T = unary.rows();
  const std::size_t L = unary.cols();
  if (labels.size() != T) {
    throw ContractError("path_score: " + std::to_string(labels.size()) + " labels for " + std::to_string(T) +
                        " positions");
  }
  std::vector<double> pick(T * L, 0.0);
  std::vector<double> moves(L * L, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (labels[t] >= L) throw ContractError("path_score: label index out of range");
    pick[t * L + labels[t]] = 1.0;
    if (t > 0) moves[labels[t - 1] * L + labels[t]] += 1.0;
  }
  const Tensor emit = sum(mul(unary, Tensor::from(T, L, std::move(pick))));
  if (T == 1) return emit;
  return add(emit, sum(mul(transition, Tensor::from(L, L, std::move(moves)))));
}

inline std::vector<std::size_t> label_indices(const IOSequence& io) {
  std::vector<std::size_t> out;
  out.reserve(io.size());
  for (auto l : io) out.push_back(static_cast<std::size_t>(l));
  return out;
}

// -log P(gold | x) = log Z - score(gold).
inline Tensor crf_nll(const Tensor& unary, const Tensor& transition, std::span<const std::size_t> gold) {
  if (gold.size() != unary.rows()) {
    throw ContractError("crf_nll: gold has " + std::to_string(gold.size()) + " labels for " +
                        std::to_string(unary.rows()) + " positions");
  }
  return sub(log_partition(unary, transition), path_score(unary, transition, gold));
}

inline Tensor crf_nll(const Tensor& unary, const Tensor& transition, const IOSequence& gold) {
  const auto idx = label_indices(gold);
  return crf_nll(unary, transition, idx);
}

struct ViterbiResult {
  std::vector<std::size_t> labels;
  double score = 0.0;

  IOSequence io() const {
    IOSequence out;
    out.reserve(labels.size());
    for (auto l : labels) out.push_back(l == 0 ? IoLabel::O : IoLabel::I);
    return out;
  }
};

// Max-score path. Ties go to the lower label index (O before I) both at
// every back-pointer and at the final position.
inline ViterbiResult viterbi_decode(const Tensor& unary, const Tensor& transition) {
  const std::size_t T = unary.rows();
  const std::size_t L = unary.cols();
  if (T == 0) throw ContractError("viterbi_decode: empty sequence");
  if (transition.rows() != L || transition.cols() != L) {
    detail::shape_mismatch("viterbi_decode", unary.shape(), transition.shape());
  }
  const auto u = unary.values();
  const auto a = transition.values();
  std::vector<double> best(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(L));
  std::vector<std::size_t> back(T * L, 0);
  std::vector<double> next(L);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < L; ++j) {
      double top = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t i = 0; i < L; ++i) {
        const double s = best[i] + a[i * L + j];
        if (s > top) {
          top = s;
          arg = i;
        }
      }
      next[j] = top + u[t * L + j];
      back[t * L + j] = arg;
    }
    std::swap(best, next);
  }
  ViterbiResult r;
  r.labels.assign(T, 0);
  std::size_t last = 0;
  for (std::size_t j = 1; j < L; ++j) {
    if (best[j] > best[last]) last = j;
  }
  r.score = best[last];
  r.labels[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) r.labels[t - 1] = back[t * L + r.labels[t]];
  return r;
}

}  // namespace aeslab
