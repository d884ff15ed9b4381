#pragma once

// Adam, RMSProp, L2 penalty, global-norm gradient clipping and weight EMA.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aeslab/checkpoint.hpp"
#include "aeslab/errors.hpp"
#include "aeslab/tensor.hpp"

namespace aeslab {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;
using GradList = std::vector<std::vector<double>>;

inline GradList collect_grads(const ParamList& params) {
  GradList g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(p.tensor.grad());
  return g;
}

inline void zero_grads(ParamList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

namespace detail {

inline void check_aligned(const char* op, const ParamList& params, const GradList& grads) {
  if (params.size() != grads.size()) {
    throw ContractError(std::string(op) + ": " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.size() != grads[i].size()) {
      throw ContractError(std::string(op) + ": gradient for '" + params[i].name + "' has " +
                          std::to_string(grads[i].size()) + " values, parameter has " +
                          std::to_string(params[i].tensor.size()));
    }
  }
}

inline void fit_moments(std::vector<std::vector<double>>& slots, const ParamList& params) {
  if (slots.size() == params.size()) return;
  slots.clear();
  for (const auto& p : params) slots.emplace_back(p.tensor.size(), 0.0);
}

}  // namespace detail

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

inline void adam_step(AdamState& s, ParamList& params, const GradList& grads) {
  detail::check_aligned("adam_step", params, grads);
  detail::fit_moments(s.m, params);
  detail::fit_moments(s.v, params);
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].tensor.data();
    auto& m = s.m[k];
    auto& v = s.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
  }
}

struct RmspropState {
  double lr = 1e-3;
  double beta = 0.9;
  double eps = 1e-8;
  std::vector<std::vector<double>> eg2;
};

inline void rmsprop_step(RmspropState& s, ParamList& params, const GradList& grads) {
  detail::check_aligned("rmsprop_step", params, grads);
  detail::fit_moments(s.eg2, params);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].tensor.data();
    auto& e = s.eg2[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      e[i] = s.beta * e[i] + (1.0 - s.beta) * g[i] * g[i];
      theta[i] -= s.lr * g[i] / std::sqrt(e[i] + s.eps);
    }
  }
}

// lambda * sum of squared entries over all parameters, as a graph node.
inline Tensor l2_penalty(const ParamList& params, double lambda) {
  if (lambda < 0.0) throw ContractError("l2_penalty: lambda must be non-negative");
  std::vector<Tensor> terms;
  for (const auto& p : params) terms.push_back(sum(mul(p.tensor, p.tensor)));
  if (terms.empty()) return Tensor::scalar(0.0);
  return scale(sum(concat(terms, 0)), lambda);
}

inline double global_norm(const GradList& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g) sq += x * x;
  return std::sqrt(sq);
}

// Rescales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
inline double clip_gradients(GradList& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_gradients: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& x : g) x *= f;
  }
  return norm;
}

struct EmaState {
  double decay = 0.9999;
  std::vector<std::vector<double>> shadow;

  // Shadow initialised to the current parameter values.
  static EmaState track(const ParamList& params, double decay) {
    EmaState s;
    s.decay = decay;
    for (const auto& p : params) s.shadow.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    return s;
  }
};

inline void ema_update(EmaState& s, const ParamList& params, double decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw ContractError("ema_update: decay must lie in (0, 1)");
  detail::fit_moments(s.shadow, params);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto p = params[k].tensor.values();
    auto& sh = s.shadow[k];
    if (sh.size() != p.size()) throw ContractError("ema_update: shadow of '" + params[k].name + "' has wrong size");
    for (std::size_t i = 0; i < p.size(); ++i) sh[i] = decay * sh[i] + (1.0 - decay) * p[i];
  }
}

inline void ema_update(EmaState& s, const ParamList& params) { ema_update(s, params, s.decay); }

// Decay ramp min(decay, (1 + step) / (10 + step)) so that early shadows
// follow the weights instead of staying pinned to the initialisation.
inline double ema_warmup_decay(double decay, long long step) {
  return std::min(decay, (1.0 + static_cast<double>(step)) / (10.0 + static_cast<double>(step)));
}

// Overwrites parameter values with the shadow copies.
inline void copy_shadow_to(const EmaState& s, ParamList& params) {
  if (s.shadow.size() != params.size()) throw ContractError("copy_shadow_to: shadow/parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto d = params[k].tensor.data();
    std::copy(s.shadow[k].begin(), s.shadow[k].end(), d.begin());
  }
}

// ---------------------------------------------------------------------------
// Checkpoint entries under reserved prefixes "adam.", "rmsprop.", "ema.".

namespace detail {

inline Tensor slot_tensor(const Tensor& like, const std::vector<double>& v) {
  return Tensor::from(like.rows(), like.cols(), v);
}

inline void load_slots(const Checkpoint& ckpt, const std::string& prefix, const ParamList& params,
                       std::vector<std::vector<double>>& slots) {
  slots.clear();
  for (const auto& p : params) {
    const Tensor& t = ckpt.get(prefix + p.name);
    if (t.shape() != p.tensor.shape()) throw LoadError("checkpoint: optimizer slot '" + prefix + p.name + "' shape mismatch");
    slots.emplace_back(t.values().begin(), t.values().end());
  }
}

}  // namespace detail

inline void store_state(Checkpoint& ckpt, const AdamState& s, const ParamList& params) {
  ckpt.put("adam.t", Tensor::scalar(static_cast<double>(s.t)));
  ckpt.put("adam.hyper", Tensor::row({s.lr, s.beta1, s.beta2, s.eps}));
  for (std::size_t k = 0; k < params.size() && k < s.m.size(); ++k) {
    ckpt.put("adam.m/" + params[k].name, detail::slot_tensor(params[k].tensor, s.m[k]));
    ckpt.put("adam.v/" + params[k].name, detail::slot_tensor(params[k].tensor, s.v[k]));
  }
}

inline AdamState load_adam_state(const Checkpoint& ckpt, const ParamList& params) {
  AdamState s;
  s.t = static_cast<long long>(ckpt.get("adam.t").item());
  const auto h = ckpt.get("adam.hyper").values();
  s.lr = h[0];
  s.beta1 = h[1];
  s.beta2 = h[2];
  s.eps = h[3];
  if (s.t > 0) {
    detail::load_slots(ckpt, "adam.m/", params, s.m);
    detail::load_slots(ckpt, "adam.v/", params, s.v);
  }
  return s;
}

inline void store_state(Checkpoint& ckpt, const RmspropState& s, const ParamList& params) {
  ckpt.put("rmsprop.hyper", Tensor::row({s.lr, s.beta, s.eps}));
  for (std::size_t k = 0; k < params.size() && k < s.eg2.size(); ++k) {
    ckpt.put("rmsprop.eg2/" + params[k].name, detail::slot_tensor(params[k].tensor, s.eg2[k]));
  }
}

inline RmspropState load_rmsprop_state(const Checkpoint& ckpt, const ParamList& params) {
  RmspropState s;
  const auto h = ckpt.get("rmsprop.hyper").values();
  s.lr = h[0];
  s.beta = h[1];
  s.eps = h[2];
  if (!params.empty() && ckpt.contains("rmsprop.eg2/" + params.front().name)) {
    detail::load_slots(ckpt, "rmsprop.eg2/", params, s.eg2);
  }
  return s;
}

inline void store_state(Checkpoint& ckpt, const EmaState& s, const ParamList& params) {
  ckpt.put("ema.decay", Tensor::scalar(s.decay));
  for (std::size_t k = 0; k < params.size() && k < s.shadow.size(); ++k) {
    ckpt.put("ema.shadow/" + params[k].name, detail::slot_tensor(params[k].tensor, s.shadow[k]));
  }
}

inline EmaState load_ema_state(const Checkpoint& ckpt, const ParamList& params) {
  EmaState s;
  s.decay = ckpt.get("ema.decay").item();
  detail::load_slots(ckpt, "ema.shadow/", params, s.shadow);
  return s;
}

}  // namespace aeslab
