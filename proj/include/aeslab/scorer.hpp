#pragma once

// Essay scorer: encoder backbone, BiLSTM/FFN head with feature injection,
// MSE + margin-ranking losses, QWK, and a cross-validated RMSProp trainer.

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aeslab/augment.hpp"
#include "aeslab/checkpoint.hpp"
#include "aeslab/corpus.hpp"
#include "aeslab/encoder.hpp"
#include "aeslab/optim.hpp"
#include "aeslab/rng.hpp"
#include "aeslab/segmenter.hpp"
#include "aeslab/tensor.hpp"
#include "json.hpp"

namespace aeslab {

// ---------------------------------------------------------------------------
// Losses

namespace detail {

inline void check_batch(const char* op, const Tensor& pred, const std::vector<double>& gold) {
  if (pred.rows() != 1) throw DimensionError(std::string(op) + ": predictions must be a 1 x n row, got " + pred.shape().str());
  if (pred.cols() != gold.size()) {
    throw ContractError(std::string(op) + ": " + std::to_string(pred.cols()) + " predictions for " +
                        std::to_string(gold.size()) + " gold scores");
  }
  if (gold.empty()) throw ContractError(std::string(op) + ": empty batch");
}

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace detail

// pred is 1 x n.
inline Tensor mse_loss(const Tensor& pred, const std::vector<double>& gold) {
  detail::check_batch("mse_loss", pred, gold);
  const Tensor d = sub(pred, Tensor::row(gold));
  return mean(mul(d, d));
}

// Pairwise hinge over unordered pairs i < j:
//   max(0, -r_ij (y_i - y_j) + b),  r_ij = +1 if g_i > g_j, -1 if g_i < g_j,
//   and -sgn(y_i - y_j) when the gold scores tie; averaged over n(n-1)/2.
inline Tensor margin_ranking_loss(const Tensor& pred, const std::vector<double>& gold, double margin = 0.0) {
  detail::check_batch("margin_ranking_loss", pred, gold);
  const std::size_t n = gold.size();
  if (n == 1) return scale(sum(pred), 0.0);  // no pairs; stays attached to the graph
  const auto y = pred.values();
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<double> select(n * pairs, 0.0);  // n x pairs; column p picks y_i - y_j
  std::vector<double> neg_r(pairs);
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      select[i * pairs + p] = 1.0;
      select[j * pairs + p] = -1.0;
      const double r = gold[i] > gold[j] ? 1.0 : (gold[i] < gold[j] ? -1.0 : -detail::sgn(y[i] - y[j]));
      neg_r[p] = -r;
    }
  }
  const Tensor diffs = matmul(pred, Tensor::from(n, pairs, std::move(select)));
  return mean(relu(add_scalar(mul(diffs, Tensor::row(std::move(neg_r))), margin)));
}

inline void check_loss_weights(double alpha, double beta) {
  if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) throw ConfigError("loss weights must lie in [0, 1]");
  if (std::abs(alpha + beta - 1.0) > 1e-12) throw ConfigError("loss weights must satisfy alpha = 1 - beta");
}

inline Tensor combined_loss(const Tensor& pred, const std::vector<double>& gold, double alpha, double beta,
                            double margin = 0.0) {
  check_loss_weights(alpha, beta);
  if (beta == 0.0) return mse_loss(pred, gold);
  if (alpha == 0.0) return margin_ranking_loss(pred, gold, margin);
  return add(scale(mse_loss(pred, gold), alpha), scale(margin_ranking_loss(pred, gold, margin), beta));
}

// ---------------------------------------------------------------------------
// Quadratic weighted kappa

inline double qwk(const std::vector<int>& predicted, const std::vector<int>& gold, const ScoreRange& range) {
  if (predicted.size() != gold.size()) throw ContractError("qwk: length mismatch");
  if (predicted.empty()) throw ContractError("qwk: no scores");
  const int lo = range.min_score;
  const auto C = static_cast<std::size_t>(range.categories());
  auto bin = [&](int s) {
    if (s < lo || s > range.max_score) {
      throw ContractError("qwk: score " + std::to_string(s) + " outside " + std::to_string(lo) + ".." +
                          std::to_string(range.max_score));
    }
    return static_cast<std::size_t>(s - lo);
  };
  std::vector<double> observed(C * C, 0.0), hp(C, 0.0), hg(C, 0.0);
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const auto a = bin(predicted[k]);
    const auto b = bin(gold[k]);
    observed[a * C + b] += 1.0;
    hp[a] += 1.0;
    hg[b] += 1.0;
  }
  if (C == 1) return 1.0;
  const double n = static_cast<double>(predicted.size());
  const double denom_w = static_cast<double>((C - 1) * (C - 1));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d / denom_w;
      num += w * observed[i * C + j];
      den += w * hp[i] * hg[j] / n;
    }
  }
  if (den == 0.0) return 1.0;
  return 1.0 - num / den;
}

// ---------------------------------------------------------------------------
// Configuration

// Context configurations, named after the ablation rows.
enum class Context { none, mr, mr_prompt, mr_edu, mr_ac, mr_ac_prompt, mr_ac_prompt_features };

struct ContextFlags {
  bool mr = false;
  bool prompt = false;
  bool edu = false;
  bool ac = false;
  bool features = false;
};

inline ContextFlags flags_of(Context c) {
  switch (c) {
    case Context::none: return {};
    case Context::mr: return {true, false, false, false, false};
    case Context::mr_prompt: return {true, true, false, false, false};
    case Context::mr_edu: return {true, false, true, false, false};
    case Context::mr_ac: return {true, false, false, true, false};
    case Context::mr_ac_prompt: return {true, true, false, true, false};
    case Context::mr_ac_prompt_features: return {true, true, false, true, true};
  }
  return {};
}

inline const std::vector<std::pair<Context, std::string>>& context_names() {
  static const std::vector<std::pair<Context, std::string>> names = {
      {Context::none, "none"},         {Context::mr, "mr"},
      {Context::mr_prompt, "mr+prompt"}, {Context::mr_edu, "mr+edu"},
      {Context::mr_ac, "mr+ac"},       {Context::mr_ac_prompt, "mr+ac+prompt"},
      {Context::mr_ac_prompt_features, "mr+ac+prompt+features"}};
  return names;
}

inline std::string to_string(Context c) {
  for (const auto& [k, n] : context_names())
    if (k == c) return n;
  return "none";
}

inline std::optional<Context> parse_context(std::string_view s) {
  for (const auto& [k, n] : context_names())
    if (n == s) return k;
  return std::nullopt;
}

struct ScorerConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden = 32;  // backbone BiLSTM width per direction
  std::size_t window = 5;
  std::size_t head_hidden = 16;  // BiLSTM-A; FFN-A tapers 2h -> h -> h/2 -> 1
  std::size_t seq_hidden = 16;   // BiLSTM-B; FFN-B likewise
  double alpha = 0.9;
  double beta = 0.1;
  double margin = 0.0;
  std::size_t epochs = 150;
  double learning_rate = 3e-5;
  double dropout = 0.4;
  std::size_t batch_size = 128;
  std::size_t patience = 15;  // 0 disables early stopping
  std::size_t folds = 10;     // 1 trains on everything and selects on the training data
  std::size_t seeds = 1;
  double max_grad_norm = 0.0;  // 0 disables clipping
  Context context = Context::none;
  bool prompt_specific = false;
  bool raw_features = false;

  EncoderConfig encoder() const { return {embed_dim, hidden, window, 1.0 - dropout}; }
  ContextFlags flags() const { return flags_of(context); }

  void validate() const {
    check_loss_weights(alpha, beta);
    if (embed_dim == 0 || hidden == 0 || head_hidden == 0 || seq_hidden == 0) {
      throw ConfigError("scorer widths must be positive");
    }
    if (window < 1) throw ConfigError("window must be at least 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (folds == 0) throw ConfigError("folds must be at least 1");
    if (seeds == 0) throw ConfigError("seeds must be at least 1");
    if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be non-negative");
  }
};

inline nlohmann::ordered_json to_json(const ScorerConfig& c) {
  return {{"embed_dim", c.embed_dim},   {"hidden", c.hidden},
          {"window", c.window},         {"head_hidden", c.head_hidden},
          {"seq_hidden", c.seq_hidden}, {"alpha", c.alpha},
          {"beta", c.beta},             {"margin", c.margin},
          {"epochs", c.epochs},         {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},       {"batch_size", c.batch_size},
          {"patience", c.patience},     {"folds", c.folds},
          {"seeds", c.seeds},           {"max_grad_norm", c.max_grad_norm},
          {"context", to_string(c.context)}, {"prompt_specific", c.prompt_specific},
          {"raw_features", c.raw_features}};
}

inline ScorerConfig scorer_config_from_json(const nlohmann::json& j) {
  ScorerConfig c;
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.head_hidden = j.at("head_hidden").get<std::size_t>();
  c.seq_hidden = j.at("seq_hidden").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.margin = j.at("margin").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.folds = j.at("folds").get<std::size_t>();
  c.seeds = j.at("seeds").get<std::size_t>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  const auto ctx = parse_context(j.at("context").get<std::string>());
  if (!ctx) throw ConfigError("unknown context '" + j.at("context").get<std::string>() + "'");
  c.context = *ctx;
  c.prompt_specific = j.at("prompt_specific").get<bool>();
  c.raw_features = j.at("raw_features").get<bool>();
  return c;
}

// ---------------------------------------------------------------------------
// Head

struct Dense {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  static Dense init(Rng& rng, std::size_t in, std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return {uniform_parameter(rng, in, out, bound), Tensor::parameter(1, out, std::vector<double>(out, 0.0))};
  }
  Tensor operator()(const Tensor& x) const { return add(matmul(x, w), b); }
  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

// Three dense layers, in -> h -> h/2 -> 1, tanh between them.
struct Ffn {
  Dense l1, l2, l3;

  static Ffn init(Rng& rng, std::size_t in, std::size_t h) {
    const std::size_t h2 = std::max<std::size_t>(1, h / 2);
    return {Dense::init(rng, in, h), Dense::init(rng, h, h2), Dense::init(rng, h2, 1)};
  }
  Tensor operator()(const Tensor& x) const { return l3(tanh(l2(tanh(l1(x))))); }
  void collect(ParamList& out, const std::string& prefix) const {
    l1.collect(out, prefix + ".l1");
    l2.collect(out, prefix + ".l2");
    l3.collect(out, prefix + ".l3");
  }
};

struct HeadParams {
  BiLstmParams lstm_a;
  Ffn ffn_a;
  Dense feature_proj;  // 4 -> 4 pseudo-positions
  BiLstmParams lstm_b;
  Ffn ffn_b;

  static HeadParams init(Rng& rng, std::size_t input_dim, std::size_t head_hidden, std::size_t seq_hidden) {
    HeadParams p;
    p.lstm_a = BiLstmParams::init(rng, input_dim, head_hidden);
    p.ffn_a = Ffn::init(rng, 2 * head_hidden, head_hidden);
    p.feature_proj = Dense::init(rng, FeatureVector::size(), FeatureVector::size());
    p.lstm_b = BiLstmParams::init(rng, 1, seq_hidden);
    p.ffn_b = Ffn::init(rng, 2 * seq_hidden, seq_hidden);
    return p;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    lstm_a.collect(out, prefix + ".lstm_a");
    ffn_a.collect(out, prefix + ".ffn_a");
    feature_proj.collect(out, prefix + ".feature_proj");
    lstm_b.collect(out, prefix + ".lstm_b");
    ffn_b.collect(out, prefix + ".ffn_b");
  }
};

// encoded: T x D. BiLSTM-A and FFN-A reduce every position to one value;
// the projected features, when given, become four leading positions; then
// BiLSTM-B reads the column and FFN-B maps [last forward, first backward]
// state to the scalar scaled score.
inline Tensor head_forward(const Tensor& encoded, const std::optional<std::vector<double>>& features,
                           const HeadParams& p, const Dropout& drop = {}) {
  if (encoded.rows() == 0) throw ContractError("head_forward: empty sequence");
  const Tensor per_position = p.ffn_a(drop(bilstm(encoded, p.lstm_a)));  // T x 1
  Tensor column = per_position;
  if (features) {
    if (features->size() != FeatureVector::size()) throw DimensionError("head_forward: expected 4 features");
    const Tensor injected = transpose(p.feature_proj(Tensor::row(*features)));  // 4 x 1
    column = concat({injected, per_position}, 0);
  }
  const Tensor states = bilstm(column, p.lstm_b);
  const std::size_t n = states.rows();
  const std::size_t h = p.lstm_b.hidden();
  const Tensor summary = concat({slice(row(states, n - 1), 1, 0, h), slice(row(states, 0), 1, h, 2 * h)}, 1);
  return p.ffn_b(summary);
}

// ---------------------------------------------------------------------------
// Model

// Per-feature standardisation fitted on training data.
struct FeatureNorm {
  std::vector<double> mean = std::vector<double>(FeatureVector::size(), 0.0);
  std::vector<double> stddev = std::vector<double>(FeatureVector::size(), 1.0);

  static FeatureNorm fit(const std::vector<FeatureVector>& fs) {
    FeatureNorm n;
    if (fs.empty()) return n;
    const double count = static_cast<double>(fs.size());
    for (std::size_t k = 0; k < FeatureVector::size(); ++k) {
      double m = 0.0, v = 0.0;
      for (const auto& f : fs) m += f.values()[k];
      m /= count;
      for (const auto& f : fs) v += (f.values()[k] - m) * (f.values()[k] - m);
      v = std::sqrt(v / count);
      n.mean[k] = m;
      n.stddev[k] = v > 0.0 ? v : 1.0;
    }
    return n;
  }

  std::vector<double> apply(const FeatureVector& f) const {
    auto v = f.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - mean[k]) / stddev[k];
    return v;
  }

  bool operator==(const FeatureNorm&) const = default;
};

struct ScorerModel {
  ScorerConfig config;
  Vocabulary vocab;
  PromptScaler scaler;
  FeatureNorm feature_norm;
  std::map<int, std::string> prompts;
  std::optional<int> essay_set;  // set of a prompt-specific model
  EncoderParams encoder;
  HeadParams head;

  static ScorerModel init(const ScorerConfig& cfg, Vocabulary vocab, std::uint64_t seed) {
    ScorerModel m;
    m.config = cfg;
    m.vocab = std::move(vocab);
    Rng rng = Rng::derive(seed, 0xae5);
    m.encoder = EncoderParams::init(rng, m.vocab.size(), cfg.encoder());
    m.head = HeadParams::init(rng, m.encoder.output_dim(), cfg.head_hidden, cfg.seq_hidden);
    return m;
  }

  ParamList params() const {
    ParamList p;
    encoder.collect(p, "encoder");
    head.collect(p, "head");
    return p;
  }

  std::optional<std::vector<double>> feature_input(const FeatureVector& f) const {
    if (!config.flags().features) return std::nullopt;
    return config.raw_features ? f.values() : feature_norm.apply(f);
  }

  Tensor forward(const std::vector<std::size_t>& ids, const std::optional<std::vector<double>>& features,
                 const Dropout& drop = {}) const {
    return head_forward(encode(ids, encoder, drop), features, head, drop);
  }
};

// One essay with whatever span annotations are available for it. Spans
// index the tokens of the essay text alone.
struct AesExample {
  EssayRecord record;
  std::optional<std::vector<Span>> edu_spans;
  std::optional<std::vector<Span>> ac_spans;
};

struct AesDataset {
  std::vector<AesExample> examples;
  std::map<int, std::string> prompts;
};

// Builds the model input of one essay; the vocabulary grows only when
// `grow` is given (training fold).
inline AugmentedInput augment_example(const ScorerModel& m, const AesExample& ex, Vocabulary* grow = nullptr) {
  const auto f = m.config.flags();
  std::optional<std::string> prompt;
  if (f.prompt) {
    const auto it = m.prompts.find(ex.record.essay_set);
    if (it == m.prompts.end()) {
      throw ContractError("no prompt text for essay set " + std::to_string(ex.record.essay_set));
    }
    prompt = it->second;
  }
  if (f.edu && !ex.edu_spans) throw ContractError("essay " + std::to_string(ex.record.essay_id) + " has no EDU spans");
  if (f.ac && !ex.ac_spans) throw ContractError("essay " + std::to_string(ex.record.essay_id) + " has no AC spans");
  const auto edu = f.edu ? ex.edu_spans : std::nullopt;
  const auto ac = f.ac ? ex.ac_spans : std::nullopt;
  AugmentedInput in = grow ? assemble_context(ex.record.text, prompt, edu, ac, *grow, TokenizeMode::training)
                           : assemble_context(ex.record.text, prompt, edu, ac, m.vocab);
  // Counts use every annotation available, not only the marked kind.
  in.features = extract_features(ex.record.text, ex.ac_spans.value_or(std::vector<Span>{}),
                                 ex.edu_spans.value_or(std::vector<Span>{}));
  in.essay_set = ex.record.essay_set;
  return in;
}

inline std::vector<std::size_t> model_ids(const ScorerModel& m, const TokenSequence& seq) {
  std::vector<std::size_t> ids;
  ids.reserve(seq.size());
  for (const auto& t : seq.tokens) ids.push_back(t.is_special ? m.vocab.special(t.surface) : m.vocab.find(t.surface));
  return ids;
}

inline long long round_half_away(double x) { return static_cast<long long>(std::round(x)); }

// Head output -> score scale -> nearest integer (halves away from zero) ->
// clamped to the set's range.
inline int to_integer_score(double scaled, int essay_set, const PromptScaler& scaler, const ScoreRangeTable& ranges) {
  const auto it = ranges.find(essay_set);
  if (it == ranges.end()) throw ContractError("no score range for essay set " + std::to_string(essay_set));
  const long long r = round_half_away(scaler.inverse(essay_set, scaled));
  return static_cast<int>(std::clamp<long long>(r, it->second.min_score, it->second.max_score));
}

inline int predict_score(const ScorerModel& m, const AugmentedInput& in,
                         const ScoreRangeTable& ranges = asap_score_ranges()) {
  if (!m.scaler.knows(in.essay_set)) {
    throw ContractError("predict_score: essay set " + std::to_string(in.essay_set) + " unknown to the scaler");
  }
  const double z = m.forward(model_ids(m, in.tokens), m.feature_input(in.features)).item();
  return to_integer_score(z, in.essay_set, m.scaler, ranges);
}

inline int predict_score(const ScorerModel& m, const AesExample& ex, const ScoreRangeTable& ranges = asap_score_ranges()) {
  return predict_score(m, augment_example(m, ex), ranges);
}

// Per-set QWK plus their unweighted mean.
struct QwkReport {
  std::map<int, double> per_set;
  double mean = 0.0;
};

inline QwkReport qwk_by_set(const std::vector<int>& predicted, const std::vector<int>& gold,
                            const std::vector<int>& sets, const ScoreRangeTable& ranges = asap_score_ranges()) {
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> by;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    by[sets[i]].first.push_back(predicted[i]);
    by[sets[i]].second.push_back(gold[i]);
  }
  QwkReport r;
  for (const auto& [set, pg] : by) {
    const auto it = ranges.find(set);
    if (it == ranges.end()) throw ContractError("no score range for essay set " + std::to_string(set));
    r.per_set[set] = qwk(pg.first, pg.second, it->second);
    r.mean += r.per_set[set];
  }
  if (!r.per_set.empty()) r.mean /= static_cast<double>(r.per_set.size());
  return r;
}

// Integer predictions for every example, fanned out over `workers` threads.
inline std::vector<int> predict_all(const ScorerModel& m, const std::vector<AesExample>& xs, std::size_t workers = 1,
                                    const ScoreRangeTable& ranges = asap_score_ranges()) {
  std::vector<int> out(xs.size());
  workers = std::max<std::size_t>(1, std::min(workers, xs.size()));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < xs.size(); i += workers) out[i] = predict_score(m, xs[i], ranges);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline QwkReport evaluate_scorer(const ScorerModel& m, const std::vector<AesExample>& xs, std::size_t workers = 1,
                                 const ScoreRangeTable& ranges = asap_score_ranges()) {
  std::vector<int> gold, sets;
  for (const auto& x : xs) {
    gold.push_back(x.record.resolved_score);
    sets.push_back(x.record.essay_set);
  }
  return qwk_by_set(predict_all(m, xs, workers, ranges), gold, sets, ranges);
}

// ---------------------------------------------------------------------------
// Training

struct AesEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_qwk = 0.0;
};

struct TrainHistory {
  std::vector<AesEpoch> epochs;
  std::size_t best_epoch = 0;
  double best_qwk = 0.0;
  std::string stop_reason;  // "patience" or "max_epochs"
};

struct AesTrainResult {
  ScorerModel model;
  TrainHistory history;
  RmspropState rmsprop;
};

namespace detail {

struct Prepared {
  std::vector<std::size_t> ids;
  std::optional<std::vector<double>> features;
  double target = 0.0;
};

inline std::vector<int> predict_prepared(const ScorerModel& m, const std::vector<Prepared>& xs,
                                         const std::vector<AesExample>& src, const ScoreRangeTable& ranges) {
  std::vector<int> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.push_back(
        to_integer_score(m.forward(xs[i].ids, xs[i].features).item(), src[i].record.essay_set, m.scaler, ranges));
  }
  return out;
}

}  // namespace detail

// Trains one model on `train` and early-stops on validation QWK, keeping the
// best epoch's weights. An empty `validation` selects on the training data.
inline AesTrainResult train_scorer(const std::vector<AesExample>& train, const std::vector<AesExample>& validation,
                                   const std::map<int, std::string>& prompts, const ScorerConfig& cfg,
                                   std::uint64_t seed, const ScoreRangeTable& ranges = asap_score_ranges()) {
  cfg.validate();
  if (train.empty()) throw ContractError("train_scorer: no training essays");
  const auto& select = validation.empty() ? train : validation;

  std::vector<EssayRecord> records;
  for (const auto& x : train) records.push_back(x.record);

  // Vocabulary and statistics come from the training essays only.
  ScorerModel probe;
  probe.config = cfg;
  probe.prompts = prompts;
  Vocabulary vocab;
  std::vector<AugmentedInput> train_in;
  for (const auto& x : train) train_in.push_back(augment_example(probe, x, &vocab));

  AesTrainResult r;
  r.model = ScorerModel::init(cfg, std::move(vocab), seed);
  ScorerModel& m = r.model;
  m.prompts = prompts;
  m.scaler = fit_prompt_scaler(records);
  {
    std::vector<FeatureVector> fs;
    for (const auto& in : train_in) fs.push_back(in.features);
    m.feature_norm = FeatureNorm::fit(fs);
  }
  for (const auto& x : select) {
    if (!m.scaler.knows(x.record.essay_set)) {
      throw StratificationError("essay set " + std::to_string(x.record.essay_set) + " is absent from training");
    }
  }

  std::vector<detail::Prepared> tr, sel;
  for (std::size_t i = 0; i < train.size(); ++i) {
    tr.push_back({model_ids(m, train_in[i].tokens), m.feature_input(train_in[i].features),
                  m.scaler.scale(train[i].record.essay_set, train[i].record.resolved_score)});
  }
  for (const auto& x : select) {
    const auto in = augment_example(m, x);
    sel.push_back({model_ids(m, in.tokens), m.feature_input(in.features), 0.0});
  }
  std::vector<int> sel_gold, sel_sets;
  for (const auto& x : select) {
    sel_gold.push_back(x.record.resolved_score);
    sel_sets.push_back(x.record.essay_set);
  }

  ParamList params = m.params();
  r.rmsprop.lr = cfg.learning_rate;
  const bool ranking = cfg.flags().mr;
  const double alpha = ranking ? cfg.alpha : 1.0;
  const double beta = ranking ? cfg.beta : 0.0;

  ParamSnapshot best = snapshot(params);
  double best_qwk = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  r.history.stop_reason = "max_epochs";
  std::vector<std::size_t> idx(tr.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng shuffle_rng = Rng::derive(seed, 0xa5f1, epoch);
    shuffle_rng.shuffle(idx);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < idx.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(idx.size(), b + cfg.batch_size);
      Rng drop_rng = Rng::derive(seed, 0xad0, step);
      const Dropout drop{true, 1.0 - cfg.dropout, &drop_rng};
      Graph graph;
      Tensor loss;
      {
        GraphScope scope(graph);
        std::vector<Tensor> preds;
        std::vector<double> gold;
        for (std::size_t k = b; k < e; ++k) {
          const auto& x = tr[idx[k]];
          preds.push_back(m.forward(x.ids, x.features, drop));
          gold.push_back(x.target);
        }
        loss = combined_loss(concat(preds, 1), gold, alpha, beta, cfg.margin);
      }
      zero_grads(params);
      backward(graph, loss);
      GradList grads = collect_grads(params);
      if (cfg.max_grad_norm > 0.0) clip_gradients(grads, cfg.max_grad_norm);
      rmsprop_step(r.rmsprop, params, grads);
      ++step;
      loss_sum += loss.item();
      ++batches;
    }
    const double q = qwk_by_set(detail::predict_prepared(m, sel, select, ranges), sel_gold, sel_sets, ranges).mean;
    r.history.epochs.push_back({epoch, loss_sum / static_cast<double>(batches), q});
    if (q > best_qwk) {
      best_qwk = q;
      best = snapshot(params);
      r.history.best_epoch = epoch;
      r.history.best_qwk = q;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      r.history.stop_reason = "patience";
      break;
    }
  }
  zero_grads(params);
  restore(params, best);
  return r;
}

// Fold index of every example: stratified by essay set, seeded, and dealt
// round-robin with one counter running across sets so folds stay balanced.
inline std::vector<std::size_t> assign_folds(const std::vector<AesExample>& xs, std::size_t folds, std::uint64_t seed) {
  if (folds == 0) throw ConfigError("folds must be at least 1");
  if (folds > 1 && folds > xs.size()) {
    throw ConfigError(std::to_string(folds) + " folds for " + std::to_string(xs.size()) + " essays");
  }
  std::map<int, std::vector<std::size_t>> by_set;
  for (std::size_t i = 0; i < xs.size(); ++i) by_set[xs[i].record.essay_set].push_back(i);
  std::vector<std::size_t> fold(xs.size(), 0);
  std::size_t counter = 0;
  for (auto& [set, members] : by_set) {
    Rng rng = Rng::derive(seed, 0xf01d, static_cast<std::uint64_t>(set));
    rng.shuffle(members);
    for (auto i : members) fold[i] = counter++ % folds;
  }
  return fold;
}

inline std::uint64_t run_seed(std::uint64_t seed, std::size_t s) {
  return s == 0 ? seed : Rng::derive(seed, 0x5eed, s).next();
}

struct AesRun {
  std::optional<int> essay_set;  // prompt-specific runs
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  TrainHistory history;
  QwkReport validation;
  ScorerModel model;
};

struct AesReport {
  ScorerConfig config;
  std::uint64_t seed = 0;
  std::map<std::optional<int>, std::vector<std::size_t>> folds;  // per group (nullopt = all sets)
  std::vector<AesRun> runs;
  std::map<int, double> per_set;  // averaged over runs
  double mean = 0.0;

  // Highest mean validation QWK per group; ties go to the earliest run.
  std::vector<const AesRun*> best_runs() const {
    std::map<std::optional<int>, const AesRun*> best;
    for (const auto& r : runs) {
      auto& b = best[r.essay_set];
      if (!b || r.validation.mean > b->validation.mean) b = &r;
    }
    std::vector<const AesRun*> out;
    for (const auto& [k, v] : best) out.push_back(v);
    return out;
  }
};

// k-fold cross-validation (stratified by set) times `seeds` seeds, or one
// such experiment per essay set in prompt-specific mode. Jobs are
// independent and fan out over `workers` threads; results do not depend on
// the worker count.
inline AesReport train_aes(const AesDataset& data, const ScorerConfig& cfg, std::uint64_t seed,
                           std::size_t workers = 1, const ScoreRangeTable& ranges = asap_score_ranges()) {
  cfg.validate();
  if (data.examples.empty()) throw ContractError("train_aes: empty dataset");
  AesReport rep;
  rep.config = cfg;
  rep.seed = seed;

  std::map<std::optional<int>, std::vector<AesExample>> groups;
  if (cfg.prompt_specific) {
    for (const auto& x : data.examples) groups[x.record.essay_set].push_back(x);
  } else {
    groups[std::nullopt] = data.examples;
  }

  struct Job {
    std::optional<int> group;
    std::size_t fold;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (const auto& [g, xs] : groups) {
    const auto folds = assign_folds(xs, cfg.folds, seed);
    rep.folds[g] = folds;
    for (std::size_t k = 0; k < cfg.folds; ++k) {
      for (std::size_t s = 0; s < cfg.seeds; ++s) jobs.push_back({g, k, s});
    }
  }

  rep.runs.resize(jobs.size());
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = w; j < jobs.size(); j += workers) {
          const auto& job = jobs[j];
          const auto& xs = groups.at(job.group);
          const auto& fold = rep.folds.at(job.group);
          std::vector<AesExample> train, val;
          for (std::size_t i = 0; i < xs.size(); ++i) {
            if (cfg.folds > 1 && fold[i] == job.fold) {
              val.push_back(xs[i]);
            } else {
              train.push_back(xs[i]);
            }
          }
          const std::uint64_t s = run_seed(seed, job.seed_index);
          const std::uint64_t model_seed = Rng::derive(s, 0xf0, job.fold).next();
          auto res = train_scorer(train, val, data.prompts, cfg, model_seed, ranges);
          AesRun& run = rep.runs[j];
          run.essay_set = job.group;
          run.fold = job.fold;
          run.seed = s;
          run.validation = evaluate_scorer(res.model, val.empty() ? train : val, 1, ranges);
          run.history = std::move(res.history);
          run.model = std::move(res.model);
          run.model.essay_set = job.group;
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& r : rep.runs) {
    for (const auto& [set, q] : r.validation.per_set) {
      acc[set].first += q;
      acc[set].second += 1;
    }
  }
  for (const auto& [set, sn] : acc) {
    rep.per_set[set] = sn.first / static_cast<double>(sn.second);
    rep.mean += rep.per_set[set];
  }
  if (!rep.per_set.empty()) rep.mean /= static_cast<double>(rep.per_set.size());
  return rep;
}

// Column layout of the context-ablation QWK table.
inline std::vector<std::string> qwk_table_columns() {
  std::vector<std::string> c;
  for (int s = 1; s <= 8; ++s) c.push_back("Essay Set " + std::to_string(s));
  c.push_back("Mean QWK");
  return c;
}

// One table row: sets 1..8 then the mean; absent sets are null.
inline nlohmann::ordered_json qwk_table_row(const std::string& label, const std::map<int, double>& per_set,
                                            double mean) {
  nlohmann::ordered_json row;
  row["label"] = label;
  nlohmann::ordered_json values = nlohmann::ordered_json::array();
  for (int s = 1; s <= 8; ++s) {
    const auto it = per_set.find(s);
    values.push_back(it == per_set.end() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(it->second));
  }
  values.push_back(mean);
  row["values"] = values;
  return row;
}

inline std::string qwk_table_tsv(const std::string& label, const std::map<int, double>& per_set, double mean) {
  std::string out = "model";
  for (const auto& c : qwk_table_columns()) out += "\t" + c;
  out += "\n" + label;
  char buf[32];
  for (int s = 1; s <= 8; ++s) {
    const auto it = per_set.find(s);
    if (it == per_set.end()) {
      out += "\t-";
    } else {
      std::snprintf(buf, sizeof buf, "\t%.4f", it->second);
      out += buf;
    }
  }
  std::snprintf(buf, sizeof buf, "\t%.4f\n", mean);
  return out + buf;
}

inline nlohmann::ordered_json to_json(const TrainHistory& h) {
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_qwk", e.validation_qwk}});
  }
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}, {"best_qwk", h.best_qwk}, {"stop_reason", h.stop_reason}};
}

inline nlohmann::ordered_json qwk_json(const std::map<int, double>& per_set) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [s, q] : per_set) j[std::to_string(s)] = q;
  return j;
}

// Run manifest without timings or output paths, so identical inputs give
// identical bytes.
inline nlohmann::ordered_json aes_manifest(const AesReport& rep, const std::vector<AesExample>& examples) {
  nlohmann::ordered_json j;
  j["config"] = to_json(rep.config);
  j["seed"] = rep.seed;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& [g, assign] : rep.folds) {
    nlohmann::ordered_json f;
    f["essay_set"] = g ? nlohmann::ordered_json(*g) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json ids = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < rep.config.folds; ++k) ids.push_back(nlohmann::ordered_json::array());
    std::size_t i = 0;
    for (const auto& x : examples) {
      if (g && x.record.essay_set != *g) continue;
      ids[assign[i++]].push_back(x.record.essay_id);
    }
    f["validation_essay_ids"] = ids;
    folds.push_back(f);
  }
  j["folds"] = folds;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : rep.runs) {
    nlohmann::ordered_json o;
    o["essay_set"] = r.essay_set ? nlohmann::ordered_json(*r.essay_set) : nlohmann::ordered_json(nullptr);
    o["fold"] = r.fold;
    o["seed"] = r.seed;
    o["history"] = to_json(r.history);
    o["validation_qwk"] = qwk_json(r.validation.per_set);
    o["validation_mean_qwk"] = r.validation.mean;
    runs.push_back(o);
  }
  j["runs"] = runs;
  j["qwk_table"] = {{"columns", qwk_table_columns()},
                    {"rows", nlohmann::ordered_json::array({qwk_table_row(to_string(rep.config.context), rep.per_set,
                                                                          rep.mean)})}};
  return j;
}

// ---------------------------------------------------------------------------
// Persistence

inline Checkpoint to_checkpoint(const ScorerModel& m, const RmspropState* rms = nullptr) {
  Checkpoint c;
  nlohmann::ordered_json meta;
  meta["model"] = "scorer";
  meta["config"] = to_json(m.config);
  meta["essay_set"] = m.essay_set ? nlohmann::ordered_json(*m.essay_set) : nlohmann::ordered_json(nullptr);
  meta["scaler"] = m.scaler.to_json();
  meta["feature_norm"] = {{"mean", m.feature_norm.mean}, {"stddev", m.feature_norm.stddev}};
  nlohmann::ordered_json prompts = nlohmann::ordered_json::object();
  for (const auto& [s, t] : m.prompts) prompts[std::to_string(s)] = t;
  meta["prompts"] = prompts;
  meta["vocab"] = m.vocab.surfaces();
  c.metadata = meta.dump();
  const ParamList params = m.params();
  for (const auto& p : params) c.put(p.name, p.tensor);
  if (rms) store_state(c, *rms, params);
  return c;
}

inline ScorerModel scorer_from_checkpoint(const Checkpoint& c) {
  try {
    const auto meta = nlohmann::json::parse(c.metadata);
    if (meta.at("model").get<std::string>() != "scorer") throw LoadError("checkpoint does not hold a scorer");
    auto m = ScorerModel::init(scorer_config_from_json(meta.at("config")),
                               Vocabulary::from_surfaces(meta.at("vocab").get<std::vector<std::string>>()), 0);
    if (!meta.at("essay_set").is_null()) m.essay_set = meta.at("essay_set").get<int>();
    m.scaler = PromptScaler::from_json(meta.at("scaler"));
    m.feature_norm.mean = meta.at("feature_norm").at("mean").get<std::vector<double>>();
    m.feature_norm.stddev = meta.at("feature_norm").at("stddev").get<std::vector<double>>();
    for (const auto& [k, v] : meta.at("prompts").items()) m.prompts[std::stoi(k)] = v.get<std::string>();
    ParamList params = m.params();
    for (auto& p : params) c.restore(p.name, p.tensor);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("scorer checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("scorer checkpoint config: ") + e.what());
  }
}

inline void save_scorer(const std::filesystem::path& path, const ScorerModel& m, const RmspropState* rms = nullptr) {
  save_checkpoint(path, to_checkpoint(m, rms));
}

inline ScorerModel load_scorer(const std::filesystem::path& path) { return scorer_from_checkpoint(load_checkpoint(path)); }

}  // namespace aeslab
