#pragma once

// EDU / AC span labellers: encoder + CRF over IO labels, trained per
// sentence, with optional [EDU] marker decoration for the AC model.

#include <algorithm>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aeslab/checkpoint.hpp"
#include "aeslab/corpus.hpp"
#include "aeslab/crf.hpp"
#include "aeslab/encoder.hpp"
#include "aeslab/optim.hpp"
#include "aeslab/rng.hpp"
#include "json.hpp"

namespace aeslab {

// Where the AC model's [EDU] markers come from.
enum class EduDecoration { none, predicted, gold };

inline std::string to_string(EduDecoration d) {
  switch (d) {
    case EduDecoration::none: return "none";
    case EduDecoration::predicted: return "predicted";
    case EduDecoration::gold: return "gold";
  }
  return "none";
}

inline std::optional<EduDecoration> parse_edu_decoration(std::string_view s) {
  if (s == "none") return EduDecoration::none;
  if (s == "predicted") return EduDecoration::predicted;
  if (s == "gold") return EduDecoration::gold;
  return std::nullopt;
}

struct SegmenterConfig {
  EncoderConfig encoder;  // window 5, keep 0.9
  double learning_rate = 0.001;
  double weight_decay = 1e-4;
  double ema_decay = 0.9999;
  double max_grad_norm = 5.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double validation_fraction = 0.1;
  EduDecoration decoration = EduDecoration::predicted;  // AC models only
};

inline nlohmann::ordered_json to_json(const SegmenterConfig& c) {
  return {{"embed_dim", c.encoder.embed_dim},
          {"hidden", c.encoder.hidden},
          {"window", c.encoder.window},
          {"keep_prob", c.encoder.keep_prob},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"ema_decay", c.ema_decay},
          {"max_grad_norm", c.max_grad_norm},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"validation_fraction", c.validation_fraction},
          {"decoration", to_string(c.decoration)}};
}

inline SegmenterConfig segmenter_config_from_json(const nlohmann::json& j) {
  SegmenterConfig c;
  c.encoder.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.encoder.hidden = j.at("hidden").get<std::size_t>();
  c.encoder.window = j.at("window").get<std::size_t>();
  c.encoder.keep_prob = j.at("keep_prob").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.ema_decay = j.at("ema_decay").get<double>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  const auto d = parse_edu_decoration(j.at("decoration").get<std::string>());
  if (!d) throw LoadError("segmenter: unknown decoration mode");
  c.decoration = *d;
  return c;
}

// ---------------------------------------------------------------------------
// Sentences and markers

struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Sentence ends after a ".", "!" or "?" token that is followed by whitespace
// or the end of the text.
inline std::vector<TokenRange> split_sentences(const TokenSequence& seq) {
  std::vector<TokenRange> out;
  std::size_t begin = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& s = seq[t].surface;
    if (s != "." && s != "!" && s != "?") continue;
    const bool last = t + 1 == seq.size();
    if (last || seq[t + 1].char_begin > seq[t].char_end) {
      out.push_back({begin, t + 1});
      begin = t + 1;
    }
  }
  if (begin < seq.size()) out.push_back({begin, seq.size()});
  return out;
}

inline TokenSequence subsequence(const TokenSequence& seq, TokenRange r) {
  TokenSequence out;
  out.tokens.assign(seq.tokens.begin() + static_cast<std::ptrdiff_t>(r.begin),
                    seq.tokens.begin() + static_cast<std::ptrdiff_t>(r.end));
  return out;
}

// Spans of `spans` clipped to r and re-based to r.begin.
inline std::vector<Span> spans_within(const std::vector<Span>& spans, TokenRange r, SpanKind kind) {
  std::vector<Span> out;
  for (const auto& s : spans) {
    if (s.kind != kind) continue;
    const auto b = std::max(s.start, r.begin), e = std::min(s.end, r.end);
    if (b < e) out.push_back({b - r.begin, e - r.begin, kind});
  }
  return out;
}

// [EDU] before every span start; see insert_markers.
inline TokenSequence mark_edu_boundaries(const TokenSequence& seq, const std::vector<Span>& edu_spans,
                                         IOSequence* labels = nullptr) {
  return insert_markers(seq, edu_spans, kEduToken, labels);
}

// ---------------------------------------------------------------------------
// Metrics

struct SpanMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static SpanMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    SpanMetrics m{0, 0, 0, tp, fp, fn};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
  }

  SpanMetrics& operator+=(const SpanMetrics& o) { return *this = from_counts(tp + o.tp, fp + o.fp, fn + o.fn); }
};

// Exact (start, end, kind) matching; 0/0 ratios are 0.
inline SpanMetrics span_prf(const std::vector<Span>& predicted, const std::vector<Span>& gold) {
  std::vector<Span> g = gold;
  std::sort(g.begin(), g.end());
  std::size_t tp = 0;
  for (const auto& p : predicted) {
    if (std::binary_search(g.begin(), g.end(), p)) ++tp;
  }
  return SpanMetrics::from_counts(tp, predicted.size() - tp, gold.size() - tp);
}

// ---------------------------------------------------------------------------
// Model

struct SegmenterModel {
  SpanKind kind = SpanKind::edu;
  SegmenterConfig config;
  Vocabulary vocab;
  EncoderParams encoder;
  CrfParams crf;

  static SegmenterModel init(SpanKind kind, const SegmenterConfig& cfg, Vocabulary vocab, std::uint64_t seed) {
    SegmenterModel m;
    m.kind = kind;
    m.config = cfg;
    m.vocab = std::move(vocab);
    Rng rng = Rng::derive(seed, 0x5e6);
    m.encoder = EncoderParams::init(rng, m.vocab.size(), cfg.encoder);
    m.crf = CrfParams::init(rng, m.encoder.output_dim());
    return m;
  }

  ParamList params() const {
    ParamList p;
    encoder.collect(p, "encoder");
    crf.collect(p, "crf");
    return p;
  }

  bool decorates() const { return kind == SpanKind::ac && config.decoration != EduDecoration::none; }
};

using ParamSnapshot = std::vector<std::vector<double>>;

inline ParamSnapshot snapshot(const ParamList& params) {
  ParamSnapshot s;
  for (const auto& p : params) s.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return s;
}

inline void restore(ParamList& params, const ParamSnapshot& s) {
  for (std::size_t k = 0; k < params.size(); ++k) std::copy(s[k].begin(), s[k].end(), params[k].tensor.data().begin());
}

// One sentence as the network sees it: vocab ids (after decoration), gold IO
// over those positions, and which positions are original tokens.
struct LabelUnit {
  std::size_t doc = 0;
  TokenRange range;
  std::vector<std::size_t> ids;
  IOSequence gold;
  std::vector<bool> original;
};

namespace detail {

inline std::size_t model_id(const SegmenterModel& m, const Token& t) {
  return t.is_special ? m.vocab.special(t.surface) : m.vocab.find(t.surface);
}

inline Tensor unary_for(const SegmenterModel& m, const std::vector<std::size_t>& ids, const Dropout& drop = {}) {
  return unary_scores(encode(ids, m.encoder, drop), m.crf);
}

}  // namespace detail

// Viterbi labels of one unit, projected back onto its original tokens.
inline IOSequence predict_unit(const SegmenterModel& m, const LabelUnit& u) {
  if (u.ids.empty()) return {};
  const auto io = viterbi_decode(detail::unary_for(m, u.ids), m.crf.transition).io();
  IOSequence out;
  for (std::size_t k = 0; k < io.size(); ++k)
    if (u.original[k]) out.push_back(io[k]);
  return out;
}

inline std::vector<Span> segment_tokens(const SegmenterModel& m, const TokenSequence& seq,
                                        const SegmenterModel* edu_model);

// Builds one unit per sentence of `seq`. AC models get [EDU] markers from
// `gold_edus` (gold decoration) or from `edu_model`.
inline std::vector<LabelUnit> make_units(const SegmenterModel& m, const TokenSequence& seq,
                                         const std::vector<Span>* gold, std::size_t doc,
                                         const SegmenterModel* edu_model, const std::vector<Span>* gold_edus) {
  std::vector<LabelUnit> units;
  for (const auto r : split_sentences(seq)) {
    LabelUnit u;
    u.doc = doc;
    u.range = r;
    TokenSequence sentence = subsequence(seq, r);
    IOSequence io = gold ? spans_to_io(sentence.size(), spans_within(*gold, r, m.kind))
                         : IOSequence(sentence.size(), IoLabel::O);
    if (m.decorates()) {
      std::vector<Span> edus;
      if (m.config.decoration == EduDecoration::gold && gold_edus) {
        edus = spans_within(*gold_edus, r, SpanKind::edu);
      } else if (edu_model) {
        edus = segment_tokens(*edu_model, sentence, nullptr);
      } else {
        throw ContractError("AC model uses [EDU] markers but no EDU model was provided");
      }
      sentence = mark_edu_boundaries(sentence, edus, &io);
    }
    for (const auto& t : sentence.tokens) {
      u.ids.push_back(detail::model_id(m, t));
      u.original.push_back(!t.is_special);
    }
    u.gold = std::move(io);
    units.push_back(std::move(u));
  }
  return units;
}

// Spans over the tokens of `seq`, predicted sentence by sentence.
inline std::vector<Span> segment_tokens(const SegmenterModel& m, const TokenSequence& seq,
                                        const SegmenterModel* edu_model) {
  std::vector<Span> out;
  for (const auto& u : make_units(m, seq, nullptr, 0, edu_model, nullptr)) {
    for (auto s : io_to_spans(predict_unit(m, u), m.kind)) {
      out.push_back({s.start + u.range.begin, s.end + u.range.begin, s.kind});
    }
  }
  return out;
}

inline std::vector<Span> segment(const SegmenterModel& m, std::string_view text,
                                 const SegmenterModel* edu_model = nullptr) {
  return segment_tokens(m, tokenize(text, m.vocab), edu_model);
}

// Documents fan out over `workers` threads; the model is only read.
inline std::vector<std::vector<Span>> segment_all(const SegmenterModel& m, const std::vector<std::string>& texts,
                                                  const SegmenterModel* edu_model = nullptr, std::size_t workers = 1) {
  std::vector<std::vector<Span>> out(texts.size());
  workers = std::max<std::size_t>(1, std::min(workers, texts.size()));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < texts.size(); i += workers) out[i] = segment(m, texts[i], edu_model);
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

// ---------------------------------------------------------------------------
// Training

struct SegmentCorpus {
  SpanKind kind = SpanKind::edu;
  Vocabulary vocab;  // built in training mode over the documents
  std::vector<SpannedDocument> docs;
};

struct SegmenterEpoch {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_f1 = 0.0;

  bool operator==(const SegmenterEpoch&) const = default;
};

struct SegmenterHistory {
  std::vector<SegmenterEpoch> epochs;
  std::size_t best_epoch = 0;  // 0 = initial weights
  double best_f1 = 0.0;
  std::vector<std::size_t> train_docs;
  std::vector<std::size_t> validation_docs;

  bool operator==(const SegmenterHistory&) const = default;
};

struct SegmenterTrainResult {
  SegmenterModel model;
  SegmenterHistory history;
  AdamState adam;
  EmaState ema;
};

// Micro-averaged span metrics of `m` over the given documents' units.
inline SpanMetrics evaluate_units(const SegmenterModel& m, const std::vector<LabelUnit>& units,
                                  const std::vector<SpannedDocument>& docs) {
  std::map<std::size_t, std::vector<Span>> predicted;
  for (const auto& u : units) {
    auto& p = predicted[u.doc];
    for (auto s : io_to_spans(predict_unit(m, u), m.kind)) p.push_back({s.start + u.range.begin, s.end + u.range.begin, s.kind});
  }
  SpanMetrics total;
  for (const auto& [doc, spans] : predicted) {
    std::vector<Span> gold;
    for (const auto& s : docs[doc].spans)
      if (s.kind == m.kind) gold.push_back(s);
    total += span_prf(spans, gold);
  }
  return total;
}

inline SpanMetrics evaluate_segmenter(const SegmenterModel& m, const std::vector<SpannedDocument>& docs,
                                      const SegmenterModel* edu_model = nullptr) {
  std::vector<LabelUnit> units;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto u = make_units(m, docs[d].tokens, &docs[d].spans, d, edu_model, &docs[d].spans);
    units.insert(units.end(), std::make_move_iterator(u.begin()), std::make_move_iterator(u.end()));
  }
  return evaluate_units(m, units, docs);
}

// Adam on mean sentence NLL + L2, global-norm clipping, EMA shadow weights
// for evaluation; returns the EMA weights of the best validation epoch.
inline SegmenterTrainResult train_segmenter(const SegmentCorpus& corpus, const SegmenterConfig& cfg,
                                            std::uint64_t seed, const SegmenterModel* edu_model = nullptr) {
  if (corpus.docs.empty()) throw ContractError("train_segmenter: empty corpus");
  if (cfg.batch_size == 0) throw ContractError("train_segmenter: batch size must be positive");
  if (cfg.validation_fraction < 0.0 || cfg.validation_fraction >= 1.0) {
    throw ContractError("train_segmenter: validation fraction must lie in [0, 1)");
  }
  SegmenterTrainResult r;
  r.model = SegmenterModel::init(corpus.kind, cfg, corpus.vocab, seed);
  SegmenterModel& m = r.model;
  ParamList params = m.params();

  std::vector<std::size_t> order(corpus.docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = Rng::derive(seed, 0x5b1);
  split_rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(order.size()));
  r.history.validation_docs.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  r.history.train_docs.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(r.history.validation_docs.begin(), r.history.validation_docs.end());
  std::sort(r.history.train_docs.begin(), r.history.train_docs.end());
  // With too few documents to hold any out, selection falls back to the training documents.
  const auto& select_docs = n_val > 0 ? r.history.validation_docs : r.history.train_docs;

  auto units_of = [&](const std::vector<std::size_t>& ids) {
    std::vector<LabelUnit> out;
    for (auto d : ids) {
      auto u = make_units(m, corpus.docs[d].tokens, &corpus.docs[d].spans, d, edu_model, &corpus.docs[d].spans);
      for (auto& x : u)
        if (!x.ids.empty()) out.push_back(std::move(x));
    }
    return out;
  };
  const auto train_units = units_of(r.history.train_docs);
  const auto select_units = units_of(select_docs);

  r.adam.lr = cfg.learning_rate;
  r.ema = EmaState::track(params, cfg.ema_decay);
  if (cfg.epochs == 0) return r;

  ParamSnapshot best = snapshot(params);
  double best_f1 = -1.0;
  std::vector<std::size_t> idx(train_units.size());
  long long step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng shuffle_rng = Rng::derive(seed, 0x5f1, epoch);
    shuffle_rng.shuffle(idx);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < idx.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(idx.size(), b + cfg.batch_size);
      Rng drop_rng = Rng::derive(seed, 0xd0, static_cast<std::uint64_t>(step));
      const Dropout drop{true, cfg.encoder.keep_prob, &drop_rng};
      Graph graph;
      Tensor loss;
      {
        GraphScope scope(graph);
        std::vector<Tensor> nll;
        for (std::size_t k = b; k < e; ++k) {
          const auto& u = train_units[idx[k]];
          nll.push_back(crf_nll(detail::unary_for(m, u.ids, drop), m.crf.transition, u.gold));
        }
        loss = add(mean(concat(nll, 0)), l2_penalty(params, cfg.weight_decay));
      }
      zero_grads(params);
      backward(graph, loss);
      GradList grads = collect_grads(params);
      clip_gradients(grads, cfg.max_grad_norm);
      adam_step(r.adam, params, grads);
      ema_update(r.ema, params, ema_warmup_decay(cfg.ema_decay, step));
      ++step;
      loss_sum += loss.item();
      ++batches;
    }
    // evaluate with the shadow weights
    const ParamSnapshot raw = snapshot(params);
    copy_shadow_to(r.ema, params);
    const double f1 = evaluate_units(m, select_units, corpus.docs).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best = snapshot(params);
      r.history.best_epoch = epoch;
      r.history.best_f1 = f1;
    }
    restore(params, raw);
    r.history.epochs.push_back({epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, f1});
  }
  zero_grads(params);
  restore(params, best);
  return r;
}

// ---------------------------------------------------------------------------
// Persistence

inline Checkpoint to_checkpoint(const SegmenterModel& m, const AdamState* adam = nullptr, const EmaState* ema = nullptr) {
  Checkpoint c;
  nlohmann::ordered_json meta;
  meta["model"] = "segmenter";
  meta["kind"] = to_string(m.kind);
  meta["config"] = to_json(m.config);
  meta["vocab"] = m.vocab.surfaces();
  c.metadata = meta.dump();
  const ParamList params = m.params();
  for (const auto& p : params) c.put(p.name, p.tensor);
  if (adam) store_state(c, *adam, params);
  if (ema) store_state(c, *ema, params);
  return c;
}

inline SegmenterModel segmenter_from_checkpoint(const Checkpoint& c) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(c.metadata);
    if (meta.at("model").get<std::string>() != "segmenter") throw LoadError("checkpoint does not hold a segmenter");
    const auto kind = parse_span_kind(meta.at("kind").get<std::string>());
    if (!kind) throw LoadError("segmenter checkpoint: unknown kind");
    auto vocab = Vocabulary::from_surfaces(meta.at("vocab").get<std::vector<std::string>>());
    auto m = SegmenterModel::init(*kind, segmenter_config_from_json(meta.at("config")), std::move(vocab), 0);
    ParamList params = m.params();
    for (auto& p : params) c.restore(p.name, p.tensor);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("segmenter checkpoint metadata: ") + e.what());
  }
}

inline void save_segmenter(const std::filesystem::path& path, const SegmenterModel& m, const AdamState* adam = nullptr,
                           const EmaState* ema = nullptr) {
  save_checkpoint(path, to_checkpoint(m, adam, ema));
}

inline SegmenterModel load_segmenter(const std::filesystem::path& path) {
  return segmenter_from_checkpoint(load_checkpoint(path));
}

}  // namespace aeslab
