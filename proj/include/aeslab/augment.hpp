#pragma once

// Context assembly with special tokens, essay features, per-set score
// scaling and the Pearson feature analysis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aeslab/corpus.hpp"
#include "aeslab/errors.hpp"
#include "json.hpp"

namespace aeslab {

// ---------------------------------------------------------------------------
// Prompt-specific z-scores

struct SetStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;

  bool degenerate() const { return stddev == 0.0; }
  bool operator==(const SetStats&) const = default;
};

class PromptScaler {
 public:
  static PromptScaler fit(const std::vector<EssayRecord>& records) {
    std::map<int, std::vector<double>> by_set;
    for (const auto& r : records) by_set[r.essay_set].push_back(static_cast<double>(r.resolved_score));
    if (by_set.empty()) throw ContractError("fit_prompt_scaler: no records");
    PromptScaler s;
    for (const auto& [set, xs] : by_set) {
      double mu = 0;
      for (double x : xs) mu += x;
      mu /= static_cast<double>(xs.size());
      double var = 0;
      for (double x : xs) var += (x - mu) * (x - mu);
      var /= static_cast<double>(xs.size());
      s.stats_[set] = {mu, std::sqrt(var), xs.size()};
    }
    return s;
  }

  bool fitted() const { return !stats_.empty(); }
  bool knows(int set) const { return stats_.count(set) > 0; }
  const std::map<int, SetStats>& stats() const { return stats_; }

  const SetStats& at(int set) const {
    const auto it = stats_.find(set);
    if (it == stats_.end()) throw ContractError("scaler: essay set " + std::to_string(set) + " was not fitted");
    return it->second;
  }

  // Degenerate sets map to 0.
  double scale(int set, double score) const {
    const auto& s = at(set);
    return s.degenerate() ? 0.0 : (score - s.mean) / s.stddev;
  }

  double inverse(int set, double z) const {
    const auto& s = at(set);
    return s.degenerate() ? s.mean : z * s.stddev + s.mean;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [set, s] : stats_) j[std::to_string(set)] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
    return j;
  }

  static PromptScaler from_json(const nlohmann::json& j) {
    PromptScaler s;
    for (const auto& [key, v] : j.items()) {
      s.stats_[std::stoi(key)] = {v.at("mean").get<double>(), v.at("stddev").get<double>(), v.at("count").get<std::size_t>()};
    }
    return s;
  }

  bool operator==(const PromptScaler&) const = default;

 private:
  std::map<int, SetStats> stats_;
};

inline PromptScaler fit_prompt_scaler(const std::vector<EssayRecord>& records) { return PromptScaler::fit(records); }
inline double scale_score(const PromptScaler& s, int set, double score) { return s.scale(set, score); }
inline double inverse_scale(const PromptScaler& s, int set, double z) { return s.inverse(set, z); }

// ---------------------------------------------------------------------------
// Features

struct FeatureVector {
  std::size_t word_count = 0;
  std::size_t char_length = 0;
  std::size_t ac_count = 0;
  std::size_t edu_count = 0;

  static constexpr std::size_t size() { return 4; }

  std::vector<double> values() const {
    return {static_cast<double>(word_count), static_cast<double>(char_length), static_cast<double>(ac_count),
            static_cast<double>(edu_count)};
  }

  bool operator==(const FeatureVector&) const = default;
};

inline FeatureVector extract_features(std::string_view text, const std::vector<Span>& ac_spans,
                                      const std::vector<Span>& edu_spans) {
  return {word_count(text), char_length(text), ac_spans.size(), edu_spans.size()};
}

// ---------------------------------------------------------------------------
// Context assembly

struct AugmentedInput {
  TokenSequence tokens;
  FeatureVector features;
  int essay_set = 0;
  std::optional<double> scaled_score;
};

namespace detail {

template <class Tokenize>
AugmentedInput assemble_with(std::string_view essay, const std::optional<std::string>& prompt,
                             const std::optional<std::vector<Span>>& edu_spans,
                             const std::optional<std::vector<Span>>& ac_spans, const Vocabulary& specials,
                             Tokenize&& tok) {
  if (edu_spans && ac_spans) throw ContractError("assemble_context: supply EDU spans or AC spans, not both");
  AugmentedInput in;
  TokenSequence body = tok(essay);
  if (edu_spans) body = insert_markers(body, *edu_spans, kEduToken);
  if (ac_spans) body = insert_markers(body, *ac_spans, kAcToken);
  if (prompt) {
    in.tokens.tokens.push_back(make_special(specials, kPromptToken));
    for (auto& t : tok(*prompt).tokens) {
      t.char_begin = t.char_end = kNoOffset;  // offsets index the essay only
      in.tokens.tokens.push_back(std::move(t));
    }
    if (!edu_spans && !ac_spans) in.tokens.tokens.push_back(make_special(specials, kEssayToken));
  }
  in.tokens.tokens.insert(in.tokens.tokens.end(), body.tokens.begin(), body.tokens.end());
  in.features = extract_features(essay, ac_spans.value_or(std::vector<Span>{}), edu_spans.value_or(std::vector<Span>{}));
  return in;
}

}  // namespace detail

// Layout: optional "[PROMPT] prompt", then either "[ESSAY] essay" (prompt,
// no spans), the essay with [EDU]/[AC] before each span start, or the bare
// essay. Spans index the essay's own tokens.
inline AugmentedInput assemble_context(std::string_view essay, const std::optional<std::string>& prompt,
                                       const std::optional<std::vector<Span>>& edu_spans,
                                       const std::optional<std::vector<Span>>& ac_spans, Vocabulary& vocab,
                                       TokenizeMode mode) {
  return detail::assemble_with(essay, prompt, edu_spans, ac_spans, vocab,
                               [&](std::string_view t) { return tokenize(t, vocab, mode); });
}

// Inference-only: unseen words map to [UNK] and the vocabulary is untouched.
inline AugmentedInput assemble_context(std::string_view essay, const std::optional<std::string>& prompt,
                                       const std::optional<std::vector<Span>>& edu_spans,
                                       const std::optional<std::vector<Span>>& ac_spans, const Vocabulary& vocab) {
  return detail::assemble_with(essay, prompt, edu_spans, ac_spans, vocab,
                               [&](std::string_view t) { return tokenize(t, vocab); });
}

// ---------------------------------------------------------------------------
// Correlation analysis

// Sample Pearson correlation.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ContractError("pearson: length mismatch");
  if (xs.size() < 2) throw ContractError("pearson: need at least two observations");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ContractError("pearson: correlation undefined for a zero-variance variable");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct AnalysisRow {
  double ac_count = 0;
  double edu_count = 0;
  double essay_set = 0;
  double length = 0;
  double word_count = 0;
  double score = 0;
  double scaled_score = 0;
};

inline const std::vector<std::string>& analysis_variables() {
  static const std::vector<std::string> names = {"AC Count", "EDU Count", "Essay Set",   "Length of Essay",
                                                 "Word Count", "Score",   "Scaled Score"};
  return names;
}

// 7x7 correlation matrix as CSV; cells involving a zero-variance variable
// are written as "nan".
inline std::string correlation_csv(const std::vector<AnalysisRow>& rows) {
  std::vector<std::vector<double>> cols(7);
  for (const auto& r : rows) {
    const double v[7] = {r.ac_count, r.edu_count, r.essay_set, r.length, r.word_count, r.score, r.scaled_score};
    for (std::size_t k = 0; k < 7; ++k) cols[k].push_back(v[k]);
  }
  const auto& names = analysis_variables();
  std::string out = "variable";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < 7; ++i) {
    out += names[i];
    for (std::size_t j = 0; j < 7; ++j) {
      out += ",";
      try {
        char buf[32];
        // + 0.0 folds a negative zero so the cell never prints as "-0.000000"
        std::snprintf(buf, sizeof buf, "%.6f", pearson(cols[i], cols[j]) + 0.0);
        out += buf;
      } catch (const ContractError&) {
        out += "nan";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace aeslab
