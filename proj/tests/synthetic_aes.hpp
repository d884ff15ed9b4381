#pragma once

// Scored essays whose gold score is a fixed function of the number of
// sentences, each sentence planted as one argument component.

#include <string>
#include <vector>

#include "aeslab/scorer.hpp"
#include "synthetic.hpp"

namespace aeslab::testing {

// Set 1 (2..12) scores 2k for k sentences, k in 1..6; set 2 (1..6) scores k.
inline AesDataset synthetic_aes(std::uint64_t seed, std::size_t essays = 32) {
  Rng rng(seed);
  AesDataset d;
  d.prompts = {{1, "Write about what happened at the market."}, {2, "Describe the plans of the city."}};
  for (std::size_t i = 0; i < essays; ++i) {
    const int set = i % 2 == 0 ? 1 : 2;
    const std::size_t k = 1 + (i / 2) % 6;
    std::string text;
    for (std::size_t s = 0; s < k; ++s) {
      if (!text.empty()) text += ' ';
      text += synthetic_sentence(rng);
    }
    AesExample ex;
    ex.record.essay_id = static_cast<long long>(i + 1);
    ex.record.essay_set = set;
    ex.record.text = text;
    ex.record.resolved_score = set == 1 ? static_cast<int>(2 * k) : static_cast<int>(k);
    Vocabulary v;
    const auto toks = tokenize(text, v, TokenizeMode::training);
    std::vector<Span> acs;
    for (const auto r : split_sentences(toks)) acs.push_back({r.begin, r.end, SpanKind::ac});
    ex.ac_spans = acs;
    d.examples.push_back(std::move(ex));
  }
  return d;
}

// Small widths and a fast optimiser for overfitting checks.
inline ScorerConfig overfit_scorer_config(Context ctx) {
  ScorerConfig c;
  c.embed_dim = 16;
  c.hidden = 16;
  c.head_hidden = 8;
  c.seq_hidden = 8;
  c.learning_rate = 1e-3;
  c.dropout = 0.0;
  c.batch_size = 4;
  c.epochs = 50;
  c.patience = 0;
  c.folds = 1;
  c.context = ctx;
  return c;
}

}  // namespace aeslab::testing
