#include "aeslab/segmenter.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "synthetic.hpp"

namespace aeslab {
namespace {

using testing::synthetic_document;
using testing::synthetic_texts;

std::vector<std::string> surfaces(const TokenSequence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(t.surface);
  return out;
}

SegmentCorpus synthetic_corpus(std::uint64_t seed, std::size_t sentences, std::size_t per_doc,
                               SpanKind kind = SpanKind::edu) {
  SegmentCorpus c;
  c.kind = kind;
  for (const auto& t : synthetic_texts(seed, sentences, per_doc))
    c.docs.push_back(synthetic_document(t, c.vocab, TokenizeMode::training, kind));
  return c;
}

SegmenterConfig tiny_config(std::size_t epochs) {
  SegmenterConfig c;
  c.encoder.embed_dim = 8;
  c.encoder.hidden = 6;
  c.epochs = epochs;
  c.batch_size = 4;
  return c;
}

// ---------------------------------------------------------------- sentences

TEST(Sentences, SplitOnTerminalPunctuationBeforeWhitespace) {
  Vocabulary v;
  const auto seq = tokenize("One two. Three? Four 3.5 five... Six!", v, TokenizeMode::training);
  const auto s = split_sentences(seq);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(surfaces(subsequence(seq, s[0])), (std::vector<std::string>{"one", "two", "."}));
  EXPECT_EQ(surfaces(subsequence(seq, s[1])), (std::vector<std::string>{"three", "?"}));
  EXPECT_EQ(surfaces(subsequence(seq, s[2])), (std::vector<std::string>{"four", "3.5", "five", ".", ".", "."}));
  EXPECT_EQ(surfaces(subsequence(seq, s[3])), (std::vector<std::string>{"six", "!"}));
  EXPECT_TRUE(split_sentences(TokenSequence{}).empty());
  EXPECT_EQ(split_sentences(tokenize("no end", v, TokenizeMode::training)).size(), 1u);
}

// ---------------------------------------------------------------- markers

TEST(MarkEdu, NoSpansIsIdentity) {
  Vocabulary v;
  const auto seq = tokenize("a b c", v, TokenizeMode::training);
  EXPECT_EQ(mark_edu_boundaries(seq, {}), seq);
}

TEST(MarkEdu, InsertionArithmetic) {
  Vocabulary v;
  const auto seq = tokenize("a b c d e f", v, TokenizeMode::training);
  using enum IoLabel;
  IOSequence labels = {I, I, O, I, I, I};
  const auto out = mark_edu_boundaries(seq, {{3, 6, SpanKind::edu}, {0, 3, SpanKind::edu}}, &labels);
  ASSERT_EQ(out.size(), 8u);
  EXPECT_TRUE(out[0].is_special);
  EXPECT_EQ(out[0].surface, "[EDU]");
  EXPECT_EQ(out[0].vocab_id, v.special(kEduToken));
  EXPECT_TRUE(out[4].is_special);
  EXPECT_EQ(labels, (IOSequence{O, I, I, O, O, I, I, I}));
  EXPECT_THROW(mark_edu_boundaries(seq, {{2, 9, SpanKind::edu}}), ContractError);
  EXPECT_THROW(mark_edu_boundaries(seq, {{0, 3, SpanKind::edu}, {2, 4, SpanKind::edu}}), ContractError);
}

TEST(MarkEdu, OffsetsOfOrdinaryTokensPreserved) {
  Rng rng(3);
  Vocabulary v;
  for (int trial = 0; trial < 100; ++trial) {
    const auto seq = tokenize(synthetic_texts(rng.next(), 2, 2)[0], v, TokenizeMode::training);
    std::vector<Span> spans;
    std::size_t t = 0;
    while (t < seq.size()) {
      const std::size_t len = 1 + rng.below(4);
      if (rng.below(2)) spans.push_back({t, std::min(seq.size(), t + len), SpanKind::edu});
      t += len;
    }
    const auto out = mark_edu_boundaries(seq, spans);
    EXPECT_EQ(out.size(), seq.size() + spans.size());
    std::vector<Token> kept;
    for (const auto& tok : out.tokens)
      if (!tok.is_special) kept.push_back(tok);
    EXPECT_EQ(kept, seq.tokens);
  }
}

// ---------------------------------------------------------------- metrics

TEST(SpanPrf, Examples) {
  const std::vector<Span> gold = {{0, 2, SpanKind::ac}, {3, 5, SpanKind::ac}};
  auto m = span_prf(gold, gold);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  m = span_prf({}, gold);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  m = span_prf({{0, 2, SpanKind::ac}, {2, 5, SpanKind::ac}}, gold);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  // kind is part of the match
  EXPECT_EQ(span_prf({{0, 2, SpanKind::edu}}, {{0, 2, SpanKind::ac}}).tp, 0u);
}

TEST(SpanPrf, SwapExchangesPrecisionAndRecall) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto random_spans = [&] {
      std::vector<Span> s;
      std::size_t t = 0;
      while (t < 20) {
        const std::size_t len = 1 + rng.below(3);
        if (rng.below(2)) s.push_back({t, t + len, SpanKind::edu});
        t += len + rng.below(2);
      }
      return s;
    };
    const auto a = random_spans(), b = random_spans();
    const auto ab = span_prf(a, b), ba = span_prf(b, a);
    EXPECT_DOUBLE_EQ(ab.precision, ba.recall);
    EXPECT_DOUBLE_EQ(ab.recall, ba.precision);
    EXPECT_DOUBLE_EQ(ab.f1, ba.f1);
    if (ab.precision + ab.recall > 0) {
      EXPECT_NEAR(ab.f1, 2 * ab.precision * ab.recall / (ab.precision + ab.recall), 1e-15);
    }
  }
}

// ---------------------------------------------------------------- training

TEST(TrainSegmenter, EmptyCorpusIsContractError) {
  EXPECT_THROW(train_segmenter(SegmentCorpus{}, SegmenterConfig{}, 1), ContractError);
}

TEST(TrainSegmenter, ZeroEpochsReturnsInitialWeights) {
  const auto corpus = synthetic_corpus(1, 6, 2);
  const auto r = train_segmenter(corpus, tiny_config(0), 9);
  EXPECT_TRUE(r.history.epochs.empty());
  const auto fresh = SegmenterModel::init(SpanKind::edu, tiny_config(0), corpus.vocab, 9);
  EXPECT_EQ(snapshot(r.model.params()), snapshot(fresh.params()));
}

TEST(TrainSegmenter, DeterministicPerSeed) {
  const auto corpus = synthetic_corpus(2, 12, 3);
  const auto a = train_segmenter(corpus, tiny_config(3), 17);
  const auto b = train_segmenter(corpus, tiny_config(3), 17);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(snapshot(a.model.params()), snapshot(b.model.params()));
  EXPECT_EQ(serialize(to_checkpoint(a.model)), serialize(to_checkpoint(b.model)));
  const auto c = train_segmenter(corpus, tiny_config(3), 18);
  EXPECT_NE(snapshot(a.model.params()), snapshot(c.model.params()));
}

TEST(TrainSegmenter, ValidationSplitIsTenPercent) {
  const auto corpus = synthetic_corpus(4, 40, 2);  // 20 documents
  const auto r = train_segmenter(corpus, tiny_config(1), 3);
  EXPECT_EQ(r.history.validation_docs.size(), 2u);
  EXPECT_EQ(r.history.train_docs.size(), 18u);
}

TEST(TrainSegmenter, SingleDocumentOverfits) {
  const auto corpus = synthetic_corpus(5, 5, 5);
  ASSERT_EQ(corpus.docs.size(), 1u);
  SegmenterConfig cfg;
  cfg.batch_size = 1;
  const auto r = train_segmenter(corpus, cfg, 7);
  ASSERT_EQ(r.history.epochs.size(), 50u);
  EXPECT_EQ(evaluate_segmenter(r.model, corpus.docs).f1, 1.0);
}

TEST(TrainSegmenter, EmaShadowAtFixedPointMatchesRawWeights) {
  const auto corpus = synthetic_corpus(6, 4, 2);
  const auto r = train_segmenter(corpus, tiny_config(0), 1);
  ParamList params = r.model.params();
  EmaState ema = EmaState::track(params, 0.9999);
  const auto before = evaluate_segmenter(r.model, corpus.docs);
  for (int k = 0; k < 10; ++k) ema_update(ema, params);
  copy_shadow_to(ema, params);
  const auto after = evaluate_segmenter(r.model, corpus.docs);
  EXPECT_EQ(before.tp, after.tp);
  EXPECT_EQ(before.fp, after.fp);
}

// ---------------------------------------------------------------- inference

TEST(Segment, EmptyTextAndValidOutput) {
  const auto corpus = synthetic_corpus(7, 6, 2);
  const auto r = train_segmenter(corpus, tiny_config(2), 2);
  EXPECT_TRUE(segment(r.model, "").empty());
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::string text = synthetic_texts(rng.next(), 3, 3)[0] + " unseen words here ! and more";
    const auto spans = segment(r.model, text);
    Vocabulary v;
    validate_spans(spans, tokenize(text, v, TokenizeMode::training).size());
    EXPECT_EQ(segment(r.model, text), spans);  // pure
  }
}

TEST(Segment, WorkerPoolMatchesSequential) {
  const auto corpus = synthetic_corpus(9, 6, 2);
  const auto r = train_segmenter(corpus, tiny_config(1), 4);
  const auto texts = synthetic_texts(10, 12, 2);
  const auto one = segment_all(r.model, texts, nullptr, 1);
  const auto four = segment_all(r.model, texts, nullptr, 4);
  EXPECT_EQ(one, four);
}

TEST(Segment, AcModelNeedsEduSource) {
  auto corpus = synthetic_corpus(11, 4, 2, SpanKind::ac);
  SegmenterConfig cfg = tiny_config(1);
  EXPECT_THROW(train_segmenter(corpus, cfg, 1), ContractError);  // predicted markers, no EDU model

  const auto edu = train_segmenter(synthetic_corpus(11, 4, 2), tiny_config(1), 1);
  const auto ac = train_segmenter(corpus, cfg, 1, &edu.model);
  EXPECT_THROW(segment(ac.model, "a b, c."), ContractError);
  EXPECT_NO_THROW(segment(ac.model, "a b, c.", &edu.model));

  cfg.decoration = EduDecoration::gold;
  for (auto& d : corpus.docs) d.spans.push_back({0, 2, SpanKind::edu});
  std::sort(corpus.docs[0].spans.begin(), corpus.docs[0].spans.end());
  EXPECT_NO_THROW(train_segmenter(corpus, cfg, 1));

  cfg.decoration = EduDecoration::none;
  const auto plain = train_segmenter(corpus, cfg, 1);
  EXPECT_NO_THROW(segment(plain.model, "a b, c."));
}

// ---------------------------------------------------------------- persistence

TEST(SegmenterCheckpoint, RoundTripPreservesPredictions) {
  const auto corpus = synthetic_corpus(12, 6, 2);
  const auto r = train_segmenter(corpus, tiny_config(2), 5);
  const auto path = std::filesystem::temp_directory_path() / "aeslab_seg_test.ckpt";
  save_segmenter(path, r.model, &r.adam, &r.ema);
  const auto m = load_segmenter(path);
  EXPECT_EQ(m.kind, SpanKind::edu);
  EXPECT_EQ(m.vocab.surfaces(), r.model.vocab.surfaces());
  EXPECT_EQ(snapshot(m.params()), snapshot(r.model.params()));
  EXPECT_EQ(m.config.encoder.hidden, 6u);
  const auto text = synthetic_texts(13, 3, 3)[0];
  EXPECT_EQ(segment(m, text), segment(r.model, text));

  std::string bytes = serialize(to_checkpoint(r.model));
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_segmenter(path), LoadError);
  Checkpoint other;
  other.metadata = "not json";
  EXPECT_THROW(segmenter_from_checkpoint(other), LoadError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace aeslab
