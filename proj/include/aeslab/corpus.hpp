#pragma once

// Data model and readers for the three corpora: ASAP essay TSV, RST-style
// raw/segmented text pairs, and character-span annotations. Also hosts the
// word tokenizer and the span <-> Inside/Outside label conversions.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aeslab/errors.hpp"

namespace aeslab {

// ---------------------------------------------------------------------------
// UTF-8

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw FormatError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size()) throw FormatError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) throw FormatError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw FormatError("invalid UTF-8 scalar at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' || c == 0x85 ||
         c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

inline bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= U'!' && c <= U'/') || (c >= U':' && c <= U'@') || (c >= U'[' && c <= U'`') ||
           (c >= U'{' && c <= U'~');
  }
  switch (c) {
    case 0xA1: case 0xAB: case 0xBB: case 0xBF:
    case 0x2013: case 0x2014: case 0x2018: case 0x2019:
    case 0x201C: case 0x201D: case 0x2026:
      return true;
    default:
      return false;
  }
}

// Whitespace-delimited word count; the feature used for essay length.
inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char32_t c : decode_utf8(text)) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

// Number of unicode scalar values.
inline std::size_t char_length(std::string_view text) { return decode_utf8(text).size(); }

// ---------------------------------------------------------------------------
// ASAP essays

struct ScoreRange {
  int essay_set = 0;
  int min_score = 0;
  int max_score = 0;

  int categories() const { return max_score - min_score + 1; }
  bool contains(int s) const { return s >= min_score && s <= max_score; }
};

using ScoreRangeTable = std::map<int, ScoreRange>;

// Domain-1 score ranges of the eight ASAP prompts.
inline ScoreRangeTable asap_score_ranges() {
  return {{1, {1, 2, 12}}, {2, {2, 1, 6}}, {3, {3, 0, 3}}, {4, {4, 0, 3}},
          {5, {5, 0, 3}},  {6, {6, 0, 3}}, {7, {7, 0, 3}}, {8, {8, 0, 3}}};
}

struct EssayRecord {
  long long essay_id = 0;
  int essay_set = 0;
  std::string text;
  int resolved_score = 0;
  std::optional<std::vector<int>> rater_scores;
};

struct RowError {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct AsapParseResult {
  std::vector<EssayRecord> records;
  std::vector<RowError> errors;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      out.push_back(s[i]);
      if (s[i] == '"' && s[i + 1] == '"') ++i;
    }
    return out;
  }
  return s;
}

template <typename T>
std::optional<T> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return static_cast<T>(v);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

inline AsapParseResult parse_asap_tsv(std::istream& in, const ScoreRangeTable& ranges = asap_score_ranges()) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("asap: missing header row");
  detail::strip_cr(header);
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
  const auto names = detail::split_tabs(header);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < names.size(); ++i) col[names[i]] = i;
  for (const char* required : {"essay_id", "essay_set", "essay", "domain1_score"}) {
    if (!col.count(required)) throw FormatError(std::string("asap: header lacks column '") + required + "'");
  }
  std::vector<std::size_t> rater_cols;
  for (const char* r : {"rater1_domain1", "rater2_domain1", "rater3_domain1"}) {
    if (col.count(r)) rater_cols.push_back(col[r]);
  }

  AsapParseResult result;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    auto field = [&](const char* name) -> std::string {
      const auto i = col[name];
      return i < fields.size() ? fields[i] : std::string();
    };
    auto fail = [&](std::string msg) { result.errors.push_back({lineno, std::move(msg)}); };

    const auto id = detail::parse_int<long long>(field("essay_id"));
    const auto set = detail::parse_int<int>(field("essay_set"));
    const auto score = detail::parse_int<int>(field("domain1_score"));
    if (!id || *id <= 0) {
      fail("essay_id is not a positive integer");
      continue;
    }
    if (!set || *set < 1 || *set > 8) {
      fail("essay_set outside 1..8");
      continue;
    }
    if (!score) {
      fail("domain1_score is not an integer");
      continue;
    }
    const auto range = ranges.find(*set);
    if (range == ranges.end()) {
      fail("no score range registered for essay_set " + std::to_string(*set));
      continue;
    }
    if (!range->second.contains(*score)) {
      fail("domain1_score " + std::to_string(*score) + " outside range " + std::to_string(range->second.min_score) +
           ".." + std::to_string(range->second.max_score) + " of essay_set " + std::to_string(*set));
      continue;
    }
    EssayRecord rec;
    rec.essay_id = *id;
    rec.essay_set = *set;
    rec.resolved_score = *score;
    rec.text = detail::unquote(field("essay"));
    if (rec.text.find_first_not_of(" \t") == std::string::npos) {
      fail("essay text is empty");
      continue;
    }
    try {
      decode_utf8(rec.text);
    } catch (const FormatError& e) {
      fail(std::string("essay text: ") + e.what());
      continue;
    }
    if (!rater_cols.empty()) {
      std::vector<int> raters;
      for (auto c : rater_cols) {
        if (c < fields.size()) {
          if (auto r = detail::parse_int<int>(fields[c])) raters.push_back(*r);
        }
      }
      if (!raters.empty()) rec.rater_scores = std::move(raters);
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

inline AsapParseResult parse_asap_tsv(const std::string& content, const ScoreRangeTable& ranges = asap_score_ranges()) {
  std::istringstream in(content);
  return parse_asap_tsv(in, ranges);
}

// "essay_set<TAB>prompt text" per line.
inline std::map<int, std::string> parse_prompts(std::istream& in) {
  std::map<int, std::string> prompts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto set = detail::parse_int<int>(line.substr(0, tab));
    if (tab == std::string::npos || !set) {
      throw FormatError("prompts: line " + std::to_string(lineno) + " is not 'essay_set<TAB>text'");
    }
    prompts[*set] = line.substr(tab + 1);
  }
  return prompts;
}

// ---------------------------------------------------------------------------
// Vocabulary and tokens

inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kPromptToken = "[PROMPT]";
inline constexpr std::string_view kEssayToken = "[ESSAY]";
inline constexpr std::string_view kEduToken = "[EDU]";
inline constexpr std::string_view kAcToken = "[AC]";

enum class TokenizeMode { training, inference };

class Vocabulary {
 public:
  Vocabulary() {
    for (auto s : {kPad, kUnk, kPromptToken, kEssayToken, kEduToken, kAcToken}) {
      specials_.emplace(std::string(s), add_entry(std::string(s), true));
    }
  }

  // Inverse of surfaces(): the special tokens must lead in canonical order.
  static Vocabulary from_surfaces(const std::vector<std::string>& surfaces) {
    Vocabulary v;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i >= surfaces.size() || surfaces[i] != v.surfaces_[i]) {
        throw LoadError("vocabulary: special tokens missing or out of order");
      }
    }
    for (std::size_t i = v.size(); i < surfaces.size(); ++i) v.add_entry(surfaces[i], false);
    return v;
  }

  std::size_t size() const { return surfaces_.size(); }
  const std::string& surface(std::size_t id) const { return surfaces_.at(id); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  std::size_t special(std::string_view name) const {
    const auto it = specials_.find(std::string(name));
    if (it == specials_.end()) throw ContractError("vocabulary: '" + std::string(name) + "' is not a special token");
    return it->second;
  }
  std::size_t unk() const { return special(kUnk); }

  // Id of an ordinary (non-special) surface; grows only in training mode.
  std::size_t lookup(const std::string& s, TokenizeMode mode) {
    const auto it = words_.find(s);
    if (it != words_.end()) return it->second;
    if (mode == TokenizeMode::inference) return unk();
    return add_entry(s, false);
  }

  // Inference-mode lookup on a shared vocabulary.
  std::size_t find(const std::string& s) const {
    const auto it = words_.find(s);
    return it != words_.end() ? it->second : unk();
  }

 private:
  std::size_t add_entry(const std::string& s, bool special) {
    surfaces_.push_back(s);
    const std::size_t id = surfaces_.size() - 1;
    if (!special) words_.emplace(s, id);
    return id;
  }

  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, std::size_t> words_;
  std::unordered_map<std::string, std::size_t> specials_;
};

// Character offsets of special tokens: they do not come from the text.
inline constexpr std::size_t kNoOffset = static_cast<std::size_t>(-1);

struct Token {
  std::string surface;
  std::size_t vocab_id = 0;
  bool is_special = false;
  std::size_t char_begin = kNoOffset;
  std::size_t char_end = kNoOffset;

  bool operator==(const Token&) const = default;
};

struct TokenSequence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }

  std::vector<std::size_t> ids() const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.vocab_id);
    return out;
  }

  // Surfaces joined by single spaces.
  std::string joined() const {
    std::string out;
    for (const auto& t : tokens) {
      if (!out.empty()) out.push_back(' ');
      out += t.surface;
    }
    return out;
  }

  bool operator==(const TokenSequence&) const = default;
};

inline Token make_special(const Vocabulary& vocab, std::string_view name) {
  return Token{std::string(name), vocab.special(name), true, kNoOffset, kNoOffset};
}

namespace detail {

struct RawToken {
  std::string surface;
  std::size_t begin;
  std::size_t end;
};

inline char32_t ascii_lower(char32_t c) { return (c >= U'A' && c <= U'Z') ? c + (U'a' - U'A') : c; }

// Whitespace split with leading/trailing punctuation detached one character
// at a time; offsets index unicode scalars of the input.
inline std::vector<RawToken> split_words(std::u32string_view text) {
  std::vector<RawToken> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    std::u32string s(text.substr(b, e - b));
    for (auto& c : s) c = ascii_lower(c);
    out.push_back({encode_utf8(s), b, e});
  };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::size_t lo = i, hi = j;
    while (lo < hi && is_punct(text[lo])) ++lo;
    while (hi > lo && is_punct(text[hi - 1])) --hi;
    for (std::size_t k = i; k < lo; ++k) emit(k, k + 1);
    if (lo < hi) emit(lo, hi);
    for (std::size_t k = hi; k < j; ++k) emit(k, k + 1);
    i = j;
  }
  return out;
}

}  // namespace detail

// Literal "[PROMPT]" etc. in the text is split like any other word, so text
// can never produce a special token.
inline TokenSequence tokenize(std::string_view text, Vocabulary& vocab, TokenizeMode mode) {
  const auto u = decode_utf8(text);
  TokenSequence seq;
  for (auto& raw : detail::split_words(u)) {
    const auto id = vocab.lookup(raw.surface, mode);
    seq.tokens.push_back(Token{std::move(raw.surface), id, false, raw.begin, raw.end});
  }
  return seq;
}

// Inference-mode tokenize; never touches the vocabulary.
inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  const auto u = decode_utf8(text);
  TokenSequence seq;
  for (auto& raw : detail::split_words(u)) {
    const auto id = vocab.find(raw.surface);
    seq.tokens.push_back(Token{std::move(raw.surface), id, false, raw.begin, raw.end});
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Spans and IO labels

enum class SpanKind { edu, ac };

inline std::string to_string(SpanKind k) { return k == SpanKind::edu ? "EDU" : "AC"; }

inline std::optional<SpanKind> parse_span_kind(std::string_view s) {
  std::string up(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "EDU") return SpanKind::edu;
  if (up == "AC") return SpanKind::ac;
  return std::nullopt;
}

struct Span {
  std::size_t start = 0;  // first token
  std::size_t end = 0;    // one past last token
  SpanKind kind = SpanKind::edu;

  std::size_t length() const { return end - start; }
  auto operator<=>(const Span&) const = default;
};

// Sorted, pairwise disjoint, non-empty and within [0, length).
inline void validate_spans(const std::vector<Span>& spans, std::size_t length) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (!(s.start < s.end && s.end <= length)) {
      throw ContractError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                          ") invalid for sequence of length " + std::to_string(length));
    }
    if (i > 0 && spans[i - 1].kind == s.kind && spans[i - 1].end > s.start) {
      throw ContractError("spans must be sorted and disjoint");
    }
  }
}

enum class IoLabel : std::uint8_t { O = 0, I = 1 };
using IOSequence = std::vector<IoLabel>;

inline IOSequence spans_to_io(std::size_t length, const std::vector<Span>& spans) {
  IOSequence io(length, IoLabel::O);
  for (const auto& s : spans) {
    if (s.end > length || s.start > s.end) throw ContractError("spans_to_io: span out of range");
    std::fill(io.begin() + static_cast<std::ptrdiff_t>(s.start), io.begin() + static_cast<std::ptrdiff_t>(s.end),
              IoLabel::I);
  }
  return io;
}

inline IOSequence spans_to_io(const TokenSequence& seq, const std::vector<Span>& spans) {
  return spans_to_io(seq.size(), spans);
}

// Maximal runs of I. Touching spans cannot be told apart under IO and merge.
inline std::vector<Span> io_to_spans(const IOSequence& io, SpanKind kind) {
  std::vector<Span> spans;
  std::size_t t = 0;
  while (t < io.size()) {
    if (io[t] == IoLabel::I) {
      std::size_t e = t;
      while (e < io.size() && io[e] == IoLabel::I) ++e;
      spans.push_back({t, e, kind});
      t = e;
    } else {
      ++t;
    }
  }
  return spans;
}

// Inserts the special token `marker` before every span start. When `labels`
// is given it is re-aligned in place, inserted tokens labelled O.
inline TokenSequence insert_markers(const TokenSequence& seq, std::vector<Span> spans, std::string_view marker,
                                    IOSequence* labels = nullptr) {
  std::sort(spans.begin(), spans.end());
  validate_spans(spans, seq.size());
  if (labels && labels->size() != seq.size()) throw ContractError("insert_markers: label/token length mismatch");
  static const Vocabulary specials;
  const Token special = make_special(specials, marker);
  TokenSequence out;
  IOSequence relabelled;
  std::size_t next = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    while (next < spans.size() && spans[next].start == t) {
      out.tokens.push_back(special);
      relabelled.push_back(IoLabel::O);
      ++next;
    }
    out.tokens.push_back(seq[t]);
    if (labels) relabelled.push_back((*labels)[t]);
  }
  if (labels) *labels = std::move(relabelled);
  return out;
}

struct SpannedDocument {
  TokenSequence tokens;
  std::vector<Span> spans;
};

// One EDU per non-blank line of `segmented`; the lines' tokens must
// reproduce the tokenisation of `raw`.
inline SpannedDocument parse_segmented_document(std::string_view raw, std::string_view segmented, Vocabulary& vocab,
                                                TokenizeMode mode) {
  SpannedDocument doc;
  doc.tokens = tokenize(raw, vocab, mode);
  const auto& toks = doc.tokens.tokens;
  std::size_t pos = 0;
  std::size_t line_start = 0;
  while (line_start <= segmented.size()) {
    auto nl = segmented.find('\n', line_start);
    if (nl == std::string_view::npos) nl = segmented.size();
    const auto line = segmented.substr(line_start, nl - line_start);
    const auto words = detail::split_words(decode_utf8(line));
    if (!words.empty()) {
      const std::size_t begin = pos;
      for (const auto& w : words) {
        if (pos >= toks.size()) {
          throw AlignmentError("segmented text has extra token '" + w.surface + "' at index " + std::to_string(pos));
        }
        if (toks[pos].surface != w.surface) {
          throw AlignmentError("first divergent token at index " + std::to_string(pos) + ": raw '" +
                               toks[pos].surface + "' vs segmented '" + w.surface + "'");
        }
        ++pos;
      }
      doc.spans.push_back({begin, pos, SpanKind::edu});
    }
    line_start = nl + 1;
  }
  if (pos != toks.size()) {
    throw AlignmentError("first divergent token at index " + std::to_string(pos) + ": raw '" + toks[pos].surface +
                         "' missing from segmented text");
  }
  return doc;
}

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  SpanKind kind = SpanKind::ac;

  auto operator<=>(const CharSpan&) const = default;
};

// A token belongs to a span iff their character intervals overlap.
inline SpannedDocument parse_char_spans(std::string_view text, std::vector<CharSpan> char_spans, Vocabulary& vocab,
                                        TokenizeMode mode) {
  const std::size_t n = char_length(text);
  std::sort(char_spans.begin(), char_spans.end());
  for (std::size_t i = 0; i < char_spans.size(); ++i) {
    const auto& c = char_spans[i];
    if (!(c.start < c.end && c.end <= n)) {
      throw ContractError("char span [" + std::to_string(c.start) + ", " + std::to_string(c.end) +
                          ") invalid for text of length " + std::to_string(n));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (char_spans[j].kind == c.kind && char_spans[j].end > c.start) {
        throw ContractError("overlapping char spans of kind " + to_string(c.kind) + " at " + std::to_string(c.start));
      }
    }
  }
  SpannedDocument doc;
  doc.tokens = tokenize(text, vocab, mode);
  const auto& toks = doc.tokens.tokens;
  for (const auto& c : char_spans) {
    std::size_t first = toks.size(), last = 0;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (toks[t].char_begin < c.end && c.start < toks[t].char_end) {
        first = std::min(first, t);
        last = t + 1;
      }
    }
    if (first == toks.size()) continue;  // span covers only whitespace
    for (const auto& prev : doc.spans) {
      if (prev.kind == c.kind && prev.end > first) {
        throw ContractError("char spans at " + std::to_string(c.start) + " share a token with an earlier span");
      }
    }
    doc.spans.push_back({first, last, c.kind});
  }
  std::sort(doc.spans.begin(), doc.spans.end());
  return doc;
}

// Token spans back to character ranges of the source text.
inline std::vector<CharSpan> to_char_spans(const TokenSequence& seq, const std::vector<Span>& spans) {
  std::vector<CharSpan> out;
  for (const auto& s : spans) {
    std::size_t b = kNoOffset, e = 0;
    for (std::size_t t = s.start; t < s.end; ++t) {
      if (seq[t].is_special) continue;
      b = std::min(b, seq[t].char_begin);
      e = std::max(e, seq[t].char_end);
    }
    if (b != kNoOffset) out.push_back({b, e, s.kind});
  }
  return out;
}

// "start<TAB>end<TAB>kind" per line.
inline std::vector<CharSpan> parse_char_span_file(std::istream& in) {
  std::vector<CharSpan> spans;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    const auto bad = [&] { return FormatError("span file: line " + std::to_string(lineno) + " is not 'start<TAB>end<TAB>kind'"); };
    if (f.size() != 3) throw bad();
    const auto s = detail::parse_int<long long>(f[0]);
    const auto e = detail::parse_int<long long>(f[1]);
    const auto k = parse_span_kind(f[2]);
    if (!s || !e || !k || *s < 0 || *e < 0) throw bad();
    spans.push_back({static_cast<std::size_t>(*s), static_cast<std::size_t>(*e), *k});
  }
  return spans;
}

inline std::string format_char_span_file(const std::vector<CharSpan>& spans) {
  std::string out;
  for (const auto& s : spans) {
    out += std::to_string(s.start) + "\t" + std::to_string(s.end) + "\t" + to_string(s.kind) + "\n";
  }
  return out;
}

}  // namespace aeslab
