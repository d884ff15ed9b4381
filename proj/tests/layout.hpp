#pragma once

// Helpers for comparing assembled inputs against the illustrated layouts.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aeslab/augment.hpp"
#include "samples.hpp"

namespace aeslab::testing {

// Tokenizes a layout string, turning the literal marker words into special
// tokens; everything else goes through the ordinary tokenizer.
inline TokenSequence tokenize_layout(std::string_view text, Vocabulary& vocab) {
  TokenSequence out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = std::string_view::npos;
    std::string_view marker;
    for (auto m : {kPromptToken, kEssayToken, kEduToken, kAcToken}) {
      const auto at = text.find(m, pos);
      if (at < next) {
        next = at;
        marker = m;
      }
    }
    const auto piece = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    for (auto& t : tokenize(piece, vocab, TokenizeMode::training).tokens) out.tokens.push_back(t);
    if (next == std::string_view::npos) break;
    out.tokens.push_back(make_special(vocab, marker));
    pos = next + marker.size();
  }
  return out;
}

inline std::vector<std::pair<std::string, bool>> shape_of(const TokenSequence& s) {
  std::vector<std::pair<std::string, bool>> out;
  for (const auto& t : s.tokens) out.emplace_back(t.surface, t.is_special);
  return out;
}

// Token spans of verbatim substrings of the sample essay. Throws if a unit
// is not found in order.
template <std::size_t N>
std::vector<Span> spans_of(const char* const (&units)[N], SpanKind kind) {
  const std::string essay = kSampleEssay;
  std::vector<CharSpan> cs;
  std::size_t from = 0;
  for (const char* u : units) {
    const auto at = essay.find(u, from);
    if (at == std::string::npos) throw ContractError(std::string("unit not in sample essay: ") + u);
    cs.push_back({at, at + std::string(u).size(), kind});  // ASCII text: bytes == scalars
    from = at + 1;
  }
  Vocabulary v;
  return parse_char_spans(essay, cs, v, TokenizeMode::training).spans;
}

}  // namespace aeslab::testing
