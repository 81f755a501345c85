#include "retrocap/vocab.hpp"

#include <set>

#include "retrocap/errors.hpp"
#include "retrocap/tokenize.hpp"

namespace retrocap {

Vocabulary::Vocabulary() : Vocabulary(from_tokens({std::string(kEndToken), std::string(kUnknownToken)})) {}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : tokenize(t)) words.insert(std::move(w));
  }
  words.erase(std::string(kEndToken));
  words.erase(std::string(kUnknownToken));
  std::vector<std::string> tokens = {std::string(kEndToken), std::string(kUnknownToken)};
  tokens.insert(tokens.end(), words.begin(), words.end());
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kEnd] != kEndToken || tokens[kUnknown] != kUnknownToken) {
    throw FormatError("vocabulary must start with <eos> and <unk>");
  }
  Vocabulary v{Empty{}};
  v.tokens_ = std::move(tokens);
  for (TokenId i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], i).second) throw FormatError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  return v;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& w : tokenize(text)) out.push_back(id(w));
  return out;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEnd) break;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace retrocap
