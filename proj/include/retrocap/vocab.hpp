#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retrocap {

using TokenId = std::size_t;

/// Word-level vocabulary. Id 0 is the end token, id 1 the unknown token; the
/// remaining words are sorted so construction is order-independent.
class Vocabulary {
 public:
  static constexpr TokenId kEnd = 0;
  static constexpr TokenId kUnknown = 1;
  static constexpr std::string_view kEndToken = "<eos>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();
  // Collects the tokens of every text (see tokenize()).
  static Vocabulary build(const std::vector<std::string>& texts);
  // Restores a vocabulary from its token list; throws FormatError unless the
  // two special tokens lead and entries are unique.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  TokenId id(std::string_view word) const;

  // Tokenizes and maps unknown words to kUnknown.
  std::vector<TokenId> encode(std::string_view text) const;
  // Joins tokens with spaces, stopping at the first end token.
  std::string decode(const std::vector<TokenId>& ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  struct Empty {};
  explicit Vocabulary(Empty) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace retrocap
