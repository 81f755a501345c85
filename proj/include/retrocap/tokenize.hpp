#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace retrocap {

// Lowercases ASCII letters, turns ASCII punctuation into whitespace and splits
// on whitespace. Bytes >= 0x80 pass through untouched, so UTF-8 words stay
// intact. No locale is consulted.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

}  // namespace retrocap
