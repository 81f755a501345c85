#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "retrocap/embedding_store.hpp"

namespace retrocap {

// Deterministic bag-of-words text embedding: each word maps to a Gaussian
// vector seeded from its FNV-1a hash, the sum is normalized. Stands in for a
// real dual encoder in tests and demos. Common function words are skipped.
Vector hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed = 0);
EmbeddingMatrix hash_embed_all(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed = 0);

// 48 captions in eight themes of six, with objects repeated inside a theme.
const std::vector<std::string>& toy_captions();

}  // namespace retrocap
