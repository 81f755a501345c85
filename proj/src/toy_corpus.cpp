#include <random>
#include <unordered_set>

#include "retrocap/errors.hpp"
#include "retrocap/tokenize.hpp"
#include "retrocap/toy_corpus.hpp"

namespace retrocap {

namespace {

// Function words carry no content and would dominate a bag-of-words sum.
bool is_function_word(const std::string& w) {
  static const std::unordered_set<std::string> words = {
      "a", "an", "the", "on", "in", "of", "with", "by", "at", "and", "to", "for", "from", "into",
      "over", "down", "up", "out", "past", "along", "across", "near", "next", "two"};
  return words.contains(w);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Vector hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw DimensionError("embedding dimension must be positive");
  Vector sum(dim, 0.0);
  std::vector<std::string> words;
  for (auto& w : tokenize(text)) {
    if (!is_function_word(w)) words.push_back(std::move(w));
  }
  if (words.empty()) words.emplace_back();
  for (const auto& w : words) {
    std::mt19937_64 rng(fnv1a(w) ^ seed);
    std::normal_distribution<double> normal;
    for (double& x : sum) x += normal(rng);
  }
  return normalize(sum);
}

EmbeddingMatrix hash_embed_all(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed) {
  std::vector<Vector> rows;
  rows.reserve(texts.size());
  for (const auto& t : texts) rows.push_back(hash_embed(t, dim, seed));
  return EmbeddingMatrix::from_rows(dim, rows);
}

const std::vector<std::string>& toy_captions() {
  static const std::vector<std::string> captions = {
      "a dog runs on the beach",
      "a brown dog plays with a ball on the grass",
      "two dogs chase a ball in the park",
      "a dog catches a frisbee in the park",
      "a small dog sleeps on the grass",
      "a dog carries a stick along the beach",
      "a cat sleeps on the sofa",
      "a black cat sits by the window",
      "a cat lies on a bed next to a pillow",
      "a cat looks out of the window",
      "a white cat sleeps on a bed",
      "a cat curls up on the sofa",
      "a man rides a bicycle down the street",
      "a woman rides a bike past a car",
      "a bus drives along a busy street",
      "a red car parked on the street",
      "a car waits at the traffic light",
      "a bus stops on the street",
      "a plate of pizza on a wooden table",
      "a pizza with cheese and tomato on a plate",
      "a bowl of fruit on the kitchen table",
      "a slice of pizza on a table",
      "a sandwich on a plate next to a cup",
      "a table with a plate of food",
      "a train arrives at the station",
      "people wait for the train on the platform",
      "a red train crosses a bridge",
      "a train leaves the station",
      "passengers board a train at the platform",
      "a long train on the tracks",
      "a boat sails on the lake",
      "a man fishes from a boat on the river",
      "two boats float on the water",
      "a small boat near the shore of the lake",
      "a boat on the river at sunset",
      "people row a boat across the lake",
      "a horse stands in a field",
      "a girl rides a horse across the field",
      "two horses graze in the field",
      "a brown horse runs in the field",
      "a horse eats grass near a fence",
      "a man leads a horse past a fence",
      "a laptop and a cup on a desk",
      "a man types on a laptop at a desk",
      "a computer and a keyboard on the desk",
      "a woman uses a laptop in the office",
      "a desk with a laptop and a phone",
      "a cup of coffee next to a keyboard",
  };
  return captions;
}

}  // namespace retrocap
