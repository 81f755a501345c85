#include "retrocap/entity_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <unordered_set>

#include "retrocap/errors.hpp"
#include "retrocap/tokenize.hpp"

namespace retrocap {

namespace {

const std::unordered_map<std::string_view, std::string_view>& irregular_plurals() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"men", "man"},         {"women", "woman"}, {"children", "child"}, {"people", "person"},
      {"mice", "mouse"},      {"feet", "foot"},   {"teeth", "tooth"},    {"geese", "goose"},
      {"oxen", "ox"},         {"knives", "knife"}, {"leaves", "leaf"},   {"wolves", "wolf"},
      {"shelves", "shelf"},   {"loaves", "loaf"}, {"halves", "half"},    {"calves", "calf"},
      {"wives", "wife"},      {"lives", "life"},  {"scarves", "scarf"},  {"sheep", "sheep"},
      {"fish", "fish"},       {"deer", "deer"},   {"series", "series"},  {"species", "species"},
      {"policemen", "policeman"}, {"firemen", "fireman"}, {"businessmen", "businessman"},
  };
  return table;
}

// Function words and common verbs/adjectives rejected by the rule-based tagger.
const std::unordered_set<std::string_view>& rule_stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "all",
      "both", "few", "many", "much", "more", "most", "other", "another", "such", "no", "not",
      "and", "or", "but", "nor", "so", "yet", "if", "then", "than", "as", "while", "because",
      "of", "in", "on", "at", "by", "for", "with", "from", "to", "into", "onto", "over", "under",
      "above", "below", "near", "next", "behind", "beside", "between", "through", "across", "along",
      "around", "up", "down", "out", "off", "about", "against", "inside", "outside", "top", "front",
      "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your",
      "his", "its", "our", "their", "who", "whom", "whose", "which", "what", "where", "when", "there",
      "here", "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do",
      "does", "did", "can", "could", "will", "would", "should", "may", "might", "must", "sits",
      "stands", "holds", "looks", "lays", "lies", "runs", "walks", "rides", "eats", "plays",
      "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "several",
      "very", "too", "also", "just", "only", "together", "other", "large", "small", "big", "little",
      "white", "black", "red", "blue", "green", "yellow", "brown", "orange", "pink", "purple", "gray",
      "grey", "old", "young", "new", "tall", "long", "short", "empty", "full", "open", "close",
      "different", "various", "nothing", "something", "image", "picture", "photo"};
  return words;
}

std::vector<SuffixRule> default_rules() { return {{"ies", "y"}, {"es", ""}, {"s", ""}}; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Rule-based singular form. "-es" only strips after sibilant stems (boxes,
// benches, glasses); otherwise the plain "-s" rule applies (horses -> horse).
std::string rule_singular(std::string_view token) {
  if (auto it = irregular_plurals().find(token); it != irregular_plurals().end()) {
    return std::string(it->second);
  }
  if (token.size() > 4 && ends_with(token, "ies")) {
    return std::string(token.substr(0, token.size() - 3)) + "y";
  }
  if (token.size() > 4 && ends_with(token, "es")) {
    const auto stem = token.substr(0, token.size() - 2);
    if (ends_with(stem, "ch") || ends_with(stem, "sh") || ends_with(stem, "x") || ends_with(stem, "z") ||
        ends_with(stem, "ss")) {
      return std::string(stem);
    }
  }
  if (token.size() > 3 && ends_with(token, "s") && !ends_with(token, "ss") && !ends_with(token, "us") &&
      !ends_with(token, "is")) {
    return std::string(token.substr(0, token.size() - 1));
  }
  return std::string(token);
}

}  // namespace

NounTagger::NounTagger(TaggerMode mode, std::set<std::string> lexicon)
    : mode_(mode), lexicon_(std::move(lexicon)), rules_(default_rules()) {}

NounTagger NounTagger::with_lexicon(std::set<std::string> lexicon) {
  if (lexicon.empty()) throw ConfigError("lexicon tagger needs a non-empty lexicon");
  return NounTagger(TaggerMode::lexicon, std::move(lexicon));
}

NounTagger NounTagger::default_english() {
  std::set<std::string> lexicon;
  for (auto w : default_noun_lexicon()) lexicon.emplace(w);
  return with_lexicon(std::move(lexicon));
}

NounTagger NounTagger::rule_based() { return NounTagger(TaggerMode::rule_based, {}); }

NounTagger NounTagger::from_lexicon_stream(std::istream& in) {
  std::set<std::string> lexicon;
  std::string line;
  while (std::getline(in, line)) {
    auto words = tokenize(line);
    if (words.empty() || line.find('#') == line.find_first_not_of(" \t")) continue;
    lexicon.insert(words.front());
  }
  return with_lexicon(std::move(lexicon));
}

NounTagger NounTagger::from_lexicon_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open lexicon " + path.string());
  return from_lexicon_stream(in);
}

std::optional<std::string> NounTagger::lemma(std::string_view token) const {
  if (token.empty()) return std::nullopt;
  if (mode_ == TaggerMode::lexicon) {
    const std::string word(token);
    if (lexicon_.count(word)) return word;
    if (auto it = irregular_plurals().find(token); it != irregular_plurals().end()) {
      std::string singular(it->second);
      if (lexicon_.count(singular)) return singular;
    }
    for (const auto& rule : rules_) {
      if (token.size() <= rule.suffix.size() || !ends_with(token, rule.suffix)) continue;
      std::string candidate(token.substr(0, token.size() - rule.suffix.size()));
      candidate += rule.replacement;
      if (lexicon_.count(candidate)) return candidate;
    }
    return std::nullopt;
  }
  if (token.size() < 3 || has_digit(token) || rule_stopwords().count(token)) return std::nullopt;
  if (ends_with(token, "ing") || ends_with(token, "ly") || ends_with(token, "ed")) return std::nullopt;
  std::string singular = rule_singular(token);
  if (rule_stopwords().count(singular)) return std::nullopt;
  return singular;
}

std::vector<std::string> extract_nouns(std::string_view caption, const NounTagger& tagger) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& token : tokenize(caption)) {
    auto lemma = tagger.lemma(token);
    if (lemma && seen.insert(*lemma).second) out.push_back(std::move(*lemma));
  }
  return out;
}

std::size_t FrequencyTable::frequency_of(std::string_view lemma) const {
  for (const auto& e : entries) {
    if (e.lemma == lemma) return e.frequency;
  }
  return 0;
}

std::vector<std::size_t> FrequencyTable::frequencies() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.frequency);
  return out;
}

FrequencyTable FrequencyTable::from_counts(std::vector<FrequencyEntry> entries, std::size_t l) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (e.frequency < 1 || e.frequency > l) {
      throw FilterError("frequency of '" + e.lemma + "' outside [1, l]");
    }
    if (!seen.insert(e.lemma).second) throw FilterError("duplicate lemma '" + e.lemma + "'");
  }
  return FrequencyTable{std::move(entries), l};
}

FrequencyTable count_frequencies(const std::vector<std::string>& captions, const NounTagger& tagger) {
  FrequencyTable table;
  table.l = captions.size();
  std::unordered_map<std::string, std::size_t> position;
  for (const auto& caption : captions) {
    for (auto& lemma : extract_nouns(caption, tagger)) {
      auto [it, inserted] = position.try_emplace(lemma, table.entries.size());
      if (inserted) {
        table.entries.push_back({std::move(lemma), 1});
      } else {
        ++table.entries[it->second].frequency;
      }
    }
  }
  return table;
}

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::heuristic ? "heuristic" : "adaptive";
}

std::string to_string(FrequencyDistribution dist) {
  return dist == FrequencyDistribution::normal ? "normal" : "lognormal";
}

ThresholdMode parse_threshold_mode(const std::string& text) {
  if (text == "heuristic") return ThresholdMode::heuristic;
  if (text == "adaptive") return ThresholdMode::adaptive;
  throw ConfigError("unknown threshold mode '" + text + "'");
}

FrequencyDistribution parse_distribution(const std::string& text) {
  if (text == "normal") return FrequencyDistribution::normal;
  if (text == "lognormal") return FrequencyDistribution::lognormal;
  throw ConfigError("unknown frequency distribution '" + text + "'");
}

void ThresholdSpec::validate() const {
  if (mode == ThresholdMode::heuristic && tau < 1) throw ConfigError("tau must be at least 1");
  if (mode == ThresholdMode::adaptive && (n_sigma < 0 || n_sigma > 2)) {
    throw ConfigError("n_sigma must be 0, 1 or 2");
  }
}

bool passes_threshold(std::size_t frequency, double threshold) noexcept {
  return static_cast<double>(frequency) + 1e-9 >= threshold;
}

namespace {

EntityList select(const FrequencyTable& table, double threshold) {
  std::vector<const FrequencyEntry*> kept;
  for (const auto& e : table.entries) {
    if (passes_threshold(e.frequency, threshold)) kept.push_back(&e);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const FrequencyEntry* a, const FrequencyEntry* b) { return a->frequency > b->frequency; });
  EntityList out;
  out.reserve(kept.size());
  for (const auto* e : kept) out.push_back(e->lemma);
  return out;
}

}  // namespace

EntityList heuristic_filter(const FrequencyTable& table, std::size_t tau) {
  if (tau < 1) throw ConfigError("tau must be at least 1");
  return select(table, static_cast<double>(tau));
}

double adaptive_threshold(const FrequencyTable& table, FrequencyDistribution distribution, int n_sigma) {
  if (table.empty()) throw FilterError("adaptive threshold on an empty frequency table");
  const double n = static_cast<double>(table.size());
  const auto value = [&](const FrequencyEntry& e) {
    const double f = static_cast<double>(e.frequency);
    return distribution == FrequencyDistribution::normal ? f : std::log(f);
  };
  double sum = 0.0;
  for (const auto& e : table.entries) sum += value(e);
  const double mean = sum / n;
  double sq = 0.0;
  for (const auto& e : table.entries) {
    const double dev = value(e) - mean;
    sq += dev * dev;
  }
  const double stddev = std::sqrt(sq / n);
  const double cut = mean + static_cast<double>(n_sigma) * stddev;
  return distribution == FrequencyDistribution::normal ? cut : std::exp(cut);
}

EntityList adaptive_filter(const FrequencyTable& table, FrequencyDistribution distribution, int n_sigma) {
  return select(table, adaptive_threshold(table, distribution, n_sigma));
}

EntityList filter_entities(const FrequencyTable& table, const ThresholdSpec& spec) {
  spec.validate();
  if (spec.mode == ThresholdMode::heuristic) return heuristic_filter(table, spec.tau);
  if (table.empty()) return {};
  return adaptive_filter(table, spec.distribution, spec.n_sigma);
}

std::string build_hard_prompt(const EntityList& entities) {
  if (entities.empty()) return "There is nothing in the image.";
  return "There are " + join(entities, ", ") + " in the image.";
}

EntityPrecision entity_precision(const EntityList& predicted,
                                 const std::vector<std::string>& ground_truth_captions,
                                 const NounTagger& tagger) {
  std::unordered_set<std::string> truth;
  for (const auto& caption : ground_truth_captions) {
    for (auto& lemma : extract_nouns(caption, tagger)) truth.insert(std::move(lemma));
  }
  EntityPrecision out;
  out.total = predicted.size();
  for (const auto& e : predicted) out.correct += truth.count(e);
  out.precision = out.total == 0 ? 0.0 : static_cast<double>(out.correct) / static_cast<double>(out.total);
  return out;
}

}  // namespace retrocap
