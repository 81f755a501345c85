#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retrocap {

enum class TaggerMode { lexicon, rule_based };

struct SuffixRule {
  std::string suffix;
  std::string replacement;
};

/// Decides which tokens are nouns and maps them to a lowercase singular lemma.
///
/// Lexicon mode accepts a token when it, its irregular singular, or the first
/// suffix-rule rewrite that lands in the lexicon is a listed lemma. Rule-based
/// mode needs no lexicon: it drops function words and verb/adverb shapes and
/// singularizes with the suffix rules.
class NounTagger {
 public:
  // Throws ConfigError on an empty lexicon.
  static NounTagger with_lexicon(std::set<std::string> lexicon);
  static NounTagger default_english();
  static NounTagger rule_based();
  // One lowercase lemma per line; blank lines and '#' comments are skipped.
  static NounTagger from_lexicon_file(const std::filesystem::path& path);
  static NounTagger from_lexicon_stream(std::istream& in);

  TaggerMode mode() const noexcept { return mode_; }
  const std::set<std::string>& lexicon() const noexcept { return lexicon_; }
  const std::vector<SuffixRule>& rules() const noexcept { return rules_; }

  std::optional<std::string> lemma(std::string_view token) const;

 private:
  NounTagger(TaggerMode mode, std::set<std::string> lexicon);

  TaggerMode mode_;
  std::set<std::string> lexicon_;
  std::vector<SuffixRule> rules_;
};

// Lemmas in order of first appearance, each at most once.
std::vector<std::string> extract_nouns(std::string_view caption, const NounTagger& tagger);

struct FrequencyEntry {
  std::string lemma;
  std::size_t frequency = 0;
};

/// Document frequencies over l captions. Entries are kept in order of first
/// occurrence (caption rank, then position within the caption).
struct FrequencyTable {
  std::vector<FrequencyEntry> entries;
  std::size_t l = 0;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
  // 0 when the lemma is absent.
  std::size_t frequency_of(std::string_view lemma) const;
  std::vector<std::size_t> frequencies() const;

  // Builds a table directly from (lemma, frequency) pairs listed in
  // first-occurrence order. Throws FilterError unless 1 <= f <= l and lemmas are unique.
  static FrequencyTable from_counts(std::vector<FrequencyEntry> entries, std::size_t l);
};

FrequencyTable count_frequencies(const std::vector<std::string>& captions, const NounTagger& tagger);

enum class ThresholdMode { heuristic, adaptive };
enum class FrequencyDistribution { normal, lognormal };

std::string to_string(ThresholdMode mode);
std::string to_string(FrequencyDistribution dist);
ThresholdMode parse_threshold_mode(const std::string& text);
FrequencyDistribution parse_distribution(const std::string& text);

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::heuristic;
  std::size_t tau = 5;
  FrequencyDistribution distribution = FrequencyDistribution::normal;
  int n_sigma = 1;

  void validate() const;
};

using EntityList = std::vector<std::string>;

// A frequency passes threshold t when f >= t; adaptive thresholds are real
// valued, so the comparison allows 1e-9 of rounding slack.
bool passes_threshold(std::size_t frequency, double threshold) noexcept;

// Lemmas with frequency >= tau, by descending frequency then first occurrence.
EntityList heuristic_filter(const FrequencyTable& table, std::size_t tau);

// normal:    mean + n_sigma * std            (population std)
// lognormal: exp(m + n_sigma * s), m/s = mean/std of ln f
// Throws FilterError on an empty table.
double adaptive_threshold(const FrequencyTable& table, FrequencyDistribution distribution, int n_sigma);
EntityList adaptive_filter(const FrequencyTable& table, FrequencyDistribution distribution, int n_sigma);

// Dispatches on spec.mode.
EntityList filter_entities(const FrequencyTable& table, const ThresholdSpec& spec);

// "There are e1, e2, ..., en in the image." or "There is nothing in the image."
std::string build_hard_prompt(const EntityList& entities);

struct EntityPrecision {
  double precision = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

// An entity counts as correct when any ground-truth caption contains it as a noun.
EntityPrecision entity_precision(const EntityList& predicted,
                                 const std::vector<std::string>& ground_truth_captions,
                                 const NounTagger& tagger);

// Shipped English noun lemmas backing NounTagger::default_english().
const std::vector<std::string_view>& default_noun_lexicon();

}  // namespace retrocap
