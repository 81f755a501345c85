#include "retrocap/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "retrocap/errors.hpp"
#include "retrocap/text_format.hpp"
#include "retrocap/tokenize.hpp"

namespace retrocap {

namespace {

constexpr int kMaxOrder = 4;
constexpr double kCiderSigma = 6.0;

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, double>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)] += 1.0;
  }
  return counts;
}

void check_items(const EvalSet& set) {
  for (const auto& item : set) {
    if (item.references.empty()) throw MetricError("every item needs at least one reference");
  }
}

}  // namespace

double bleu(const EvalSet& set, int n) {
  if (set.empty()) throw MetricError("BLEU on an empty evaluation set");
  if (n < 1 || n > kMaxOrder) throw MetricError("BLEU order must be in 1..4");
  check_items(set);

  std::vector<double> matched(n, 0.0), total(n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (const auto& item : set) {
    const auto cand = tokenize(item.candidate);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : item.references) refs.push_back(tokenize(r));

    cand_len += static_cast<double>(cand.size());
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);

    for (int order = 1; order <= n; ++order) {
      const auto cand_counts = count_ngrams(cand, order);
      NgramCounts max_ref;
      for (const auto& r : refs) {
        for (const auto& [gram, c] : count_ngrams(r, order)) max_ref[gram] = std::max(max_ref[gram], c);
      }
      for (const auto& [gram, c] : cand_counts) {
        auto it = max_ref.find(gram);
        matched[order - 1] += it == max_ref.end() ? 0.0 : std::min(c, it->second);
        total[order - 1] += c;
      }
    }
  }

  double log_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (matched[i] == 0.0 || total[i] == 0.0) return 0.0;
    log_sum += std::log(matched[i] / total[i]);
  }
  const double brevity = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return brevity * std::exp(log_sum / n);
}

namespace {

struct TfIdf {
  std::vector<std::map<Ngram, double>> vec;  // per order
  std::vector<double> norm;
  double length = 0.0;
};

TfIdf tfidf(const std::vector<std::string>& tokens, const std::map<Ngram, double>& doc_freq,
            double log_docs) {
  TfIdf out;
  out.vec.resize(kMaxOrder);
  out.norm.assign(kMaxOrder, 0.0);
  out.length = static_cast<double>(tokens.size());
  for (int order = 1; order <= kMaxOrder; ++order) {
    for (const auto& [gram, tf] : count_ngrams(tokens, order)) {
      auto it = doc_freq.find(gram);
      const double df = it == doc_freq.end() ? 0.0 : it->second;
      const double weight = tf * (log_docs - std::log(std::max(1.0, df)));
      out.vec[order - 1][gram] = weight;
      out.norm[order - 1] += weight * weight;
    }
  }
  for (double& x : out.norm) x = std::sqrt(x);
  return out;
}

double cider_similarity(const TfIdf& cand, const TfIdf& ref) {
  const double delta = cand.length - ref.length;
  const double penalty = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
  double sum = 0.0;
  for (int i = 0; i < kMaxOrder; ++i) {
    double dot = 0.0;
    for (const auto& [gram, w] : cand.vec[i]) {
      auto it = ref.vec[i].find(gram);
      if (it != ref.vec[i].end()) dot += std::min(w, it->second) * it->second;
    }
    const double denom = cand.norm[i] * ref.norm[i];
    sum += (denom == 0.0 ? 0.0 : dot / denom) * penalty;
  }
  return sum / kMaxOrder;
}

}  // namespace

CiderResult cider(const EvalSet& set) {
  if (set.size() < 2) throw MetricError("CIDEr needs at least two items (IDF is degenerate otherwise)");
  check_items(set);

  std::vector<std::vector<std::vector<std::string>>> refs(set.size());
  std::map<Ngram, double> doc_freq;
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::set<Ngram> present;
    for (const auto& r : set[i].references) {
      refs[i].push_back(tokenize(r));
      for (int order = 1; order <= kMaxOrder; ++order) {
        for (const auto& entry : count_ngrams(refs[i].back(), order)) present.insert(entry.first);
      }
    }
    for (const auto& gram : present) doc_freq[gram] += 1.0;
  }
  const double log_docs = std::log(static_cast<double>(set.size()));

  CiderResult out;
  out.per_item.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto cand = tfidf(tokenize(set[i].candidate), doc_freq, log_docs);
    double sum = 0.0;
    for (const auto& r : refs[i]) sum += cider_similarity(cand, tfidf(r, doc_freq, log_docs));
    out.per_item.push_back(10.0 * sum / static_cast<double>(refs[i].size()));
  }
  double total = 0.0;
  for (double s : out.per_item) total += s;
  out.score = total / static_cast<double>(out.per_item.size());
  return out;
}

EvalSet read_eval_set(std::istream& candidates, std::istream& references) {
  EvalSet set;
  std::string cand, refs;
  std::size_t line = 0;
  while (std::getline(candidates, cand)) {
    ++line;
    if (!std::getline(references, refs)) {
      throw FormatError("references file has fewer lines than candidates (line " + std::to_string(line) + ")");
    }
    if (!cand.empty() && cand.back() == '\r') cand.pop_back();
    if (!refs.empty() && refs.back() == '\r') refs.pop_back();
    EvalItem item{cand, {}};
    std::size_t start = 0;
    while (start <= refs.size()) {
      const auto tab = refs.find('\t', start);
      const auto piece = refs.substr(start, tab == std::string::npos ? std::string::npos : tab - start);
      if (!piece.empty()) item.references.push_back(piece);
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (item.references.empty()) throw FormatError("line " + std::to_string(line) + " has no references");
    set.push_back(std::move(item));
  }
  if (std::getline(references, refs)) throw FormatError("references file has more lines than candidates");
  return set;
}

void write_eval_report(std::ostream& out, const EvalSet& set) {
  const double b4 = bleu(set, 4);
  const auto c = cider(set);
  out << "bleu@4=" << format_fixed(b4) << " cider=" << format_fixed(c.score) << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << "item=" << i << " bleu@4=" << format_fixed(bleu(EvalSet{set[i]}, 4))
        << " cider=" << format_fixed(c.per_item[i]) << '\n';
  }
}

}  // namespace retrocap
