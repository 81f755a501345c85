#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace retrocap {

struct EvalItem {
  std::string candidate;
  std::vector<std::string> references;
};

using EvalSet = std::vector<EvalItem>;

// Corpus BLEU@n: geometric mean of clipped n-gram precisions 1..n with uniform
// weights, times the brevity penalty against the closest reference length
// (shorter wins ties). Throws MetricError on an empty set, n outside 1..4, or
// an item without references.
double bleu(const EvalSet& set, int n);

struct CiderResult {
  double score = 0.0;             // mean of per_item
  std::vector<double> per_item;   // already scaled by 10
};

// CIDEr-D: TF-IDF n-gram vectors (n = 1..4, IDF over reference sets), clipped
// cosine against each reference, Gaussian length penalty with sigma = 6,
// averaged over n and references, times 10. Throws MetricError on fewer than
// two items.
CiderResult cider(const EvalSet& set);

// Candidates one per line; references line-aligned, tab-separated.
EvalSet read_eval_set(std::istream& candidates, std::istream& references);

// "bleu@4=<v> cider=<v>" followed by "item=<i> bleu@4=<v> cider=<v>" lines.
void write_eval_report(std::ostream& out, const EvalSet& set);

}  // namespace retrocap
