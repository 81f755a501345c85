// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "retrocap/eval_metrics.hpp"
#include "retrocap/pipeline.hpp"
#include "retrocap/tokenize.hpp"
#include "retrocap/toy_corpus.hpp"

using namespace retrocap;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

Vector random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> normal;
  Vector v(d);
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  for (double& x : v) x /= std::sqrt(norm);
  return v;
}

// ---------------------------------------------------------------- retrieval

std::vector<Hit> brute_force(const EmbeddingMatrix& m, const Vector& q, std::size_t k) {
  std::vector<Hit> all;
  for (std::size_t i = 0; i < m.count(); ++i) {
    const auto row = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += static_cast<double>(row[j]) * q[j];
    all.push_back({i, s});
  }
  std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

void retrieval_oracle() {
  std::mt19937_64 rng(11);
  std::vector<Vector> rows;
  for (int i = 0; i < 1000; ++i) rows.push_back(random_unit(rng, 64));
  std::vector<std::string> captions(1000, "x");
  const Index index(EmbeddingMatrix::from_rows(64, rows), captions);
  std::vector<Vector> queries;
  for (int i = 0; i < 100; ++i) queries.push_back(random_unit(rng, 64));

  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (std::size_t k : {1u, 5u, 10u}) {
    for (const auto& q : queries) {
      const auto got = index.top_k(q, k).hits;
      const auto want = brute_force(index.embeddings(), q, k);
      if (got.size() != want.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t r = 0; r < got.size(); ++r) {
        if (got[r].index != want[r].index) ++mismatches;
        worst = std::max(worst, std::abs(got[r].score - want[r].score));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "index mismatches=" << mismatches << " max score diff=" << worst << " time=" << elapsed << "s";
  report("retrieval-oracle", mismatches == 0 && worst <= 1e-9 && elapsed < 5.0, d.str());
}

// ---------------------------------------------------------------- ILR

void ilr_zero_noise() {
  std::mt19937_64 rng(12);
  std::vector<Vector> rows;
  for (int i = 0; i < 500; ++i) rows.push_back(random_unit(rng, 32));
  const Index index(EmbeddingMatrix::from_rows(32, rows), std::vector<std::string>(500, "x"));
  std::size_t bad = 0;
  for (std::uint64_t q = 0; q < 100; ++q) {
    const Vector query = random_unit(rng, 32);
    IlrConfig cfg{0.0, 5, q, InjectionMode::pre_retrieval};
    Rng noise(q);
    const auto ilr = image_like_retrieve(index, query, cfg, noise).hits;
    const auto t2t = index.top_k(query, 5);
    if (ilr.indices() != t2t.indices()) ++bad;
  }
  report("ilr-zero-noise-identity", bad == 0, std::to_string(bad) + "/100 queries differ");
}

void modality_gap() {
  const auto t0 = Clock::now();
  const auto corpus = synth_paired_corpus(1000, 64, 0.5, 0.04, 0);
  const auto report_ = overlap_sweep(corpus, sweep_grid(0.0, 0.1, 0.01), 5, 200, 0);
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "best sigma_r=" << report_.best_sigma() << " overlap_ilr=" << report_.points[report_.best].overlap_ilr
    << " overlap_t2t=" << report_.points[report_.best].overlap_t2t << " gain=" << report_.gain()
    << " (need >= 0.05) time=" << elapsed << "s";
  report("modality-gap", report_.gain() >= 0.05 && elapsed < 30.0, d.str());
}

// ---------------------------------------------------------------- entity filter

FrequencyTable random_table(std::mt19937_64& rng) {
  const std::size_t l = std::uniform_int_distribution<std::size_t>(1, 9)(rng);
  const std::size_t nouns = std::uniform_int_distribution<std::size_t>(0, 50)(rng);
  std::vector<FrequencyEntry> entries;
  for (std::size_t i = 0; i < nouns; ++i) {
    entries.push_back({"n" + std::to_string(i), std::uniform_int_distribution<std::size_t>(1, l)(rng)});
  }
  return FrequencyTable::from_counts(std::move(entries), l);
}

EntityList oracle_select(const FrequencyTable& t, const std::function<bool(double)>& keep) {
  std::vector<std::pair<std::size_t, std::size_t>> kept;  // (position, frequency)
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    if (keep(static_cast<double>(t.entries[i].frequency))) kept.push_back({i, t.entries[i].frequency});
  }
  std::sort(kept.begin(), kept.end(), [](auto a, auto b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  EntityList out;
  for (auto [i, f] : kept) out.push_back(t.entries[i].lemma);
  return out;
}

double oracle_adaptive(const FrequencyTable& t, bool lognormal, int n_sigma) {
  std::vector<double> x;
  for (const auto& e : t.entries) x.push_back(lognormal ? std::log(double(e.frequency)) : double(e.frequency));
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / x.size());
  const double th = mean + n_sigma * sd;
  return lognormal ? std::exp(th) : th;
}

void entity_filter_oracle() {
  std::mt19937_64 rng(13);
  std::size_t bad = 0, checks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto table = random_table(rng);
    for (std::size_t tau = 1; tau <= 9; ++tau) {
      ++checks;
      if (heuristic_filter(table, tau) != oracle_select(table, [&](double f) { return f >= double(tau); })) ++bad;
    }
    for (bool lognormal : {false, true}) {
      for (int n_sigma : {0, 1, 2}) {
        ++checks;
        const auto dist = lognormal ? FrequencyDistribution::lognormal : FrequencyDistribution::normal;
        EntityList want;
        if (!table.empty()) {
          const double th = oracle_adaptive(table, lognormal, n_sigma);
          want = oracle_select(table, [&](double f) { return f >= th - 1e-9; });
        }
        const EntityList got = table.empty() ? EntityList{} : adaptive_filter(table, dist, n_sigma);
        if (got != want) ++bad;
      }
    }
  }

  // Pass fraction of adaptive(normal, 1) on near-continuous Gaussian frequencies.
  std::size_t passed = 0, total = 0;
  std::normal_distribution<double> freq(500.0, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<FrequencyEntry> entries;
    for (int i = 0; i < 50; ++i) {
      const double f = std::clamp(std::round(freq(rng)), 1.0, 1000.0);
      entries.push_back({"n" + std::to_string(i), static_cast<std::size_t>(f)});
    }
    const auto table = FrequencyTable::from_counts(std::move(entries), 1000);
    passed += adaptive_filter(table, FrequencyDistribution::normal, 1).size();
    total += table.size();
  }
  const double fraction = double(passed) / double(total);
  std::ostringstream d;
  d << bad << "/" << checks << " selections differ; gaussian pass fraction=" << fraction << " (need [0.10, 0.22])";
  report("entity-filter-oracle", bad == 0 && fraction >= 0.10 && fraction <= 0.22, d.str());
}

void monotonicity() {
  std::mt19937_64 rng(14);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto table = random_table(rng);
    std::set<std::string> previous;
    for (std::size_t tau = 1; tau <= 9; ++tau) {
      const auto list = heuristic_filter(table, tau);
      const std::set<std::string> current(list.begin(), list.end());
      if (tau > 1 && !std::includes(previous.begin(), previous.end(), current.begin(), current.end())) ++bad;
      previous = current;
    }
    if (!heuristic_filter(table, table.l + 1).empty()) ++bad;
  }
  report("filter-monotonicity", bad == 0, std::to_string(bad) + " violations over 1000 tables");
}

// ---------------------------------------------------------------- neural core

FusionDims toy_dims() {
  FusionDims d;
  d.d = 8, d.d_dec = 8, d.k = 3, d.q = 2, d.map_layers = 2, d.attn_layers = 1, d.dec_layers = 1, d.heads = 2;
  d.vocab_size = 12, d.max_len = 16;
  return d;
}

TrainingBatch toy_batch(std::mt19937_64& rng, const FusionDims& dims) {
  std::uniform_int_distribution<TokenId> token(0, dims.vocab_size - 1);
  TrainingBatch batch;
  for (int e = 0; e < 2; ++e) {
    FusionExample ex;
    ex.text_embedding = random_unit(rng, dims.d);
    for (std::size_t r = 0; r < dims.k; ++r) ex.retrieved.push_back(random_unit(rng, dims.d));
    for (int i = 0; i < 3; ++i) ex.prompt.push_back(token(rng));
    for (int i = 0; i < 4; ++i) ex.caption.push_back(token(rng));
    batch.push_back(std::move(ex));
  }
  return batch;
}

void gradient_check_criterion() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::mt19937_64 rng(seed + 100);
    const auto dims = toy_dims();
    const FusionModel model(dims, seed);
    const auto r = gradient_check(model, toy_batch(rng, dims), 1e-4);
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      std::ostringstream w;
      w << r.worst_parameter << "[" << r.worst_index << "] seed " << seed << " (analytic " << r.worst_analytic
        << ", numeric " << r.worst_numeric << ")";
      where = w.str();
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "max relative error=" << worst << " at " << where << " time=" << elapsed << "s";
  report("gradient-check", worst < 1e-4 && elapsed < 60.0, d.str());
}

void memorization() {
  const auto t0 = Clock::now();
  const std::vector<std::string> captions(toy_captions().begin(), toy_captions().begin() + 20);
  const auto embeddings = hash_embed_all(captions, 32, 0);
  PipelineConfig cfg;
  cfg.dims.d_dec = 32, cfg.dims.q = 4, cfg.dims.map_layers = 2, cfg.dims.attn_layers = 1;
  cfg.dims.dec_layers = 2, cfg.dims.heads = 4, cfg.dims.max_len = 40;
  cfg.ilr.k = 3;
  cfg.epochs = 500, cfg.batch_size = 20, cfg.lr = 3e-3, cfg.seed = 5, cfg.ilr.seed = 5;
  const auto ckpt = train(embeddings, captions, cfg);

  const Index index(embeddings, captions);
  const auto tagger = NounTagger::default_english();
  std::size_t reproduced = 0;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const Vector t = embeddings.row_as_vector(i);
    std::vector<Vector> retrieved;
    for (const auto& h : index.top_k(t, cfg.ilr.k).hits) retrieved.push_back(embeddings.row_as_vector(h.index));
    const auto prompt = ckpt.vocab.encode(build_hard_prompt(extract_nouns(captions[i], tagger)));
    const auto tokens = generate(ckpt.model, compute_prefix(ckpt.model, t, retrieved), prompt);
    if (ckpt.vocab.decode(tokens) == join(tokenize(captions[i]))) ++reproduced;
  }
  const double elapsed = seconds_since(t0);
  const double final_loss = ckpt.epoch_losses.back();
  std::ostringstream d;
  d << "final loss=" << final_loss << " reproduced=" << reproduced << "/20 time=" << elapsed << "s";
  report("memorization", final_loss < 0.05 && reproduced >= 18 && elapsed < 120.0, d.str());
}

// ---------------------------------------------------------------- metrics

void metric_sanity() {
  const EvalSet self = {{"a dog runs on the beach", {"a dog runs on the beach"}},
                        {"a cat sleeps on the red sofa", {"a cat sleeps on the red sofa"}}};
  const double b4 = bleu(self, 4);
  const double c = cider(self).score;
  const double b1 = bleu({{"the cat sat", {"the cat sat down"}}}, 1);
  const double want = std::exp(1.0 - 4.0 / 3.0);
  std::ostringstream d;
  d << "bleu@4=" << b4 << " cider=" << c << " bleu@1 example=" << b1 << " (expected " << want << ")";
  report("metric-sanity", std::abs(b4 - 1.0) < 1e-12 && std::abs(c - 10.0) < 1e-9 && std::abs(b1 - want) < 1e-4,
         d.str());
}

// ---------------------------------------------------------------- determinism

struct RunArtifacts {
  std::string log, checkpoint, outputs;
};

RunArtifacts full_run() {
  const auto& captions = toy_captions();
  const auto embeddings = hash_embed_all(captions, 32, 3);
  PipelineConfig cfg;
  cfg.dims.d_dec = 16, cfg.dims.q = 3, cfg.dims.map_layers = 1, cfg.dims.dec_layers = 1, cfg.dims.heads = 2;
  cfg.dims.max_len = 40, cfg.epochs = 3, cfg.batch_size = 8, cfg.lr = 1e-3, cfg.seed = 9, cfg.ilr.seed = 9;
  RunArtifacts out;
  std::ostringstream log;
  TrainingOptions options;
  options.on_epoch = [&](std::size_t e, double loss) { log << "epoch=" << e << " loss=" << loss << '\n'; };
  const auto ckpt = train(embeddings, captions, cfg, options);
  out.log = log.str();
  std::ostringstream bytes;
  write_checkpoint(bytes, ckpt);
  out.checkpoint = bytes.str();
  const Index index(embeddings, captions);
  std::ostringstream captions_out;
  for (std::size_t i = 0; i < captions.size(); i += 5) {
    captions_out << infer_image(hash_embed(captions[i] + " outdoors", 32, 3), ckpt, index, cfg.inference()) << '\n';
  }
  out.outputs = captions_out.str();
  return out;
}

void determinism() {
  const auto a = full_run();
  const auto b = full_run();
  std::ostringstream d;
  d << "log " << (a.log == b.log ? "equal" : "differs") << ", checkpoint (" << a.checkpoint.size() << " bytes) "
    << (a.checkpoint == b.checkpoint ? "equal" : "differs") << ", outputs "
    << (a.outputs == b.outputs ? "equal" : "differs");
  report("determinism", a.log == b.log && a.checkpoint == b.checkpoint && a.outputs == b.outputs, d.str());
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> criteria = {
      {"retrieval-oracle", retrieval_oracle},
      {"ilr-zero-noise-identity", ilr_zero_noise},
      {"modality-gap", modality_gap},
      {"entity-filter-oracle", entity_filter_oracle},
      {"gradient-check", gradient_check_criterion},
      {"memorization", memorization},
      {"filter-monotonicity", monotonicity},
      {"metric-sanity", metric_sanity},
      {"determinism", determinism},
  };
  for (const auto& [name, check] : criteria) {
    try {
      check();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
