#include "retrocap/image_like_retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_set>

#include "retrocap/errors.hpp"
#include "retrocap/text_format.hpp"

namespace retrocap {

std::string to_string(InjectionMode mode) {
  switch (mode) {
    case InjectionMode::pre_retrieval: return "pre_retrieval";
    case InjectionMode::post_retrieval: return "post_retrieval";
    case InjectionMode::both: return "both";
    case InjectionMode::none: return "none";
  }
  return "unknown";
}

InjectionMode parse_injection_mode(const std::string& text) {
  if (text == "pre_retrieval" || text == "pre") return InjectionMode::pre_retrieval;
  if (text == "post_retrieval" || text == "post") return InjectionMode::post_retrieval;
  if (text == "both") return InjectionMode::both;
  if (text == "none") return InjectionMode::none;
  throw ConfigError("unknown injection mode '" + text + "'");
}

void IlrConfig::validate() const {
  if (!(sigma_r >= 0.0)) throw ConfigError("sigma_r must be non-negative");
  if (k == 0) throw ConfigError("k must be at least 1");
}

StandardNormalSource standard_normal_source(Rng& rng) {
  return [&rng, dist = std::normal_distribution<double>(0.0, 1.0)]() mutable { return dist(rng); };
}

Vector inject_noise(std::span<const double> v, double sigma_r, const StandardNormalSource& normal) {
  if (!(sigma_r >= 0.0)) throw ConfigError("sigma_r must be non-negative");
  Vector out(v.begin(), v.end());
  if (sigma_r == 0.0) return out;
  for (double& x : out) x += sigma_r * normal();
  return out;
}

Vector inject_noise(std::span<const double> v, double sigma_r, Rng& rng) {
  return inject_noise(v, sigma_r, standard_normal_source(rng));
}

IlrResult image_like_retrieve(const Index& index, std::span<const double> text_embedding,
                              const IlrConfig& cfg, const StandardNormalSource& normal) {
  cfg.validate();
  if (!index.empty() && text_embedding.size() != index.dim()) {
    throw DimensionError("query dim " + std::to_string(text_embedding.size()) +
                         " does not match index dim " + std::to_string(index.dim()));
  }
  IlrResult result;
  result.query.base.assign(text_embedding.begin(), text_embedding.end());
  const bool noisy_query =
      cfg.injection_mode == InjectionMode::pre_retrieval || cfg.injection_mode == InjectionMode::both;
  const bool noisy_hits =
      cfg.injection_mode == InjectionMode::post_retrieval || cfg.injection_mode == InjectionMode::both;

  const bool perturbed = noisy_query && cfg.sigma_r > 0.0;
  result.query.noisy = perturbed ? inject_noise(text_embedding, cfg.sigma_r, normal) : result.query.base;
  // An unperturbed query is already unit-norm; searching it as-is keeps the
  // zero-noise path bit-identical to plain text-to-text retrieval.
  result.query.renormalized = perturbed ? normalize(result.query.noisy) : result.query.base;
  result.hits = index.top_k(result.query.renormalized, cfg.k);

  result.retrieved_embeddings.reserve(result.hits.size());
  for (const auto& h : result.hits.hits) {
    Vector row = index.embeddings().row_as_vector(h.index);
    if (noisy_hits) row = inject_noise(row, cfg.sigma_r, normal);
    result.retrieved_embeddings.push_back(std::move(row));
  }
  return result;
}

IlrResult image_like_retrieve(const Index& index, std::span<const double> text_embedding,
                              const IlrConfig& cfg, Rng& rng) {
  return image_like_retrieve(index, text_embedding, cfg, standard_normal_source(rng));
}

Vector aggregate_queries(const std::vector<Vector>& frames) {
  if (frames.empty()) throw ConfigError("aggregate_queries needs at least one frame");
  const std::size_t d = frames.front().size();
  Vector mean(d, 0.0);
  for (const auto& f : frames) {
    if (f.size() != d) throw DimensionError("frames have inconsistent dimensions");
    for (std::size_t i = 0; i < d; ++i) mean[i] += f[i];
  }
  for (double& x : mean) x /= static_cast<double>(frames.size());
  return normalize(mean);
}

double retrieval_overlap(const RetrievalResult& a, const RetrievalResult& b) {
  const std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 0.0;
  std::unordered_set<std::size_t> seen;
  for (const auto& h : a.hits) seen.insert(h.index);
  std::size_t shared = 0;
  for (const auto& h : b.hits) shared += seen.count(h.index);
  return static_cast<double>(shared) / static_cast<double>(denom);
}

Rng derive_rng(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
  return Rng(seq);
}

PairedCorpus synth_paired_corpus(std::size_t n, std::size_t d, double offset_norm, double image_noise,
                                 std::uint64_t seed) {
  if (n == 0 || d == 0) throw ConfigError("synthetic corpus needs n > 0 and d > 0");
  if (!(image_noise >= 0.0)) throw ConfigError("image_noise must be non-negative");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&] {
    Vector v(d);
    for (double& x : v) x = gauss(rng);
    return normalize(v);
  };

  PairedCorpus out;
  out.offset_direction = random_unit();
  std::vector<Vector> text_rows, image_rows;
  text_rows.reserve(n);
  image_rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector t = random_unit();
    Vector img = t;
    for (std::size_t j = 0; j < d; ++j) {
      img[j] += offset_norm * out.offset_direction[j];
      if (image_noise > 0.0) img[j] += image_noise * gauss(rng);
    }
    text_rows.push_back(std::move(t));
    image_rows.push_back(normalize(img));
  }
  out.text = EmbeddingMatrix::from_rows(d, text_rows);
  out.image = EmbeddingMatrix::from_rows(d, image_rows);
  return out;
}

std::vector<double> sweep_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("sweep needs lo <= hi and step > 0");
  const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  out.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

std::vector<double> parse_sweep(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string::npos ? std::string::npos : spec.find(':', a + 1);
  if (b == std::string::npos) throw ConfigError("sweep must look like lo:hi:step, got '" + spec + "'");
  try {
    return sweep_grid(std::stod(spec.substr(0, a)), std::stod(spec.substr(a + 1, b - a - 1)),
                      std::stod(spec.substr(b + 1)));
  } catch (const std::logic_error&) {
    throw ConfigError("sweep must look like lo:hi:step, got '" + spec + "'");
  }
}

SweepReport overlap_sweep(const PairedCorpus& corpus, const std::vector<double>& sigmas, std::size_t k,
                          std::size_t queries, std::uint64_t seed) {
  if (sigmas.empty()) throw ConfigError("empty sigma sweep");
  const std::size_t n = std::min(queries, corpus.text.count());
  std::vector<std::string> no_captions(corpus.text.count());
  const Index index(corpus.text, std::move(no_captions));

  std::vector<RetrievalResult> i2t(n), t2t(n);
  for (std::size_t q = 0; q < n; ++q) {
    i2t[q] = index.top_k(corpus.image.row_as_vector(q), k);
    t2t[q] = index.top_k(corpus.text.row_as_vector(q), k);
  }

  SweepReport report;
  report.queries = n;
  report.k = k;
  for (double sigma : sigmas) {
    IlrConfig cfg;
    cfg.sigma_r = sigma;
    cfg.k = k;
    double ilr_sum = 0.0, t2t_sum = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      Rng rng = derive_rng(seed, q);
      const auto ilr = image_like_retrieve(index, corpus.text.row_as_vector(q), cfg, rng);
      ilr_sum += retrieval_overlap(ilr.hits, i2t[q]);
      t2t_sum += retrieval_overlap(t2t[q], i2t[q]);
    }
    const double denom = n == 0 ? 1.0 : static_cast<double>(n);
    report.points.push_back({sigma, ilr_sum / denom, t2t_sum / denom});
  }
  for (std::size_t i = 1; i < report.points.size(); ++i) {
    if (report.points[i].overlap_ilr > report.points[report.best].overlap_ilr) report.best = i;
  }
  return report;
}

void write_sweep_report(std::ostream& out, const SweepReport& report) {
  for (const auto& p : report.points) {
    out << "sigma_r=" << format_real(p.sigma_r) << " overlap_ilr=" << format_fixed(p.overlap_ilr)
        << " overlap_t2t=" << format_fixed(p.overlap_t2t) << '\n';
  }
  const auto& best = report.points.at(report.best);
  out << "best_sigma_r=" << format_real(best.sigma_r) << " overlap_ilr=" << format_fixed(best.overlap_ilr)
      << " overlap_t2t=" << format_fixed(best.overlap_t2t) << " gain=" << format_fixed(report.gain())
      << " queries=" << report.queries << " k=" << report.k << '\n';
}

}  // namespace retrocap
