#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "retrocap/embedding_store.hpp"

namespace retrocap {

using Rng = std::mt19937_64;

// Where Gaussian noise enters the retrieval path: on the query before search
// (pre), on each retrieved caption embedding after search (post), both, or none.
enum class InjectionMode { pre_retrieval, post_retrieval, both, none };

std::string to_string(InjectionMode mode);
InjectionMode parse_injection_mode(const std::string& text);

struct IlrConfig {
  double sigma_r = 0.04;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  InjectionMode injection_mode = InjectionMode::pre_retrieval;

  // Throws ConfigError on sigma_r < 0 or k == 0.
  void validate() const;
};

// Yields standard-normal draws. Anything producing the same sequence yields
// the same noise, independent of which generator backs it.
using StandardNormalSource = std::function<double()>;

StandardNormalSource standard_normal_source(Rng& rng);

// v + eps, eps_i ~ N(0, sigma_r^2) i.i.d. Throws ConfigError when sigma_r < 0.
// sigma_r == 0 returns v unchanged and consumes no draws.
Vector inject_noise(std::span<const double> v, double sigma_r, const StandardNormalSource& normal);
Vector inject_noise(std::span<const double> v, double sigma_r, Rng& rng);

struct NoisyQuery {
  Vector base;
  Vector noisy;
  Vector renormalized;
};

struct IlrResult {
  RetrievalResult hits;
  // Embedding of each hit, in hit order. Under post_retrieval/both each row
  // carries its own independent noise draw; otherwise the stored rows.
  std::vector<Vector> retrieved_embeddings;
  NoisyQuery query;
};

IlrResult image_like_retrieve(const Index& index, std::span<const double> text_embedding,
                              const IlrConfig& cfg, const StandardNormalSource& normal);
IlrResult image_like_retrieve(const Index& index, std::span<const double> text_embedding,
                              const IlrConfig& cfg, Rng& rng);

// Componentwise mean of the frames, renormalized. Throws ConfigError on an
// empty list, DimensionError on ragged input, NormalizationError on a zero mean.
Vector aggregate_queries(const std::vector<Vector>& frames);

// |a ∩ b| / max(|a|, |b|) over hit indices; 0 when both are empty.
double retrieval_overlap(const RetrievalResult& a, const RetrievalResult& b);

struct PairedCorpus {
  EmbeddingMatrix text;
  EmbeddingMatrix image;
  Vector offset_direction;
};

// Text rows are random unit vectors; image row i is
// normalize(text_i + offset_norm * g + eta_i) with g a shared random unit
// direction and eta_i ~ N(0, image_noise^2) per component.
PairedCorpus synth_paired_corpus(std::size_t n, std::size_t d, double offset_norm,
                                 double image_noise, std::uint64_t seed);

struct SweepPoint {
  double sigma_r = 0.0;
  double overlap_ilr = 0.0;
  double overlap_t2t = 0.0;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  std::size_t best = 0;  // index into points with the highest overlap_ilr (first on ties)
  std::size_t queries = 0;
  std::size_t k = 0;

  double best_sigma() const { return points.at(best).sigma_r; }
  double gain() const { return points.at(best).overlap_ilr - points.at(best).overlap_t2t; }
};

// Expands "lo:hi:step" into an inclusive grid, robust to floating-point drift.
std::vector<double> parse_sweep(const std::string& spec);
std::vector<double> sweep_grid(double lo, double hi, double step);

// For each sigma_r in the grid, averages over the first `queries` pairs the
// overlap of ILR hits (query = text row, noise drawn from a per-query stream
// seeded by (seed, query id)) and of plain text-to-text hits with the
// image-to-text hits of the paired image row.
SweepReport overlap_sweep(const PairedCorpus& corpus, const std::vector<double>& sigmas,
                          std::size_t k, std::size_t queries, std::uint64_t seed);

// "sigma_r=<v> overlap_ilr=<v> overlap_t2t=<v>" per point, then summary lines.
void write_sweep_report(std::ostream& out, const SweepReport& report);

// Independent generator for query `id` under a run seed.
Rng derive_rng(std::uint64_t seed, std::uint64_t id);

}  // namespace retrocap
