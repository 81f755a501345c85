#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace retrocap {

using Vector = std::vector<double>;

// Returns v / ||v||. Throws NormalizationError on an all-zero (or non-finite) input.
Vector normalize(std::span<const double> v);

// Dot product of two unit vectors; throws DimensionError on size mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Row-major store of unit-norm float32 embeddings.
///
/// Rows whose norm is already within 1e-6 of one are kept bit-for-bit, so a
/// validated file survives load/save unchanged. Any other row is normalized
/// in double precision and rounded back to float32.
class EmbeddingMatrix {
 public:
  static constexpr double kUnitTolerance = 1e-6;

  EmbeddingMatrix() = default;
  // Takes count*dim values; throws NormalizationError on a zero row.
  EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> values);
  static EmbeddingMatrix from_rows(std::size_t dim, const std::vector<Vector>& rows);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  std::span<const float> row(std::size_t i) const;
  Vector row_as_vector(std::size_t i) const;
  std::span<const float> data() const noexcept { return values_; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> values_;
};

// "IFCE" embedding file: magic, u16 version=1, u16 dtype=1 (float32), u32 dim,
// u64 count, then count*dim little-endian float32 values.
void write_embeddings(std::ostream& out, const EmbeddingMatrix& m);
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embeddings(std::istream& in);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

// One caption per line; a trailing newline does not add an empty caption.
std::vector<std::string> read_captions(std::istream& in);
std::vector<std::string> load_captions(const std::filesystem::path& path);

struct Hit {
  std::size_t index = 0;
  double score = 0.0;
  friend bool operator==(const Hit&, const Hit&) = default;
};

// Ordered by descending score, ties by ascending corpus index.
struct RetrievalResult {
  std::vector<Hit> hits;

  std::size_t size() const noexcept { return hits.size(); }
  bool empty() const noexcept { return hits.empty(); }
  std::vector<std::size_t> indices() const;
  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

// Strict ranking order used by every retrieval path.
inline bool ranks_before(const Hit& a, const Hit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.index < b.index);
}

/// Immutable exact cosine index. Queries are read-only and thread-safe.
class Index {
 public:
  Index() = default;
  // Throws IndexBuildError when the caption count differs from the row count.
  Index(EmbeddingMatrix embeddings, std::vector<std::string> captions);

  std::size_t dim() const noexcept { return embeddings_.dim(); }
  std::size_t count() const noexcept { return embeddings_.count(); }
  bool empty() const noexcept { return count() == 0; }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::string>& captions() const noexcept { return captions_; }
  const std::string& caption(std::size_t i) const { return captions_.at(i); }

  // Scores every row (double accumulation, fixed order) and keeps the k best.
  RetrievalResult top_k(std::span<const double> query, std::size_t k) const;

  // Runs top_k for each query, splitting queries across worker threads.
  // Results are identical to calling top_k serially.
  std::vector<RetrievalResult> top_k_batch(const std::vector<Vector>& queries,
                                           std::size_t k,
                                           unsigned threads = 0) const;

 private:
  EmbeddingMatrix embeddings_;
  std::vector<std::string> captions_;
};

Index build_index(EmbeddingMatrix embeddings, std::vector<std::string> captions);

// Dot product with double accumulation in index order; shared by the index
// and by anything that needs scores comparable with it.
double dot_row(std::span<const float> row, std::span<const double> query);

}  // namespace retrocap
