#include "retrocap/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <thread>

#include "retrocap/binary_io.hpp"
#include "retrocap/errors.hpp"

namespace retrocap {

namespace {

constexpr std::array<char, 4> kEmbeddingMagic = {'I', 'F', 'C', 'E'};
constexpr std::uint16_t kEmbeddingVersion = 1;
constexpr std::uint16_t kDtypeFloat32 = 1;

double row_norm(std::span<const float> row) {
  double sum = 0.0;
  for (float x : row) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

}  // namespace

Vector normalize(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  const double norm = std::sqrt(sum);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NormalizationError("cannot normalize a zero or non-finite vector");
  }
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

double dot_row(std::span<const float> row, std::span<const double> query) {
  double dot = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) dot += static_cast<double>(row[i]) * query[i];
  return dot;
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> values)
    : dim_(dim), count_(count), values_(std::move(values)) {
  if (values_.size() != dim_ * count_) {
    throw DimensionError("embedding buffer holds " + std::to_string(values_.size()) +
                         " values, expected " + std::to_string(dim_ * count_));
  }
  for (std::size_t i = 0; i < count_; ++i) {
    std::span<float> r(values_.data() + i * dim_, dim_);
    const double norm = row_norm(r);
    if (std::abs(norm - 1.0) <= kUnitTolerance) continue;
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw NormalizationError("embedding row " + std::to_string(i) + " has zero or non-finite norm");
    }
    for (float& x : r) x = static_cast<float>(static_cast<double>(x) / norm);
  }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(std::size_t dim, const std::vector<Vector>& rows) {
  std::vector<float> values;
  values.reserve(dim * rows.size());
  for (const auto& r : rows) {
    if (r.size() != dim) throw DimensionError("row dimension mismatch in from_rows");
    for (double x : r) values.push_back(static_cast<float>(x));
  }
  return EmbeddingMatrix(dim, rows.size(), std::move(values));
}

std::span<const float> EmbeddingMatrix::row(std::size_t i) const {
  return std::span<const float>(values_).subspan(i * dim_, dim_);
}

Vector EmbeddingMatrix::row_as_vector(std::size_t i) const {
  auto r = row(i);
  return Vector(r.begin(), r.end());
}

void write_embeddings(std::ostream& out, const EmbeddingMatrix& m) {
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  binary::write_le<std::uint16_t>(out, kEmbeddingVersion);
  binary::write_le<std::uint16_t>(out, kDtypeFloat32);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  binary::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.count()));
  binary::write_f32_array(out, m.data());
  if (!out) throw FormatError("failed writing embedding stream");
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_embeddings(out, m);
}

EmbeddingMatrix read_embeddings(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kEmbeddingMagic) throw FormatError("bad embedding magic (expected IFCE)");
  const auto version = binary::read_le<std::uint16_t>(in);
  if (version != kEmbeddingVersion) {
    throw FormatError("unsupported embedding file version " + std::to_string(version));
  }
  const auto dtype = binary::read_le<std::uint16_t>(in);
  if (dtype != kDtypeFloat32) throw FormatError("unsupported embedding dtype " + std::to_string(dtype));
  const auto dim = binary::read_le<std::uint32_t>(in);
  const auto count = binary::read_le<std::uint64_t>(in);
  if (dim == 0) throw FormatError("embedding file declares dim 0");
  auto values = binary::read_f32_array(in, static_cast<std::size_t>(dim) * count);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after embedding payload");
  }
  return EmbeddingMatrix(dim, count, std::move(values));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_embeddings(in);
}

std::vector<std::string> read_captions(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<std::string> load_captions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_captions(in);
}

std::vector<std::size_t> RetrievalResult::indices() const {
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.index);
  return out;
}

Index::Index(EmbeddingMatrix embeddings, std::vector<std::string> captions)
    : embeddings_(std::move(embeddings)), captions_(std::move(captions)) {
  if (captions_.size() != embeddings_.count()) {
    throw IndexBuildError("index has " + std::to_string(embeddings_.count()) + " embeddings but " +
                          std::to_string(captions_.size()) + " captions");
  }
}

Index build_index(EmbeddingMatrix embeddings, std::vector<std::string> captions) {
  if (embeddings.dim() == 0 && embeddings.count() > 0) throw IndexBuildError("dim must be positive");
  return Index(std::move(embeddings), std::move(captions));
}

RetrievalResult Index::top_k(std::span<const double> query, std::size_t k) const {
  RetrievalResult result;
  if (empty() || k == 0) return result;
  if (query.size() != dim()) {
    throw DimensionError("query has dim " + std::to_string(query.size()) + ", index has " +
                         std::to_string(dim()));
  }
  const std::size_t keep = std::min(k, count());
  // Min-heap on ranking order: the top element is the weakest hit kept so far.
  auto worse_first = [](const Hit& a, const Hit& b) { return ranks_before(a, b); };
  std::priority_queue<Hit, std::vector<Hit>, decltype(worse_first)> heap(worse_first);
  for (std::size_t i = 0; i < count(); ++i) {
    Hit h{i, dot_row(embeddings_.row(i), query)};
    if (heap.size() < keep) {
      heap.push(h);
    } else if (ranks_before(h, heap.top())) {
      heap.pop();
      heap.push(h);
    }
  }
  result.hits.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    result.hits[i] = heap.top();
    heap.pop();
  }
  return result;
}

std::vector<RetrievalResult> Index::top_k_batch(const std::vector<Vector>& queries, std::size_t k,
                                                unsigned threads) const {
  std::vector<RetrievalResult> out(queries.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, queries.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = top_k(queries[i], k);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < queries.size(); i += threads) out[i] = top_k(queries[i], k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace retrocap
