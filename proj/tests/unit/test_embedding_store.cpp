#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "retrocap/errors.hpp"
#include "test_util.hpp"

using namespace retrocap;

namespace {

Index random_index(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  return Index(EmbeddingMatrix::from_rows(d, testutil::random_rows(rng, n, d)), std::vector<std::string>(n, "c"));
}

std::vector<Hit> sorted_oracle(const Index& index, const Vector& q, std::size_t k) {
  std::vector<Hit> all;
  for (std::size_t i = 0; i < index.count(); ++i) {
    double s = 0.0;
    const auto row = index.embeddings().row(i);
    for (std::size_t j = 0; j < q.size(); ++j) s += double(row[j]) * q[j];
    all.push_back({i, s});
  }
  std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) { return a.score > b.score; });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST(Normalize, ThreeFourFive) {
  const auto v = normalize(Vector{3.0, 4.0});
  EXPECT_DOUBLE_EQ(v[0], 0.6);
  EXPECT_DOUBLE_EQ(v[1], 0.8);
}

TEST(Normalize, UnitInputUnchanged) {
  const auto v = normalize(Vector{1.0, 0.0, 0.0});
  EXPECT_EQ(v, (Vector{1.0, 0.0, 0.0}));
}

TEST(Normalize, ZeroVectorThrows) {
  EXPECT_THROW(normalize(Vector{0.0, 0.0}), NormalizationError);
  EXPECT_THROW(normalize(Vector{}), NormalizationError);
}

TEST(Cosine, SelfOrthogonalAntipodal) {
  std::mt19937_64 rng(1);
  const auto u = testutil::random_unit(rng, 16);
  EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 0}, Vector{-1, 0}), -1.0);
  EXPECT_THROW(cosine_similarity(Vector{1, 0}, Vector{1, 0, 0}), DimensionError);
}

TEST(EmbeddingMatrix, NormalizesOffUnitRowsAndKeepsUnitRows) {
  const float unit[] = {0.6f, 0.8f};
  EmbeddingMatrix m(2, 2, {0.6f, 0.8f, 3.0f, 4.0f});
  EXPECT_EQ(std::memcmp(m.row(0).data(), unit, sizeof(unit)), 0);
  EXPECT_NEAR(m.row(1)[0], 0.6, 1e-7);
  EXPECT_NEAR(m.row(1)[1], 0.8, 1e-7);
  EXPECT_THROW(EmbeddingMatrix(2, 1, {0.0f, 0.0f}), NormalizationError);
  EXPECT_THROW(EmbeddingMatrix(2, 2, {1.0f, 0.0f}), DimensionError);
}

TEST(EmbeddingFile, RoundTripIsBitExact) {
  std::mt19937_64 rng(2);
  const auto m = EmbeddingMatrix::from_rows(7, testutil::random_rows(rng, 5, 7));
  std::stringstream first;
  write_embeddings(first, m);
  const auto loaded = read_embeddings(first);
  EXPECT_EQ(loaded, m);
  std::stringstream second;
  write_embeddings(second, loaded);
  EXPECT_EQ(first.str(), second.str());
}

TEST(EmbeddingFile, HeaderLayout) {
  const auto m = EmbeddingMatrix::from_rows(2, {{1.0, 0.0}});
  std::stringstream s;
  write_embeddings(s, m);
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 4u + 2 + 2 + 4 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "IFCE");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 1);
}

TEST(EmbeddingFile, RejectsMalformedInput) {
  auto expect_format_error = [](std::string bytes) {
    std::stringstream s(bytes);
    EXPECT_THROW(read_embeddings(s), FormatError);
  };
  const auto m = EmbeddingMatrix::from_rows(2, {{1.0, 0.0}});
  std::stringstream s;
  write_embeddings(s, m);
  const std::string good = s.str();
  expect_format_error("");
  expect_format_error("IFCX" + good.substr(4));
  std::string bad_version = good;
  bad_version[4] = 2;
  expect_format_error(bad_version);
  std::string bad_dtype = good;
  bad_dtype[6] = 2;
  expect_format_error(bad_dtype);
  expect_format_error(good.substr(0, good.size() - 1));
  expect_format_error(good + "x");
}

TEST(Captions, TrailingNewlineAndCarriageReturns) {
  std::stringstream s("a dog\r\nthe cat\n");
  EXPECT_EQ(read_captions(s), (std::vector<std::string>{"a dog", "the cat"}));
}

TEST(Index, BuildCountsAndMismatch) {
  const auto m = EmbeddingMatrix::from_rows(2, {{1, 0}, {0, 1}, {1, 1}});
  EXPECT_EQ(build_index(m, {"a", "b", "c"}).count(), 3u);
  EXPECT_THROW(build_index(m, {"a", "b"}), IndexBuildError);
}

TEST(Index, EmptyIndexReturnsNoHits) {
  const Index index = build_index(EmbeddingMatrix{}, {});
  EXPECT_TRUE(index.top_k(Vector{1.0, 0.0}, 5).empty());
}

TEST(Index, ExactMatchAndTruncation) {
  std::mt19937_64 rng(3);
  const auto rows = testutil::random_rows(rng, 20, 8);
  const Index index(EmbeddingMatrix::from_rows(8, rows), std::vector<std::string>(20, "c"));
  const auto hits = index.top_k(index.embeddings().row_as_vector(7), 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits.hits[0].index, 7u);
  EXPECT_NEAR(hits.hits[0].score, 1.0, 1e-6);

  const Index small(EmbeddingMatrix::from_rows(8, {rows[0], rows[1], rows[2]}), {"a", "b", "c"});
  EXPECT_EQ(small.top_k(rows[0], 5).size(), 3u);
}

TEST(Index, DimensionMismatchThrows) {
  const Index index = random_index(4, 10, 8);
  EXPECT_THROW(index.top_k(Vector(7, 0.1), 3), DimensionError);
}

TEST(Index, TiesBreakByAscendingIndex) {
  const Index index(EmbeddingMatrix::from_rows(2, {{0, 1}, {1, 0}, {1, 0}, {0, 1}, {1, 0}}),
                    {"a", "b", "c", "d", "e"});
  EXPECT_EQ(index.top_k(Vector{1.0, 0.0}, 4).indices(), (std::vector<std::size_t>{1, 2, 4, 0}));
}

TEST(Index, MatchesSortOracleOnRandomCorpora) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Index index = random_index(100 + trial, 300, 16);
    const auto q = testutil::random_unit(rng, 16);
    for (std::size_t k : {1u, 3u, 10u, 300u, 400u}) {
      EXPECT_EQ(index.top_k(q, k).hits, sorted_oracle(index, q, k));
    }
  }
}

TEST(Index, ScoresSortedAndWithinUnitRange) {
  std::mt19937_64 rng(6);
  const Index index = random_index(6, 200, 12);
  for (int i = 0; i < 20; ++i) {
    const auto hits = index.top_k(testutil::random_unit(rng, 12), 25).hits;
    for (std::size_t r = 0; r < hits.size(); ++r) {
      EXPECT_LE(std::abs(hits[r].score), 1.0 + 1e-6);
      if (r > 0) EXPECT_TRUE(ranks_before(hits[r - 1], hits[r]));
    }
  }
}

TEST(Index, RotationInvarianceOfRanking) {
  // An orthogonal map applied to corpus and query keeps the ranking (ties aside).
  std::mt19937_64 rng(7);
  const std::size_t d = 6;
  const auto rows = testutil::random_rows(rng, 50, d);
  const auto q = testutil::random_unit(rng, d);
  // Givens rotation in the (0, 3) plane.
  const double c = std::cos(0.7), s = std::sin(0.7);
  auto rotate = [&](Vector v) {
    const double a = v[0], b = v[3];
    v[0] = c * a - s * b;
    v[3] = s * a + c * b;
    return v;
  };
  std::vector<Vector> rotated;
  for (const auto& r : rows) rotated.push_back(rotate(r));
  const Index plain(EmbeddingMatrix::from_rows(d, rows), std::vector<std::string>(50, "c"));
  const Index turned(EmbeddingMatrix::from_rows(d, rotated), std::vector<std::string>(50, "c"));
  const auto a = plain.top_k(q, 10).hits;
  const auto b = turned.top_k(rotate(q), 10).hits;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].index, b[i].index);
    EXPECT_NEAR(a[i].score, b[i].score, 1e-6);
  }
}

TEST(Index, BatchMatchesSerialAcrossThreadCounts) {
  std::mt19937_64 rng(8);
  const Index index = random_index(8, 500, 32);
  const auto queries = testutil::random_rows(rng, 37, 32);
  std::vector<RetrievalResult> serial;
  for (const auto& q : queries) serial.push_back(index.top_k(q, 7));
  for (unsigned threads : {0u, 1u, 2u, 5u, 64u}) EXPECT_EQ(index.top_k_batch(queries, 7, threads), serial);
}
