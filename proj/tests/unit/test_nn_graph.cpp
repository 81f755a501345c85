#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "retrocap/errors.hpp"
#include "retrocap/nn/graph.hpp"

using retrocap::nn::Graph;
using retrocap::nn::Matrix;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.data) x = normal(rng);
  return m;
}

// Builds a scalar loss from the parameters; returns its id.
using Builder = std::function<Graph::Id(Graph&, const std::vector<Graph::Id>&)>;

double eval(std::vector<Matrix>& params, const Builder& build) {
  Graph g;
  std::vector<Graph::Id> ids;
  for (auto& p : params) ids.push_back(g.parameter(p, false));
  return g.value(build(g, ids))(0, 0);
}

// Max relative error between tape gradients and central differences.
double check(std::vector<Matrix> params, const Builder& build, double h = 1e-5) {
  Graph g;
  std::vector<Graph::Id> ids;
  for (auto& p : params) ids.push_back(g.parameter(p));
  g.backward(build(g, ids));
  std::vector<Matrix> grads;
  for (auto id : ids) grads.push_back(g.grad(id));
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double x0 = params[p].data[i];
      params[p].data[i] = x0 + h;
      const double up = eval(params, build);
      params[p].data[i] = x0 - h;
      const double down = eval(params, build);
      params[p].data[i] = x0;
      const double f = (up - down) / (2 * h);
      const double a = grads[p].size() ? grads[p].data[i] : 0.0;
      worst = std::max(worst, std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6}));
    }
  }
  return worst;
}

const std::vector<std::size_t> kTargets = {0, 2, 1, 3};

// Reads a 4 x n node out through a linear map into a cross entropy.
Graph::Id head(Graph& g, Graph::Id x, Graph::Id w) { return g.cross_entropy(g.linear(x, w), kTargets); }

}  // namespace

TEST(Graph, LinearAndCrossEntropyGradients) {
  std::mt19937_64 rng(1);
  EXPECT_LT(check({random_matrix(rng, 4, 3), random_matrix(rng, 3, 5), random_matrix(rng, 1, 5)},
                  [](Graph& g, const auto& p) { return g.cross_entropy(g.linear(p[0], p[1], p[2]), kTargets); }),
            1e-6);
}

TEST(Graph, LayerNormGradients) {
  std::mt19937_64 rng(2);
  EXPECT_LT(check({random_matrix(rng, 4, 6), random_matrix(rng, 1, 6), random_matrix(rng, 1, 6),
                   random_matrix(rng, 6, 5)},
                  [](Graph& g, const auto& p) { return head(g, g.layer_norm(p[0], p[1], p[2]), p[3]); }),
            1e-6);
}

TEST(Graph, GeluGradients) {
  std::mt19937_64 rng(3);
  EXPECT_LT(check({random_matrix(rng, 4, 3), random_matrix(rng, 3, 5)},
                  [](Graph& g, const auto& p) { return head(g, g.gelu(p[0]), p[1]); }),
            1e-6);
}

TEST(Graph, AttentionGradients) {
  std::mt19937_64 rng(4);
  for (bool causal : {false, true}) {
    for (std::size_t heads : {1u, 2u}) {
      EXPECT_LT(check({random_matrix(rng, 4, 4), random_matrix(rng, 6, 4), random_matrix(rng, 6, 4),
                       random_matrix(rng, 4, 5)},
                      [&](Graph& g, const auto& p) { return head(g, g.attention(p[0], p[1], p[2], heads, causal), p[3]); }),
                1e-6)
          << "causal=" << causal << " heads=" << heads;
    }
  }
}

TEST(Graph, RowOpsGradients) {
  std::mt19937_64 rng(5);
  const std::vector<std::size_t> pick = {2, 0, 2, 1};
  EXPECT_LT(check({random_matrix(rng, 3, 4), random_matrix(rng, 2, 4), random_matrix(rng, 4, 5)},
                  [&](Graph& g, const auto& p) {
                    const Graph::Id parts[] = {p[0], p[1]};
                    const auto joined = g.concat_rows(parts);
                    const auto sliced = g.slice_rows(joined, 1, 4);
                    const auto gathered = g.gather_rows(p[0], pick);
                    return head(g, g.add(sliced, gathered), p[2]);
                  }),
            1e-6);
}

TEST(Graph, MeanOfScalars) {
  std::mt19937_64 rng(6);
  EXPECT_LT(check({random_matrix(rng, 4, 5), random_matrix(rng, 4, 5)},
                  [](Graph& g, const auto& p) {
                    const Graph::Id parts[] = {g.cross_entropy(p[0], kTargets), g.cross_entropy(p[1], kTargets)};
                    return g.mean(parts);
                  }),
            1e-6);
}

TEST(Graph, CausalAttentionHidesFutureKeys) {
  std::mt19937_64 rng(7);
  Matrix q = random_matrix(rng, 3, 4), k = random_matrix(rng, 3, 4), v = random_matrix(rng, 3, 4);
  std::vector<Matrix> weights;
  Graph g;
  g.record_attention(&weights);
  g.attention(g.input(q), g.input(k), g.input(v), 2, true);
  ASSERT_EQ(weights.size(), 2u);
  for (const auto& w : weights) {
    for (std::size_t i = 0; i < 3; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        row += w(i, j);
        if (j > i) EXPECT_EQ(w(i, j), 0.0);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(Graph, CrossEntropyUniformIsLogV) {
  Graph g;
  const auto loss = g.cross_entropy(g.input(Matrix(2, 7, 0.3)), std::vector<std::size_t>{1, 5});
  EXPECT_NEAR(g.value(loss)(0, 0), std::log(7.0), 1e-15);
}

TEST(Graph, ShapeErrors) {
  Graph g;
  const auto a = g.input(Matrix(2, 3)), b = g.input(Matrix(3, 2));
  EXPECT_THROW(g.add(a, b), retrocap::DimensionError);
  EXPECT_THROW(g.linear(a, a), retrocap::DimensionError);
  EXPECT_THROW(g.attention(a, g.input(Matrix(2, 3)), g.input(Matrix(2, 3)), 2, false), retrocap::DimensionError);
  EXPECT_THROW(g.cross_entropy(a, std::vector<std::size_t>{0}), retrocap::DimensionError);
  EXPECT_THROW(g.cross_entropy(a, std::vector<std::size_t>{0, 3}), retrocap::DimensionError);
  EXPECT_THROW(g.slice_rows(a, 1, 2), retrocap::DimensionError);
}
