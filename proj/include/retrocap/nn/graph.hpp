#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace retrocap::nn {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const noexcept { return data.size(); }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Reverse-mode autodiff tape over Matrix values.
///
/// Nodes are appended in evaluation order, so backward() walks ids in reverse.
/// Parameters are bound by reference and must outlive the graph. Gradients
/// are only tracked for nodes that depend on a parameter with requires_grad.
class Graph {
 public:
  using Id = std::size_t;
  static constexpr Id kNone = static_cast<Id>(-1);

  Id input(Matrix value);
  Id parameter(const Matrix& value, bool requires_grad = true);

  const Matrix& value(Id id) const;
  // Zero-sized when the node never received a gradient.
  const Matrix& grad(Id id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // x W + b with W of shape in x out and b of shape 1 x out; bias may be kNone.
  Id linear(Id x, Id weight, Id bias = kNone);
  Id add(Id a, Id b);
  Id layer_norm(Id x, Id gain, Id bias, double eps = 1e-5);
  Id gelu(Id x);

  // Multi-head scaled dot-product attention. q is n_q x D, k and v are
  // n_k x D. With causal set, query row i attends to key rows 0..i + (n_k - n_q).
  Id attention(Id q, Id k, Id v, std::size_t heads, bool causal);

  Id concat_rows(std::span<const Id> parts);
  Id slice_rows(Id x, std::size_t begin, std::size_t count);
  Id gather_rows(Id table, std::span<const std::size_t> rows);

  // Mean over rows of -log softmax(logits)[target]; result is 1 x 1.
  Id cross_entropy(Id logits, std::span<const std::size_t> targets);
  // Mean of 1 x 1 nodes.
  Id mean(std::span<const Id> scalars);

  // Seeds d(root)/d(root) = 1 and propagates to every tracked node.
  void backward(Id root);

  // When set, attention() appends each head's softmax weight matrix here.
  void record_attention(std::vector<Matrix>* sink) noexcept { attention_sink_ = sink; }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool tracked = false;
    std::function<void(Graph&, Id)> backward;

    const Matrix& value() const { return external ? *external : owned; }
  };

  Id push(Matrix value, bool tracked, std::function<void(Graph&, Id)> backward);
  bool tracked(Id id) const { return nodes_[id].tracked; }
  // Gradient buffer of a tracked node, allocated on first use.
  Matrix& grad_buffer(Id id);

  std::vector<Node> nodes_;
  std::vector<Matrix>* attention_sink_ = nullptr;
};

}  // namespace retrocap::nn
