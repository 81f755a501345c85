#include "retrocap/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "retrocap/errors.hpp"

namespace retrocap::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

// c += a * b  (a: m x n, b: n x p)
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

// c += a * b^T  (a: m x n, b: p x n)
void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      c(i, j) += s;
    }
  }
}

// c += a^T * b  (a: n x m, b: n x p)
void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* brow = b.data.data() + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* crow = c.data.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == m.cols, "ragged rows in Matrix::from_rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Graph::Id Graph::push(Matrix value, bool is_tracked, std::function<void(Graph&, Id)> backward) {
  Node node;
  node.owned = std::move(value);
  node.tracked = is_tracked;
  if (is_tracked) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Graph::Id Graph::input(Matrix value) { return push(std::move(value), false, nullptr); }

Graph::Id Graph::parameter(const Matrix& value, bool requires_grad) {
  Node node;
  node.external = &value;
  node.tracked = requires_grad;
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Matrix& Graph::value(Id id) const { return nodes_.at(id).value(); }

const Matrix& Graph::grad(Id id) const { return nodes_.at(id).grad; }

Matrix& Graph::grad_buffer(Id id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value().size() != 0) n.grad = Matrix(n.value().rows, n.value().cols);
  return n.grad;
}

Graph::Id Graph::linear(Id x, Id weight, Id bias) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(weight);
  require(xv.cols == wv.rows, "linear: input width does not match weight rows");
  Matrix y(xv.rows, wv.cols);
  if (bias != kNone) {
    const Matrix& bv = value(bias);
    require(bv.rows == 1 && bv.cols == wv.cols, "linear: bias shape mismatch");
    for (std::size_t r = 0; r < y.rows; ++r) std::copy(bv.data.begin(), bv.data.end(), y.row(r).begin());
  }
  gemm_acc(xv, wv, y);
  const bool t = tracked(x) || tracked(weight) || (bias != kNone && tracked(bias));
  return push(std::move(y), t, [x, weight, bias](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    if (g.tracked(x)) gemm_nt_acc(gy, g.value(weight), g.grad_buffer(x));
    if (g.tracked(weight)) gemm_tn_acc(g.value(x), gy, g.grad_buffer(weight));
    if (bias != kNone && g.tracked(bias)) {
      Matrix& gb = g.grad_buffer(bias);
      for (std::size_t r = 0; r < gy.rows; ++r) {
        for (std::size_t c = 0; c < gy.cols; ++c) gb.data[c] += gy(r, c);
      }
    }
  });
}

Graph::Id Graph::add(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require(av.rows == bv.rows && av.cols == bv.cols, "add: shape mismatch");
  Matrix y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += bv.data[i];
  return push(std::move(y), tracked(a) || tracked(b), [a, b](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    for (Id parent : {a, b}) {
      if (!g.tracked(parent)) continue;
      Matrix& gp = g.grad_buffer(parent);
      for (std::size_t i = 0; i < gy.size(); ++i) gp.data[i] += gy.data[i];
    }
  });
}

Graph::Id Graph::layer_norm(Id x, Id gain, Id bias, double eps) {
  const Matrix& xv = value(x);
  const Matrix& gv = value(gain);
  const Matrix& bv = value(bias);
  require(gv.rows == 1 && gv.cols == xv.cols && bv.rows == 1 && bv.cols == xv.cols,
          "layer_norm: gain/bias shape mismatch");
  Matrix xhat(xv.rows, xv.cols);
  std::vector<double> inv_std(xv.rows);
  Matrix y(xv.rows, xv.cols);
  const double n = static_cast<double>(xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double mean = 0.0;
    for (double v : xv.row(r)) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : xv.row(r)) var += (v - mean) * (v - mean);
    var /= n;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < xv.cols; ++c) {
      xhat(r, c) = (xv(r, c) - mean) * inv_std[r];
      y(r, c) = xhat(r, c) * gv.data[c] + bv.data[c];
    }
  }
  const bool t = tracked(x) || tracked(gain) || tracked(bias);
  return push(std::move(y), t,
              [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, Id self) {
                const Matrix& gy = g.nodes_[self].grad;
                const Matrix& gv = g.value(gain);
                const double n = static_cast<double>(gy.cols);
                if (g.tracked(gain) || g.tracked(bias)) {
                  for (std::size_t r = 0; r < gy.rows; ++r) {
                    for (std::size_t c = 0; c < gy.cols; ++c) {
                      if (g.tracked(gain)) g.grad_buffer(gain).data[c] += gy(r, c) * xhat(r, c);
                      if (g.tracked(bias)) g.grad_buffer(bias).data[c] += gy(r, c);
                    }
                  }
                }
                if (!g.tracked(x)) return;
                Matrix& gx = g.grad_buffer(x);
                for (std::size_t r = 0; r < gy.rows; ++r) {
                  double mean_d = 0.0, mean_dx = 0.0;
                  for (std::size_t c = 0; c < gy.cols; ++c) {
                    const double d = gy(r, c) * gv.data[c];
                    mean_d += d;
                    mean_dx += d * xhat(r, c);
                  }
                  mean_d /= n;
                  mean_dx /= n;
                  for (std::size_t c = 0; c < gy.cols; ++c) {
                    const double d = gy(r, c) * gv.data[c];
                    gx(r, c) += inv_std[r] * (d - mean_d - xhat(r, c) * mean_dx);
                  }
                }
              });
}

Graph::Id Graph::gelu(Id x) {
  const Matrix& xv = value(x);
  Matrix y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv.data[i];
    y.data[i] = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  }
  return push(std::move(y), tracked(x), [x](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    const Matrix& xv = g.value(x);
    Matrix& gx = g.grad_buffer(x);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx.data[i] += gy.data[i] * (cdf + v * pdf);
    }
  });
}

Graph::Id Graph::attention(Id q, Id k, Id v, std::size_t heads, bool causal) {
  const Matrix& qv = value(q);
  const Matrix& kv = value(k);
  const Matrix& vv = value(v);
  require(heads > 0 && qv.cols % heads == 0, "attention: heads must divide the model width");
  require(kv.cols == qv.cols && vv.cols == qv.cols, "attention: q/k/v widths differ");
  require(kv.rows == vv.rows, "attention: key and value counts differ");
  require(kv.rows > 0, "attention: no keys");
  require(!causal || kv.rows >= qv.rows, "attention: causal mask needs n_k >= n_q");
  const std::size_t nq = qv.rows, nk = kv.rows, dh = qv.cols / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t shift = nk - (causal ? nq : 0);

  std::vector<Matrix> probs(heads, Matrix(nq, nk));
  Matrix out(nq, qv.cols);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Matrix& p = probs[h];
    for (std::size_t i = 0; i < nq; ++i) {
      const std::size_t visible = causal ? i + shift + 1 : nk;
      double max_s = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < visible; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qv(i, off + c) * kv(j, off + c);
        p(i, j) = s * scale;
        max_s = std::max(max_s, p(i, j));
      }
      double z = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        p(i, j) = std::exp(p(i, j) - max_s);
        z += p(i, j);
      }
      for (std::size_t j = 0; j < visible; ++j) p(i, j) /= z;
      for (std::size_t j = visible; j < nk; ++j) p(i, j) = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double w = p(i, j);
        for (std::size_t c = 0; c < dh; ++c) out(i, off + c) += w * vv(j, off + c);
      }
    }
  }
  if (attention_sink_) attention_sink_->insert(attention_sink_->end(), probs.begin(), probs.end());

  const bool t = tracked(q) || tracked(k) || tracked(v);
  return push(std::move(out), t, [q, k, v, heads, dh, scale, probs = std::move(probs)](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    const Matrix& qv = g.value(q);
    const Matrix& kv = g.value(k);
    const Matrix& vv = g.value(v);
    const std::size_t nq = qv.rows, nk = kv.rows;
    Matrix* gq = g.tracked(q) ? &g.grad_buffer(q) : nullptr;
    Matrix* gk = g.tracked(k) ? &g.grad_buffer(k) : nullptr;
    Matrix* gv = g.tracked(v) ? &g.grad_buffer(v) : nullptr;
    std::vector<double> dp(nk);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      const Matrix& p = probs[h];
      for (std::size_t i = 0; i < nq; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < nk; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += gy(i, off + c) * vv(j, off + c);
          dp[j] = s;
          dot += s * p(i, j);
        }
        for (std::size_t j = 0; j < nk; ++j) {
          const double w = p(i, j);
          if (w == 0.0) continue;
          if (gv) {
            for (std::size_t c = 0; c < dh; ++c) (*gv)(j, off + c) += w * gy(i, off + c);
          }
          const double ds = w * (dp[j] - dot) * scale;
          if (gq) {
            for (std::size_t c = 0; c < dh; ++c) (*gq)(i, off + c) += ds * kv(j, off + c);
          }
          if (gk) {
            for (std::size_t c = 0; c < dh; ++c) (*gk)(j, off + c) += ds * qv(i, off + c);
          }
        }
      }
    }
  });
}

Graph::Id Graph::concat_rows(std::span<const Id> parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t cols = value(parts.front()).cols;
  std::size_t rows = 0;
  bool t = false;
  for (Id p : parts) {
    require(value(p).cols == cols, "concat_rows: width mismatch");
    rows += value(p).rows;
    t = t || tracked(p);
  }
  Matrix y(rows, cols);
  std::size_t at = 0;
  for (Id p : parts) {
    const Matrix& pv = value(p);
    std::copy(pv.data.begin(), pv.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(at * cols));
    at += pv.rows;
  }
  std::vector<Id> ids(parts.begin(), parts.end());
  return push(std::move(y), t, [ids = std::move(ids)](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    std::size_t at = 0;
    for (Id p : ids) {
      const std::size_t n = g.value(p).size();
      if (g.tracked(p)) {
        Matrix& gp = g.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) gp.data[i] += gy.data[at + i];
      }
      at += n;
    }
  });
}

Graph::Id Graph::slice_rows(Id x, std::size_t begin, std::size_t count) {
  const Matrix& xv = value(x);
  require(begin + count <= xv.rows, "slice_rows: range out of bounds");
  Matrix y(count, xv.cols);
  std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * xv.cols), count * xv.cols, y.data.begin());
  return push(std::move(y), tracked(x), [x, begin](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    Matrix& gx = g.grad_buffer(x);
    const std::size_t base = begin * gx.cols;
    for (std::size_t i = 0; i < gy.size(); ++i) gx.data[base + i] += gy.data[i];
  });
}

Graph::Id Graph::gather_rows(Id table, std::span<const std::size_t> rows) {
  const Matrix& tv = value(table);
  Matrix y(rows.size(), tv.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < tv.rows, "gather_rows: row id out of range");
    std::copy_n(tv.row(rows[i]).begin(), tv.cols, y.row(i).begin());
  }
  std::vector<std::size_t> ids(rows.begin(), rows.end());
  return push(std::move(y), tracked(table), [table, ids = std::move(ids)](Graph& g, Id self) {
    const Matrix& gy = g.nodes_[self].grad;
    Matrix& gt = g.grad_buffer(table);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t c = 0; c < gy.cols; ++c) gt(ids[i], c) += gy(i, c);
    }
  });
}

Graph::Id Graph::cross_entropy(Id logits, std::span<const std::size_t> targets) {
  const Matrix& lv = value(logits);
  require(lv.rows == targets.size(), "cross_entropy: one logit row per target required");
  require(lv.rows > 0, "cross_entropy: no targets");
  Matrix probs(lv.rows, lv.cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows; ++r) {
    require(targets[r] < lv.cols, "cross_entropy: target id out of range");
    const auto row = lv.row(r);
    const double max_v = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - max_v);
    const double log_z = max_v + std::log(z);
    loss += log_z - row[targets[r]];
    for (std::size_t c = 0; c < lv.cols; ++c) probs(r, c) = std::exp(row[c] - log_z);
  }
  const double n = static_cast<double>(lv.rows);
  Matrix y(1, 1, loss / n);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return push(std::move(y), tracked(logits),
              [logits, n, probs = std::move(probs), tg = std::move(tg)](Graph& g, Id self) {
                const double up = g.nodes_[self].grad.data[0] / n;
                Matrix& gl = g.grad_buffer(logits);
                for (std::size_t r = 0; r < probs.rows; ++r) {
                  for (std::size_t c = 0; c < probs.cols; ++c) {
                    gl(r, c) += up * (probs(r, c) - (c == tg[r] ? 1.0 : 0.0));
                  }
                }
              });
}

Graph::Id Graph::mean(std::span<const Id> scalars) {
  require(!scalars.empty(), "mean: no inputs");
  double sum = 0.0;
  bool t = false;
  for (Id s : scalars) {
    require(value(s).rows == 1 && value(s).cols == 1, "mean: inputs must be 1 x 1");
    sum += value(s).data[0];
    t = t || tracked(s);
  }
  const double n = static_cast<double>(scalars.size());
  std::vector<Id> ids(scalars.begin(), scalars.end());
  return push(Matrix(1, 1, sum / n), t, [n, ids = std::move(ids)](Graph& g, Id self) {
    const double up = g.nodes_[self].grad.data[0] / n;
    for (Id s : ids) {
      if (g.tracked(s)) g.grad_buffer(s).data[0] += up;
    }
  });
}

void Graph::backward(Id root) {
  require(value(root).rows == 1 && value(root).cols == 1, "backward: root must be a scalar");
  if (!tracked(root)) return;
  grad_buffer(root).data[0] = 1.0;
  for (Id id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.tracked || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
  }
}

}  // namespace retrocap::nn
