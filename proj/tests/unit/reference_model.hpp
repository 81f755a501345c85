#pragma once
// Plain-loop forward pass used as an independent oracle for the fusion model.

#include <cmath>
#include <vector>

#include "retrocap/fusion_decoder.hpp"

namespace ref {

using Rows = std::vector<std::vector<double>>;

inline Rows param(const retrocap::FusionModel& m, const std::string& name) {
  const auto& p = m.param(name);
  Rows out(p.rows, std::vector<double>(p.cols));
  for (std::size_t r = 0; r < p.rows; ++r) {
    for (std::size_t c = 0; c < p.cols; ++c) out[r][c] = p(r, c);
  }
  return out;
}

inline Rows linear(const Rows& x, const Rows& w, const Rows* b) {
  Rows y(x.size(), std::vector<double>(w[0].size(), 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < w[0].size(); ++c) {
      double s = b ? (*b)[0][c] : 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += x[r][i] * w[i][c];
      y[r][c] = s;
    }
  }
  return y;
}

inline Rows linear(const retrocap::FusionModel& m, const std::string& name, const Rows& x, bool bias = true) {
  const auto w = param(m, name + ".weight");
  if (!bias) return linear(x, w, nullptr);
  const auto b = param(m, name + ".bias");
  return linear(x, w, &b);
}

inline Rows add(Rows a, const Rows& b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) a[r][c] += b[r][c];
  }
  return a;
}

inline Rows layer_norm(const retrocap::FusionModel& m, const std::string& name, const Rows& x) {
  const auto g = param(m, name + ".gain"), b = param(m, name + ".bias");
  Rows y = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : x[r]) mean += v;
    mean /= x[r].size();
    for (double v : x[r]) var += (v - mean) * (v - mean);
    var /= x[r].size();
    for (std::size_t c = 0; c < x[r].size(); ++c) y[r][c] = (x[r][c] - mean) / std::sqrt(var + 1e-5) * g[0][c] + b[0][c];
  }
  return y;
}

inline Rows gelu(Rows x) {
  for (auto& row : x) {
    for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  return x;
}

inline Rows attention(const retrocap::FusionModel& m, const std::string& name, const Rows& query,
                      const Rows& context, bool causal) {
  const std::size_t heads = m.dims().heads;
  const Rows q = linear(m, name + ".q", query), k = linear(m, name + ".k", context, false),
             v = linear(m, name + ".v", context);
  const std::size_t width = q[0].size(), dh = width / heads, nq = q.size(), nk = k.size();
  Rows out(nq, std::vector<double>(width, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      const std::size_t visible = causal ? i + (nk - nq) + 1 : nk;
      std::vector<double> s(visible);
      double mx = -1e300;
      for (std::size_t j = 0; j < visible; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += q[i][h * dh + c] * k[j][h * dh + c];
        s[j] = dot / std::sqrt(double(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (double& x : s) z += (x = std::exp(x - mx));
      for (std::size_t j = 0; j < visible; ++j) {
        for (std::size_t c = 0; c < dh; ++c) out[i][h * dh + c] += s[j] / z * v[j][h * dh + c];
      }
    }
  }
  return linear(m, name + ".o", out);
}

inline Rows block(const retrocap::FusionModel& m, const std::string& name, Rows x, bool causal) {
  const Rows h = layer_norm(m, name + ".ln1", x);
  x = add(x, attention(m, name + ".attn", h, h, causal));
  const Rows h2 = layer_norm(m, name + ".ln2", x);
  return add(x, linear(m, name + ".ffn.out", gelu(linear(m, name + ".ffn.in", h2))));
}

inline Rows mapping(const retrocap::FusionModel& m, const Rows& fused, const Rows& query_tokens) {
  Rows x = fused;
  x.insert(x.end(), query_tokens.begin(), query_tokens.end());
  for (std::size_t i = 0; i < m.dims().map_layers; ++i) x = block(m, "map." + std::to_string(i), x, false);
  return Rows(x.begin() + 1, x.end());
}

inline Rows decoder(const retrocap::FusionModel& m, const Rows& prefix, const std::vector<std::size_t>& prompt,
                    const std::vector<std::size_t>& caption) {
  const auto tok = param(m, "dec.token_embedding"), pos = param(m, "dec.position_embedding");
  Rows x = prefix;
  std::vector<std::size_t> fed = prompt;
  fed.insert(fed.end(), caption.begin(), caption.end() - 1);
  for (auto t : fed) x.push_back(tok[t]);
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < x[r].size(); ++c) x[r][c] += pos[r][c];
  }
  for (std::size_t i = 0; i < m.dims().dec_layers; ++i) x = block(m, "dec." + std::to_string(i), x, true);
  x = layer_norm(m, "dec.final_ln", x);
  const Rows tail(x.begin() + prefix.size() + prompt.size() - 1, x.end());
  return linear(m, "dec.output", tail);
}

inline Rows to_rows(const retrocap::nn::Matrix& mtx) {
  Rows out(mtx.rows, std::vector<double>(mtx.cols));
  for (std::size_t r = 0; r < mtx.rows; ++r) {
    for (std::size_t c = 0; c < mtx.cols; ++c) out[r][c] = mtx(r, c);
  }
  return out;
}

}  // namespace ref
