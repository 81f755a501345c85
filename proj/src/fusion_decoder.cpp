#include "retrocap/fusion_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "retrocap/errors.hpp"

namespace retrocap {

using nn::Graph;
using nn::Matrix;

void FusionDims::validate() const {
  for (auto [value, name] : {std::pair{d, "d"}, {d_dec, "d_dec"}, {k, "k"}, {q, "q"}, {map_layers, "map_layers"},
                             {attn_layers, "attn_layers"}, {dec_layers, "dec_layers"}, {heads, "heads"},
                             {vocab_size, "vocab_size"}, {max_len, "max_len"}}) {
    if (value == 0) throw ConfigError(std::string("fusion dimension ") + name + " must be positive");
  }
  if (d_dec % heads != 0) throw ConfigError("heads must divide d_dec");
  if (q >= max_len) throw ConfigError("max_len must exceed the prefix length q");
}

namespace {

enum class Init { uniform, ones, zeros };

struct Spec {
  std::string name;
  std::size_t rows, cols;
  Init init;
  double bound;
};

class LayoutBuilder {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, Init init, double fan_in = 1.0) {
    specs.push_back({std::move(name), rows, cols, init, 1.0 / std::sqrt(fan_in)});
    return specs.size() - 1;
  }
  detail::LinearSlots linear(const std::string& name, std::size_t in, std::size_t out) {
    const auto fan = static_cast<double>(in);
    return {add(name + ".weight", in, out, Init::uniform, fan), add(name + ".bias", 1, out, Init::uniform, fan)};
  }
  detail::LinearSlots weight_only(const std::string& name, std::size_t in, std::size_t out) {
    return {add(name + ".weight", in, out, Init::uniform, static_cast<double>(in)), Graph::kNone};
  }
  // A key bias shifts every score in a softmax row by the same amount, so it
  // would be a parameter with identically zero gradient; keys have none.
  detail::AttentionSlots attention(const std::string& name, std::size_t width) {
    return {linear(name + ".q", width, width), weight_only(name + ".k", width, width),
            linear(name + ".v", width, width), linear(name + ".o", width, width)};
  }
  detail::BlockSlots block(const std::string& name, std::size_t width) {
    detail::BlockSlots b;
    b.ln1_gain = add(name + ".ln1.gain", 1, width, Init::ones);
    b.ln1_bias = add(name + ".ln1.bias", 1, width, Init::zeros);
    b.attn = attention(name + ".attn", width);
    b.ln2_gain = add(name + ".ln2.gain", 1, width, Init::ones);
    b.ln2_bias = add(name + ".ln2.bias", 1, width, Init::zeros);
    b.ffn_in = linear(name + ".ffn.in", width, 4 * width);
    b.ffn_out = linear(name + ".ffn.out", 4 * width, width);
    return b;
  }

  std::vector<Spec> specs;
};

detail::Layout make_layout(const FusionDims& dims, std::vector<Spec>& specs) {
  LayoutBuilder b;
  detail::Layout l;
  const auto w = dims.d_dec;
  const auto emb_fan = static_cast<double>(w);
  l.l1 = b.linear("proj.l1", dims.d, w);
  l.l2 = b.linear("proj.l2", dims.d, w);
  for (std::size_t i = 0; i < dims.attn_layers; ++i) l.xattn.push_back(b.attention("xattn." + std::to_string(i), w));
  for (std::size_t i = 0; i < dims.map_layers; ++i) l.map.push_back(b.block("map." + std::to_string(i), w));
  l.query_tokens = b.add("map.query_tokens", dims.q, w, Init::uniform, emb_fan);
  l.token_embedding = b.add("dec.token_embedding", dims.vocab_size, w, Init::uniform, emb_fan);
  l.position_embedding = b.add("dec.position_embedding", dims.max_len, w, Init::uniform, emb_fan);
  for (std::size_t i = 0; i < dims.dec_layers; ++i) l.dec.push_back(b.block("dec." + std::to_string(i), w));
  l.final_gain = b.add("dec.final_ln.gain", 1, w, Init::ones);
  l.final_bias = b.add("dec.final_ln.bias", 1, w, Init::zeros);
  l.output = b.linear("dec.output", w, dims.vocab_size);
  specs = std::move(b.specs);
  return l;
}

}  // namespace

FusionModel::FusionModel(FusionDims dims, std::vector<Parameter> params, detail::Layout layout)
    : dims_(dims), params_(std::move(params)), layout_(std::move(layout)) {}

FusionModel::FusionModel(FusionDims dims, std::uint64_t seed) : dims_(dims) {
  dims_.validate();
  std::vector<Spec> specs;
  layout_ = make_layout(dims_, specs);
  std::mt19937_64 rng(seed);
  params_.reserve(specs.size());
  for (const auto& s : specs) {
    Matrix m(s.rows, s.cols);
    switch (s.init) {
      case Init::ones: std::fill(m.data.begin(), m.data.end(), 1.0); break;
      case Init::zeros: break;
      case Init::uniform: {
        std::uniform_real_distribution<double> dist(-s.bound, s.bound);
        for (double& x : m.data) x = dist(rng);
        break;
      }
    }
    params_.push_back({s.name, std::move(m)});
  }
}

FusionModel FusionModel::from_parameters(FusionDims dims, std::vector<Parameter> params) {
  dims.validate();
  std::vector<Spec> specs;
  auto layout = make_layout(dims, specs);
  if (specs.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(params.size()) + " tensors, layout expects " +
                      std::to_string(specs.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& p = params[i];
    if (p.name != specs[i].name || p.value.rows != specs[i].rows || p.value.cols != specs[i].cols ||
        p.value.data.size() != p.value.rows * p.value.cols) {
      throw FormatError("tensor " + std::to_string(i) + " ('" + p.name + "') does not match layout entry '" +
                        specs[i].name + "'");
    }
  }
  return FusionModel(dims, std::move(params), std::move(layout));
}

Matrix& FusionModel::param(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Matrix& FusionModel::param(std::string_view name) const {
  return const_cast<FusionModel*>(this)->param(name);
}

std::size_t FusionModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool FusionModel::all_finite() const noexcept {
  for (const auto& p : params_) {
    for (double x : p.value.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void FusionModel::round_to_float32() {
  for (auto& p : params_) {
    for (double& x : p.value.data) x = static_cast<double>(static_cast<float>(x));
  }
}

bool operator==(const FusionModel& a, const FusionModel& b) {
  if (!(a.dims_ == b.dims_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
  }
  return true;
}

namespace {

// Graph ids of every parameter, parallel to model.parameters().
struct Bound {
  const FusionModel& model;
  std::vector<Graph::Id> ids;

  Graph::Id operator[](std::size_t slot) const { return ids[slot]; }
};

Bound bind(Graph& g, const FusionModel& model, bool track) {
  Bound b{model, {}};
  b.ids.reserve(model.parameters().size());
  for (const auto& p : model.parameters()) b.ids.push_back(g.parameter(p.value, track));
  return b;
}

Graph::Id apply_linear(Graph& g, const Bound& b, const detail::LinearSlots& s, Graph::Id x) {
  return g.linear(x, b[s.weight], s.bias == Graph::kNone ? Graph::kNone : b[s.bias]);
}

Graph::Id apply_attention(Graph& g, const Bound& b, const detail::AttentionSlots& s, Graph::Id query,
                          Graph::Id context, bool causal) {
  const auto q = apply_linear(g, b, s.q, query);
  const auto k = apply_linear(g, b, s.k, context);
  const auto v = apply_linear(g, b, s.v, context);
  return apply_linear(g, b, s.o, g.attention(q, k, v, b.model.dims().heads, causal));
}

// Pre-norm transformer block: x + Attn(LN(x)), then + FFN(LN(.)).
Graph::Id apply_block(Graph& g, const Bound& b, const detail::BlockSlots& s, Graph::Id x, bool causal) {
  const auto h = g.layer_norm(x, b[s.ln1_gain], b[s.ln1_bias]);
  x = g.add(x, apply_attention(g, b, s.attn, h, h, causal));
  const auto h2 = g.layer_norm(x, b[s.ln2_gain], b[s.ln2_bias]);
  const auto f = apply_linear(g, b, s.ffn_out, g.gelu(apply_linear(g, b, s.ffn_in, h2)));
  return g.add(x, f);
}

Graph::Id apply_cross_attention(Graph& g, const Bound& b, Graph::Id query, Graph::Id kv) {
  const auto& layers = b.model.layout().xattn;
  auto x = apply_attention(g, b, layers.front(), query, kv, false);
  for (std::size_t i = 1; i < layers.size(); ++i) x = g.add(x, apply_attention(g, b, layers[i], x, kv, false));
  return x;
}

Graph::Id apply_mapping(Graph& g, const Bound& b, Graph::Id fused, Graph::Id query_tokens) {
  const Graph::Id parts[] = {fused, query_tokens};
  auto x = g.concat_rows(parts);
  for (const auto& block : b.model.layout().map) x = apply_block(g, b, block, x, false);
  return g.slice_rows(x, 1, g.value(query_tokens).rows);
}

void check_width(const Matrix& m, std::size_t cols, const char* what) {
  if (m.cols != cols) {
    throw DimensionError(std::string(what) + ": expected width " + std::to_string(cols) + ", got " +
                         std::to_string(m.cols));
  }
}

Matrix to_rows(std::span<const double> row) {
  Matrix m(1, row.size());
  std::copy(row.begin(), row.end(), m.data.begin());
  return m;
}

Matrix retrieved_rows(std::span<const double> text, const std::vector<Vector>& retrieved) {
  if (retrieved.empty()) return to_rows(text);
  Matrix m(retrieved.size(), text.size());
  for (std::size_t i = 0; i < retrieved.size(); ++i) {
    if (retrieved[i].size() != text.size()) throw DimensionError("retrieved embedding width mismatch");
    std::copy(retrieved[i].begin(), retrieved[i].end(), m.row(i).begin());
  }
  return m;
}

Graph::Id apply_prefix(Graph& g, const Bound& b, std::span<const double> text, const std::vector<Vector>& retrieved) {
  const auto& dims = b.model.dims();
  if (text.size() != dims.d) {
    throw DimensionError("text embedding has width " + std::to_string(text.size()) + ", model expects " +
                         std::to_string(dims.d));
  }
  const auto& l = b.model.layout();
  const auto te = apply_linear(g, b, l.l1, g.input(to_rows(text)));
  const auto re = apply_linear(g, b, l.l2, g.input(retrieved_rows(text, retrieved)));
  const auto fused = apply_cross_attention(g, b, te, re);
  return apply_mapping(g, b, fused, b[l.query_tokens]);
}

void check_tokens(std::span<const TokenId> tokens, std::size_t vocab) {
  for (TokenId t : tokens) {
    if (t >= vocab) throw VocabError("token id " + std::to_string(t) + " outside vocabulary of " + std::to_string(vocab));
  }
}

// Logits for caption[0..N-1] given the prefix and prompt.
Graph::Id apply_decoder(Graph& g, const Bound& b, Graph::Id prefix, std::span<const TokenId> prompt,
                        std::span<const TokenId> caption) {
  const auto& dims = b.model.dims();
  const auto& l = b.model.layout();
  const Matrix& pv = g.value(prefix);
  if (pv.rows != dims.q || pv.cols != dims.d_dec) {
    throw DimensionError("prefix must be " + std::to_string(dims.q) + " x " + std::to_string(dims.d_dec));
  }
  if (caption.empty()) throw DimensionError("decode_forward needs at least one caption position");
  check_tokens(prompt, dims.vocab_size);
  check_tokens(caption, dims.vocab_size);
  const std::size_t length = dims.q + prompt.size() + caption.size() - 1;
  if (length > dims.max_len) {
    throw LengthError("decoder input of " + std::to_string(length) + " positions exceeds max_len " +
                      std::to_string(dims.max_len));
  }
  std::vector<TokenId> fed(prompt.begin(), prompt.end());
  fed.insert(fed.end(), caption.begin(), caption.end() - 1);

  std::vector<Graph::Id> parts = {prefix};
  if (!fed.empty()) parts.push_back(g.gather_rows(b[l.token_embedding], fed));
  auto x = g.concat_rows(parts);
  x = g.add(x, g.slice_rows(b[l.position_embedding], 0, length));
  for (const auto& block : l.dec) x = apply_block(g, b, block, x, true);
  x = g.layer_norm(x, b[l.final_gain], b[l.final_bias]);
  const auto rows = g.slice_rows(x, dims.q + prompt.size() - 1, caption.size());
  return apply_linear(g, b, l.output, rows);
}

Graph::Id apply_batch_loss(Graph& g, const Bound& b, const TrainingBatch& batch) {
  if (batch.empty()) throw DimensionError("empty training batch");
  std::vector<Graph::Id> losses;
  losses.reserve(batch.size());
  for (const auto& ex : batch) {
    const auto prefix = apply_prefix(g, b, ex.text_embedding, ex.retrieved);
    const auto logits = apply_decoder(g, b, prefix, ex.prompt, ex.caption);
    losses.push_back(g.cross_entropy(logits, ex.caption));
  }
  return g.mean(losses);
}

}  // namespace

Matrix project(const FusionModel& model, const Matrix& rows, Projection which) {
  check_width(rows, model.dims().d, "project");
  Graph g;
  const auto b = bind(g, model, false);
  const auto& slots = which == Projection::text ? model.layout().l1 : model.layout().l2;
  return g.value(apply_linear(g, b, slots, g.input(rows)));
}

Matrix cross_attention(const FusionModel& model, const Matrix& query_row, const Matrix& kv_rows,
                       std::vector<Matrix>* weights) {
  check_width(query_row, model.dims().d_dec, "cross_attention query");
  check_width(kv_rows, model.dims().d_dec, "cross_attention keys");
  if (query_row.rows != 1) throw DimensionError("cross_attention expects a single query row");
  Graph g;
  g.record_attention(weights);
  const auto b = bind(g, model, false);
  return g.value(apply_cross_attention(g, b, g.input(query_row), g.input(kv_rows)));
}

Matrix mapping_network(const FusionModel& model, const Matrix& fused_row, const Matrix& query_tokens,
                       std::vector<Matrix>* weights) {
  check_width(fused_row, model.dims().d_dec, "mapping_network input");
  check_width(query_tokens, model.dims().d_dec, "mapping_network query tokens");
  if (fused_row.rows != 1) throw DimensionError("mapping_network expects a single fused row");
  Graph g;
  g.record_attention(weights);
  const auto b = bind(g, model, false);
  return g.value(apply_mapping(g, b, g.input(fused_row), g.input(query_tokens)));
}

Matrix mapping_network(const FusionModel& model, const Matrix& fused_row, std::vector<Matrix>* weights) {
  return mapping_network(model, fused_row, model.parameters()[model.layout().query_tokens].value, weights);
}

Matrix compute_prefix(const FusionModel& model, std::span<const double> text_embedding,
                      const std::vector<Vector>& retrieved) {
  Graph g;
  const auto b = bind(g, model, false);
  return g.value(apply_prefix(g, b, text_embedding, retrieved));
}

Matrix decode_forward(const FusionModel& model, const Matrix& prefix, std::span<const TokenId> prompt,
                      std::span<const TokenId> caption, std::vector<Matrix>* weights) {
  Graph g;
  g.record_attention(weights);
  const auto b = bind(g, model, false);
  return g.value(apply_decoder(g, b, g.input(prefix), prompt, caption));
}

double autoregressive_loss(const Matrix& logits, std::span<const TokenId> targets) {
  if (logits.rows != targets.size()) {
    throw DimensionError("autoregressive_loss: " + std::to_string(logits.rows) + " logit rows for " +
                         std::to_string(targets.size()) + " targets");
  }
  Graph g;
  return g.value(g.cross_entropy(g.input(logits), targets)).data[0];
}

double batch_loss(const FusionModel& model, const TrainingBatch& batch) {
  Graph g;
  const auto b = bind(g, model, false);
  return g.value(apply_batch_loss(g, b, batch)).data[0];
}

double loss_and_gradients(const FusionModel& model, const TrainingBatch& batch, std::vector<Matrix>& grads) {
  Graph g;
  const auto b = bind(g, model, true);
  const auto loss = apply_batch_loss(g, b, batch);
  g.backward(loss);
  grads.resize(model.parameters().size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& p = model.parameters()[i].value;
    const auto& gr = g.grad(b.ids[i]);
    grads[i] = gr.size() == 0 ? Matrix(p.rows, p.cols) : gr;
  }
  return g.value(loss).data[0];
}

void adamw_update(FusionModel& model, const std::vector<Matrix>& grads, AdamWState& state, double lr) {
  auto& params = model.parameters();
  if (grads.size() != params.size()) throw DimensionError("gradient list does not match parameters");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.rows, p.value.cols);
      state.v.emplace_back(p.value.rows, p.value.cols);
    }
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value.data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    const auto& gr = grads[i].data;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gr[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gr[j] * gr[j];
      if (lr == 0.0) continue;
      w[j] -= lr * c.weight_decay * w[j];
      w[j] -= lr * (m[j] / bias1) / (std::sqrt(v[j] / bias2) + c.eps);
    }
  }
}

double train_step(FusionModel& model, const TrainingBatch& batch, AdamWState& state, double lr, long batch_id) {
  std::vector<Matrix> grads;
  const double loss = loss_and_gradients(model, batch, grads);
  if (!std::isfinite(loss)) throw NumericsError("non-finite loss in batch " + std::to_string(batch_id), batch_id);
  adamw_update(model, grads, state, lr);
  if (!model.all_finite()) {
    throw NumericsError("non-finite parameters after update of batch " + std::to_string(batch_id), batch_id);
  }
  return loss;
}

GradientCheckReport gradient_check(const FusionModel& model, const TrainingBatch& batch, double h) {
  std::vector<Matrix> analytic;
  loss_and_gradients(model, batch, analytic);
  FusionModel probe = model;
  GradientCheckReport report;
  for (std::size_t i = 0; i < probe.parameters().size(); ++i) {
    auto& values = probe.parameters()[i].value.data;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + h;
      const double plus = batch_loss(probe, batch);
      values[j] = saved - h;
      const double minus = batch_loss(probe, batch);
      values[j] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[i].data[j];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.checked;
      if (err > report.max_relative_error || report.checked == 1) {
        report.max_relative_error = err;
        report.worst_parameter = probe.parameters()[i].name;
        report.worst_index = j;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

namespace {

std::vector<double> log_softmax_row(std::span<const double> row) {
  const double max_v = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double v : row) z += std::exp(v - max_v);
  const double log_z = max_v + std::log(z);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - log_z;
  return out;
}

std::vector<double> next_token_scores(const FusionModel& model, const Matrix& prefix, std::span<const TokenId> prompt,
                                      const std::vector<TokenId>& so_far) {
  std::vector<TokenId> caption = so_far;
  caption.push_back(Vocabulary::kEnd);  // placeholder; only earlier positions feed the last row
  const Matrix logits = decode_forward(model, prefix, prompt, caption);
  return log_softmax_row(logits.row(logits.rows - 1));
}

std::size_t generation_budget(const FusionModel& model, std::span<const TokenId> prompt, std::size_t max_new) {
  const auto& dims = model.dims();
  const std::size_t used = dims.q + prompt.size();
  if (used > dims.max_len) throw LengthError("prefix and prompt already exceed max_len");
  return std::min(max_new, dims.max_len - used + 1);
}

std::vector<TokenId> greedy(const FusionModel& model, const Matrix& prefix, std::span<const TokenId> prompt,
                            std::size_t budget) {
  std::vector<TokenId> out;
  while (out.size() < budget) {
    const auto scores = next_token_scores(model, prefix, prompt, out);
    TokenId best = 0;
    for (TokenId t = 1; t < scores.size(); ++t) {
      if (scores[t] > scores[best]) best = t;
    }
    if (best == Vocabulary::kEnd) break;
    out.push_back(best);
  }
  return out;
}

struct Beam {
  std::vector<TokenId> tokens;
  double score = 0.0;
  bool finished = false;
};

bool beam_before(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

std::vector<TokenId> beam_search(const FusionModel& model, const Matrix& prefix, std::span<const TokenId> prompt,
                                 std::size_t budget, std::size_t width) {
  std::vector<Beam> beams = {Beam{}};
  for (std::size_t step = 0; step < budget; ++step) {
    std::vector<Beam> candidates;
    bool expanded = false;
    for (const auto& beam : beams) {
      if (beam.finished) {
        candidates.push_back(beam);
        continue;
      }
      expanded = true;
      const auto scores = next_token_scores(model, prefix, prompt, beam.tokens);
      for (TokenId t = 0; t < scores.size(); ++t) {
        Beam next = beam;
        next.score += scores[t];
        if (t == Vocabulary::kEnd) {
          next.finished = true;
        } else {
          next.tokens.push_back(t);
        }
        candidates.push_back(std::move(next));
      }
    }
    if (!expanded) break;
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      beam_before);
    candidates.resize(keep);
    beams = std::move(candidates);
  }
  return std::min_element(beams.begin(), beams.end(), beam_before)->tokens;
}

}  // namespace

std::vector<TokenId> generate(const FusionModel& model, const Matrix& prefix, std::span<const TokenId> prompt,
                              const DecodeOptions& options) {
  const std::size_t budget = generation_budget(model, prompt, options.max_new);
  if (options.strategy == DecodeStrategy::greedy) return greedy(model, prefix, prompt, budget);
  return beam_search(model, prefix, prompt, budget, std::max<std::size_t>(1, options.beam_width));
}

}  // namespace retrocap
