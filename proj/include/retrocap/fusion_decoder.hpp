#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retrocap/embedding_store.hpp"
#include "retrocap/nn/graph.hpp"
#include "retrocap/vocab.hpp"

namespace retrocap {

struct FusionDims {
  std::size_t d = 64;            // encoder embedding width
  std::size_t d_dec = 64;        // decoder width
  std::size_t k = 5;             // retrieved captions fused per example
  std::size_t q = 10;            // learned prefix tokens
  std::size_t map_layers = 8;
  std::size_t attn_layers = 1;
  std::size_t dec_layers = 2;
  std::size_t heads = 4;
  std::size_t vocab_size = 2;
  std::size_t max_len = 64;      // longest decoder input (prefix + prompt + caption)

  // Throws ConfigError unless every field is positive and heads divides d_dec.
  void validate() const;
  friend bool operator==(const FusionDims&, const FusionDims&) = default;
};

struct Parameter {
  std::string name;
  nn::Matrix value;
};

namespace detail {

// Indices into FusionModel::parameters(); a bias of nn::Graph::kNone means none.
struct LinearSlots {
  std::size_t weight = 0, bias = 0;
};
struct AttentionSlots {
  LinearSlots q, k, v, o;
};
struct BlockSlots {
  std::size_t ln1_gain = 0, ln1_bias = 0;
  AttentionSlots attn;
  std::size_t ln2_gain = 0, ln2_bias = 0;
  LinearSlots ffn_in, ffn_out;
};
struct Layout {
  LinearSlots l1, l2;
  std::vector<AttentionSlots> xattn;
  std::vector<BlockSlots> map;
  std::size_t query_tokens = 0;
  std::size_t token_embedding = 0, position_embedding = 0;
  std::vector<BlockSlots> dec;
  std::size_t final_gain = 0, final_bias = 0;
  LinearSlots output;
};

}  // namespace detail

/// Every learnable tensor of the captioner, in a fixed manifest order:
/// input projections, cross-attention layers, mapping-network blocks and
/// query tokens, then the decoder (embeddings, blocks, final norm, output).
class FusionModel {
 public:
  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embeddings and
  // query tokens use fan_in = d_dec; norms start at gain 1, bias 0.
  FusionModel(FusionDims dims, std::uint64_t seed);
  // Adopts loaded tensors; throws FormatError if names or shapes differ from the layout.
  static FusionModel from_parameters(FusionDims dims, std::vector<Parameter> params);

  const FusionDims& dims() const noexcept { return dims_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::vector<Parameter>& parameters() noexcept { return params_; }
  const detail::Layout& layout() const noexcept { return layout_; }

  // Throws std::out_of_range for unknown names.
  nn::Matrix& param(std::string_view name);
  const nn::Matrix& param(std::string_view name) const;

  std::size_t parameter_count() const noexcept;
  bool all_finite() const noexcept;
  void round_to_float32();

  friend bool operator==(const FusionModel& a, const FusionModel& b);

 private:
  FusionModel(FusionDims dims, std::vector<Parameter> params, detail::Layout layout);

  FusionDims dims_;
  std::vector<Parameter> params_;
  detail::Layout layout_;
};

enum class Projection { text, retrieved };

// Applies f_l1 (text) or f_l2 (retrieved) to each row of a rows x d matrix.
nn::Matrix project(const FusionModel& model, const nn::Matrix& rows, Projection which);

// Query row (1 x d_dec) attends over key/value rows (k x d_dec) through every
// cross-attention layer; layers after the first add a residual. When
// `weights` is given, each head's softmax matrix is appended to it.
nn::Matrix cross_attention(const FusionModel& model, const nn::Matrix& query_row, const nn::Matrix& kv_rows,
                           std::vector<nn::Matrix>* weights = nullptr);

// Runs the mapping network over [fused_row; query_tokens] and returns the
// rows at the query-token positions. No positional encoding is added.
nn::Matrix mapping_network(const FusionModel& model, const nn::Matrix& fused_row, const nn::Matrix& query_tokens,
                           std::vector<nn::Matrix>* weights = nullptr);
nn::Matrix mapping_network(const FusionModel& model, const nn::Matrix& fused_row,
                           std::vector<nn::Matrix>* weights = nullptr);

// Full conditioning path: project, cross-attend, map. With no retrieved rows
// the text embedding stands in as the single retrieved row.
nn::Matrix compute_prefix(const FusionModel& model, std::span<const double> text_embedding,
                          const std::vector<Vector>& retrieved);

// Causal decoder over [prefix; prompt; caption[0..N-2]]. Row i of the result
// holds the logits for caption[i]. Throws LengthError when q + |prompt| + N - 1
// exceeds max_len and VocabError on out-of-range token ids.
nn::Matrix decode_forward(const FusionModel& model, const nn::Matrix& prefix, std::span<const TokenId> prompt,
                          std::span<const TokenId> caption, std::vector<nn::Matrix>* weights = nullptr);

// Mean negative log-likelihood of the targets under row-wise softmax.
double autoregressive_loss(const nn::Matrix& logits, std::span<const TokenId> targets);

struct FusionExample {
  Vector text_embedding;          // T_e, already noised on the training path
  std::vector<Vector> retrieved;  // R_e rows
  std::vector<TokenId> prompt;
  std::vector<TokenId> caption;   // target tokens, normally ending with the end token
};

using TrainingBatch = std::vector<FusionExample>;

// Mean over examples of the per-example autoregressive loss.
double batch_loss(const FusionModel& model, const TrainingBatch& batch);

// Same loss plus d(loss)/d(parameter), aligned with model.parameters().
double loss_and_gradients(const FusionModel& model, const TrainingBatch& batch, std::vector<nn::Matrix>& grads);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<nn::Matrix> m, v;
};

// Decoupled-decay AdamW update of every parameter. lr == 0 leaves the
// parameters untouched (moments still advance).
void adamw_update(FusionModel& model, const std::vector<nn::Matrix>& grads, AdamWState& state, double lr);

// One optimization step; returns the pre-update loss. Throws NumericsError
// (carrying batch_id) on a non-finite loss or non-finite updated parameters.
double train_step(FusionModel& model, const TrainingBatch& batch, AdamWState& state, double lr, long batch_id = 0);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences with step h on every parameter entry versus the
// analytic gradient; relative error |a - f| / max(|a|, |f|, 1e-8).
GradientCheckReport gradient_check(const FusionModel& model, const TrainingBatch& batch, double h);

enum class DecodeStrategy { greedy, beam };

struct DecodeOptions {
  DecodeStrategy strategy = DecodeStrategy::greedy;
  std::size_t beam_width = 1;
  std::size_t max_new = 24;
};

// Greedy takes the argmax each step (lowest id on ties). Beam keeps the
// beam_width best partial sequences by summed log-probability. Both stop at
// the end token, max_new tokens, or max_len. The end token is not returned.
std::vector<TokenId> generate(const FusionModel& model, const nn::Matrix& prefix, std::span<const TokenId> prompt,
                              const DecodeOptions& options = {});

}  // namespace retrocap
