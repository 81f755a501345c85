#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "retrocap/embedding_store.hpp"
#include "retrocap/entity_filter.hpp"
#include "retrocap/fusion_decoder.hpp"
#include "retrocap/image_like_retrieval.hpp"
#include "retrocap/vocab.hpp"

namespace retrocap {

// Which retrieved captions feed the fusion module at inference: the top k
// (the training-time count) or all l used for entity filtering.
enum class FusionSource { top_k, all_l };

/// Knobs read at inference. Deliberately carries no noise scale: inference
/// never perturbs the image embedding.
struct InferenceConfig {
  std::size_t l = 9;
  std::size_t k = 5;
  ThresholdSpec threshold;
  FusionSource fusion_source = FusionSource::top_k;
  std::size_t frames_per_video = 5;
  std::size_t sentences_per_frame = 5;
  DecodeOptions decode;

  void validate() const;
};

struct PipelineConfig {
  IlrConfig ilr;
  FusionDims dims;  // vocab_size and k are filled in from the corpus and ilr.k
  double sigma_train = 0.04;
  std::size_t l = 9;
  ThresholdSpec threshold;
  std::size_t epochs = 5;
  std::size_t batch_size = 80;
  double lr = 2e-5;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  std::size_t frames_per_video = 5;
  std::size_t sentences_per_frame = 5;
  FusionSource fusion_source = FusionSource::top_k;
  DecodeStrategy decode = DecodeStrategy::greedy;
  std::size_t beam_width = 1;
  std::size_t max_new = 24;

  // Throws ConfigError on out-of-range knobs (k == 0, l == 0, epochs == 0, ...).
  void validate() const;
  InferenceConfig inference() const;

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b);
};

// Per-dataset settings: coco (l=9, tau=5, 5 epochs), flickr30k (l=7, tau=3,
// 30 epochs), nocaps (l=7, tau=3), msvd (l=7, tau=5, 10 epochs), msrvtt
// (l=7, tau=6, 10 epochs). Throws ConfigError on an unknown name.
PipelineConfig preset_config(const std::string& dataset);

// "key = value" lines, '#' comments. Unknown keys and unparsable values
// throw ConfigError; keys not present keep the values already in `base`.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
// Applies a single "key", "value" override with the same validation.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
void write_config(std::ostream& out, const PipelineConfig& cfg);
std::vector<std::string> config_keys();

struct ModelCheckpoint {
  FusionModel model;
  Vocabulary vocab;
  PipelineConfig config;
  std::vector<double> epoch_losses;
};

// "IFCK" checkpoint: magic, u16 version, u64 manifest length, UTF-8 manifest
// (dims, seeds, config snapshot, per-epoch losses, tensor table, vocabulary),
// then every tensor as little-endian float32 in manifest order.
void write_checkpoint(std::ostream& out, const ModelCheckpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt);
ModelCheckpoint read_checkpoint(std::istream& in);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

struct TrainingOptions {
  NounTagger tagger = NounTagger::default_english();
  // Called after each epoch with (epoch index, mean batch loss).
  std::function<void(std::size_t, double)> on_epoch;
};

// Text-only training. Each example: prompt from the caption's own nouns,
// retrieved rows from image-like retrieval over the corpus, T_e = T_i + eps
// with eps ~ N(0, sigma_train^2). The returned model is rounded to float32 so
// it equals what a checkpoint stores.
ModelCheckpoint train(const EmbeddingMatrix& corpus_embeddings, const std::vector<std::string>& corpus_texts,
                      const PipelineConfig& cfg, const TrainingOptions& options = {});

// Builds the per-example inputs train() uses (prompt/caption tokens, no noise).
FusionExample training_example(std::span<const double> text_embedding, const std::string& caption,
                               const std::vector<Vector>& retrieved, const Vocabulary& vocab,
                               const NounTagger& tagger);

struct InferenceResult {
  std::string caption;
  std::vector<TokenId> tokens;
  EntityList entities;
  std::string prompt;
  std::vector<std::size_t> pool;  // corpus ids of the captions used for filtering
};

// Filters entities over `pool_captions`, builds the hard prompt and decodes
// from the prefix of (query, retrieved rows).
InferenceResult caption_from_retrieval(const ModelCheckpoint& ckpt, std::span<const double> query,
                                       const std::vector<Vector>& retrieved,
                                       const std::vector<std::string>& pool_captions, const InferenceConfig& cfg,
                                       const NounTagger& tagger = NounTagger::default_english());

InferenceResult describe_image(std::span<const double> image_embedding, const ModelCheckpoint& ckpt,
                               const Index& index, const InferenceConfig& cfg,
                               const NounTagger& tagger = NounTagger::default_english());
std::string infer_image(std::span<const double> image_embedding, const ModelCheckpoint& ckpt, const Index& index,
                        const InferenceConfig& cfg, const NounTagger& tagger = NounTagger::default_english());

// Averages the frames into the query, retrieves sentences_per_frame captions
// per frame, fuses one averaged retrieved row per frame and filters entities
// over the union of retrieved captions. Throws ConfigError on no frames.
InferenceResult describe_video(const std::vector<Vector>& frames, const ModelCheckpoint& ckpt, const Index& index,
                               const InferenceConfig& cfg, const NounTagger& tagger = NounTagger::default_english());
std::string infer_video(const std::vector<Vector>& frames, const ModelCheckpoint& ckpt, const Index& index,
                        const InferenceConfig& cfg, const NounTagger& tagger = NounTagger::default_english());

}  // namespace retrocap
