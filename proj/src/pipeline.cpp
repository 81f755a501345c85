#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "retrocap/errors.hpp"
#include "retrocap/pipeline.hpp"
#include "retrocap/tokenize.hpp"

namespace retrocap {

namespace {

// Words of both prompt templates, so prompts never hit the unknown token.
const std::vector<std::string> kPromptWords = {"there are in the image", "there is nothing in the image"};

Vector mean_rows(const std::vector<Vector>& rows) {
  Vector out(rows.front().size(), 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i];
  }
  for (double& x : out) x /= static_cast<double>(rows.size());
  return out;
}

std::vector<std::size_t> sample_frames(std::size_t available, std::size_t wanted) {
  std::vector<std::size_t> out;
  if (available <= wanted) {
    out.resize(available);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  for (std::size_t i = 0; i < wanted; ++i) out.push_back(i * available / wanted);
  return out;
}

}  // namespace

FusionExample training_example(std::span<const double> text_embedding, const std::string& caption,
                               const std::vector<Vector>& retrieved, const Vocabulary& vocab,
                               const NounTagger& tagger) {
  FusionExample ex;
  ex.text_embedding.assign(text_embedding.begin(), text_embedding.end());
  ex.retrieved = retrieved;
  ex.prompt = vocab.encode(build_hard_prompt(extract_nouns(caption, tagger)));
  ex.caption = vocab.encode(caption);
  ex.caption.push_back(Vocabulary::kEnd);
  return ex;
}

ModelCheckpoint train(const EmbeddingMatrix& corpus_embeddings, const std::vector<std::string>& corpus_texts,
                      const PipelineConfig& cfg, const TrainingOptions& options) {
  cfg.validate();
  if (corpus_texts.empty()) throw IndexBuildError("training corpus is empty");
  const Index index(corpus_embeddings, corpus_texts);

  std::vector<std::string> vocab_texts = corpus_texts;
  vocab_texts.insert(vocab_texts.end(), kPromptWords.begin(), kPromptWords.end());
  Vocabulary vocab = Vocabulary::build(vocab_texts);

  FusionDims dims = cfg.dims;
  dims.d = corpus_embeddings.dim();
  dims.k = cfg.ilr.k;
  dims.vocab_size = vocab.size();
  dims.validate();

  // Token ids and prompts do not depend on the noise, so they are fixed up front.
  const std::size_t n = corpus_texts.size();
  std::vector<FusionExample> templates(n);
  for (std::size_t i = 0; i < n; ++i) {
    templates[i] = training_example({}, corpus_texts[i], {}, vocab, options.tagger);
    const std::size_t length = dims.q + templates[i].prompt.size() + templates[i].caption.size() - 1;
    if (length > dims.max_len) {
      throw LengthError("caption " + std::to_string(i) + " needs " + std::to_string(length) +
                        " decoder positions, max_len is " + std::to_string(dims.max_len));
    }
  }

  FusionModel model(dims, cfg.seed);
  AdamWState state;
  state.config.weight_decay = cfg.weight_decay;
  Rng shuffle_rng(cfg.seed);
  Rng noise_rng(cfg.ilr.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> epoch_losses;
  long step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      TrainingBatch batch;
      batch.reserve(stop - start);
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t id = order[j];
        const Vector t_i = corpus_embeddings.row_as_vector(id);
        IlrResult ilr = image_like_retrieve(index, t_i, cfg.ilr, noise_rng);
        FusionExample ex = templates[id];
        ex.retrieved = std::move(ilr.retrieved_embeddings);
        ex.text_embedding = inject_noise(t_i, cfg.sigma_train, noise_rng);
        batch.push_back(std::move(ex));
      }
      total += train_step(model, batch, state, cfg.lr, step++);
      ++batches;
    }
    epoch_losses.push_back(total / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, epoch_losses.back());
  }

  model.round_to_float32();
  PipelineConfig snapshot = cfg;
  snapshot.dims = dims;
  return ModelCheckpoint{std::move(model), std::move(vocab), snapshot, std::move(epoch_losses)};
}

InferenceResult caption_from_retrieval(const ModelCheckpoint& ckpt, std::span<const double> query,
                                       const std::vector<Vector>& retrieved,
                                       const std::vector<std::string>& pool_captions, const InferenceConfig& cfg,
                                       const NounTagger& tagger) {
  InferenceResult out;
  const FrequencyTable table = count_frequencies(pool_captions, tagger);
  out.entities = filter_entities(table, cfg.threshold);
  out.prompt = build_hard_prompt(out.entities);
  const auto prompt_ids = ckpt.vocab.encode(out.prompt);
  const nn::Matrix prefix = compute_prefix(ckpt.model, query, retrieved);
  out.tokens = generate(ckpt.model, prefix, prompt_ids, cfg.decode);
  out.caption = ckpt.vocab.decode(out.tokens);
  return out;
}

InferenceResult describe_image(std::span<const double> image_embedding, const ModelCheckpoint& ckpt,
                               const Index& index, const InferenceConfig& cfg, const NounTagger& tagger) {
  cfg.validate();
  if (image_embedding.size() != ckpt.model.dims().d) {
    throw DimensionError("image embedding has dimension " + std::to_string(image_embedding.size()) +
                         ", model expects " + std::to_string(ckpt.model.dims().d));
  }
  const RetrievalResult hits = index.top_k(image_embedding, cfg.l);
  const std::size_t fused = cfg.fusion_source == FusionSource::top_k ? std::min(cfg.k, hits.size()) : hits.size();
  std::vector<Vector> retrieved;
  std::vector<std::string> pool;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t id = hits.hits[i].index;
    if (i < fused) retrieved.push_back(index.embeddings().row_as_vector(id));
    pool.push_back(index.caption(id));
    ids.push_back(id);
  }
  InferenceResult out = caption_from_retrieval(ckpt, image_embedding, retrieved, pool, cfg, tagger);
  out.pool = std::move(ids);
  return out;
}

std::string infer_image(std::span<const double> image_embedding, const ModelCheckpoint& ckpt, const Index& index,
                        const InferenceConfig& cfg, const NounTagger& tagger) {
  return describe_image(image_embedding, ckpt, index, cfg, tagger).caption;
}

InferenceResult describe_video(const std::vector<Vector>& frames, const ModelCheckpoint& ckpt, const Index& index,
                               const InferenceConfig& cfg, const NounTagger& tagger) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("video has no frames");
  std::vector<Vector> sampled;
  for (std::size_t i : sample_frames(frames.size(), cfg.frames_per_video)) sampled.push_back(frames[i]);
  const Vector query = aggregate_queries(sampled);
  if (query.size() != ckpt.model.dims().d) {
    throw DimensionError("frame embeddings have dimension " + std::to_string(query.size()) + ", model expects " +
                         std::to_string(ckpt.model.dims().d));
  }

  std::vector<Vector> retrieved;
  std::vector<std::string> pool;
  std::vector<std::size_t> ids;
  std::unordered_set<std::size_t> seen;
  for (const auto& frame : sampled) {
    const RetrievalResult hits = index.top_k(frame, cfg.sentences_per_frame);
    if (hits.empty()) continue;
    std::vector<Vector> rows;
    for (const auto& h : hits.hits) {
      rows.push_back(index.embeddings().row_as_vector(h.index));
      if (seen.insert(h.index).second) {
        ids.push_back(h.index);
        pool.push_back(index.caption(h.index));
      }
    }
    retrieved.push_back(mean_rows(rows));
  }
  InferenceResult out = caption_from_retrieval(ckpt, query, retrieved, pool, cfg, tagger);
  out.pool = std::move(ids);
  return out;
}

std::string infer_video(const std::vector<Vector>& frames, const ModelCheckpoint& ckpt, const Index& index,
                        const InferenceConfig& cfg, const NounTagger& tagger) {
  return describe_video(frames, ckpt, index, cfg, tagger).caption;
}

}  // namespace retrocap
