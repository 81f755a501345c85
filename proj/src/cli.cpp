#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "retrocap/cli.hpp"
#include "retrocap/errors.hpp"
#include "retrocap/eval_metrics.hpp"
#include "retrocap/pipeline.hpp"
#include "retrocap/text_format.hpp"
#include "retrocap/toy_corpus.hpp"

namespace retrocap {

namespace {

struct ConfigFlags {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Config file of 'key = value' lines")->check(CLI::ExistingFile);
  cmd->add_option("--preset", flags.preset, "Dataset preset: coco, flickr30k, nocaps, msvd, msrvtt");
  cmd->add_option("--set", flags.overrides, "Override a config key, as key=value (repeatable)");
}

// Preset, then config file, then --set overrides: later sources win.
PipelineConfig resolve_config(const ConfigFlags& flags, const PipelineConfig& base = {}) {
  PipelineConfig cfg = flags.preset.empty() ? base : preset_config(flags.preset);
  if (!flags.config_path.empty()) cfg = load_config(flags.config_path, cfg);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

Index open_index(const std::string& embeddings, const std::string& corpus) {
  return build_index(load_embeddings(embeddings), load_captions(corpus));
}

std::vector<Vector> load_rows(const std::string& path) {
  const EmbeddingMatrix m = load_embeddings(path);
  std::vector<Vector> rows;
  rows.reserve(m.count());
  for (std::size_t i = 0; i < m.count(); ++i) rows.push_back(m.row_as_vector(i));
  return rows;
}

NounTagger make_tagger(const std::string& lexicon, bool rule_based) {
  if (rule_based) return NounTagger::rule_based();
  if (!lexicon.empty()) return NounTagger::from_lexicon_file(lexicon);
  return NounTagger::default_english();
}

std::vector<std::string> read_lines(std::istream& in) { return read_captions(in); }

// Output file if given, otherwise the data stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw FormatError("cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

void report_entity_precision(std::ostream& out, const std::vector<std::vector<std::string>>& pools,
                             const std::vector<std::vector<std::string>>& truths, std::size_t l,
                             const NounTagger& tagger) {
  auto evaluate = [&](const ThresholdSpec& spec) {
    EntityPrecision sum;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      const auto entities = filter_entities(count_frequencies(pools[i], tagger), spec);
      const auto p = entity_precision(entities, truths[i], tagger);
      sum.correct += p.correct;
      sum.total += p.total;
    }
    sum.precision = sum.total == 0 ? 0.0 : static_cast<double>(sum.correct) / static_cast<double>(sum.total);
    return sum;
  };
  for (std::size_t tau = 1; tau <= l; ++tau) {
    ThresholdSpec spec;
    spec.tau = tau;
    const auto p = evaluate(spec);
    out << "entity_precision mode=heuristic tau=" << tau << " precision=" << format_fixed(p.precision)
        << " correct=" << p.correct << " total=" << p.total << '\n';
  }
  for (auto dist : {FrequencyDistribution::normal, FrequencyDistribution::lognormal}) {
    for (int n_sigma : {0, 1, 2}) {
      ThresholdSpec spec;
      spec.mode = ThresholdMode::adaptive;
      spec.distribution = dist;
      spec.n_sigma = n_sigma;
      const auto p = evaluate(spec);
      out << "entity_precision mode=adaptive distribution=" << to_string(dist) << " n_sigma=" << n_sigma
          << " precision=" << format_fixed(p.precision) << " correct=" << p.correct << " total=" << p.total << '\n';
    }
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented caption generation trained on text only", "retrocap"};
  app.require_subcommand(1);

  // build-index
  std::string embeddings_path, corpus_path, out_path;
  auto* build_cmd = app.add_subcommand("build-index", "Validate an embedding file against its captions");
  build_cmd->add_option("--embeddings", embeddings_path, "IFCE embedding file")->required();
  build_cmd->add_option("--corpus", corpus_path, "Caption file, one per line")->required();
  build_cmd->add_option("--out", out_path, "Write the validated, unit-normalized embeddings here");

  // retrieve
  std::string index_emb, index_corpus, query_emb;
  std::size_t k = 5;
  unsigned threads = 0;
  double sigma_r = 0.0;
  std::string injection = "pre";
  std::optional<std::uint64_t> seed;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Top-k cosine retrieval for each query row");
  retrieve_cmd->add_option("--index-embeddings", index_emb, "IFCE file of the corpus")->required();
  retrieve_cmd->add_option("--index-corpus", index_corpus, "Corpus captions")->required();
  retrieve_cmd->add_option("--query-embeddings", query_emb, "IFCE file of queries")->required();
  retrieve_cmd->add_option("--k", k, "Hits per query")->capture_default_str();
  retrieve_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");
  retrieve_cmd->add_option("--sigma-r", sigma_r, "Noise scale for image-like retrieval (0 = plain)");
  retrieve_cmd->add_option("--injection-mode", injection, "pre, post, both or none")->capture_default_str();
  retrieve_cmd->add_option("--seed", seed, "Noise seed, required when --sigma-r > 0");
  retrieve_cmd->add_option("--out", out_path, "Output file (default: stdout)");

  // filter-entities
  std::string in_path, lexicon_path;
  bool rule_based = false;
  std::string mode = "heuristic", distribution = "normal";
  std::size_t tau = 5;
  int n_sigma = 1;
  auto* filter_cmd = app.add_subcommand("filter-entities", "Frequency-filtered entities and hard prompt");
  filter_cmd->add_option("--in", in_path, "Caption file (default: stdin)");
  filter_cmd->add_option("--mode", mode, "heuristic or adaptive")->capture_default_str();
  filter_cmd->add_option("--tau", tau, "Heuristic threshold")->capture_default_str();
  filter_cmd->add_option("--distribution", distribution, "normal or lognormal")->capture_default_str();
  filter_cmd->add_option("--n-sigma", n_sigma, "Adaptive threshold offset in std units")->capture_default_str();
  filter_cmd->add_option("--lexicon", lexicon_path, "Noun lexicon file, one lemma per line");
  filter_cmd->add_flag("--rule-based", rule_based, "Use the rule-based tagger instead of a lexicon");

  // train
  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Text-only training");
  train_cmd->add_option("--embeddings", embeddings_path, "IFCE file of the training captions")->required();
  train_cmd->add_option("--corpus", corpus_path, "Training captions")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint output path")->required();
  train_cmd->add_option("--seed", seed, "Seed for initialization, shuffling and noise")->required();
  train_cmd->add_option("--lexicon", lexicon_path, "Noun lexicon file");
  train_cmd->add_flag("--rule-based", rule_based, "Use the rule-based tagger");
  add_config_flags(train_cmd, train_flags);

  // infer
  ConfigFlags infer_flags;
  bool show_prompt = false;
  auto* infer_cmd = app.add_subcommand("infer", "Caption each query image embedding");
  infer_cmd->add_option("--ckpt", in_path, "Checkpoint")->required();
  infer_cmd->add_option("--index-embeddings", index_emb, "IFCE file of the retrieval corpus")->required();
  infer_cmd->add_option("--index-corpus", index_corpus, "Retrieval corpus captions")->required();
  infer_cmd->add_option("--query-embeddings", query_emb, "IFCE file of image embeddings")->required();
  infer_cmd->add_option("--out", out_path, "Output captions (default: stdout)");
  infer_cmd->add_flag("--show-prompt", show_prompt, "Print the hard prompt before each caption, tab separated");
  infer_cmd->add_option("--lexicon", lexicon_path, "Noun lexicon file");
  infer_cmd->add_flag("--rule-based", rule_based, "Use the rule-based tagger");
  add_config_flags(infer_cmd, infer_flags);

  // infer-video
  ConfigFlags video_flags;
  std::vector<std::string> video_paths;
  auto* video_cmd = app.add_subcommand("infer-video", "Caption videos given their frame embeddings");
  video_cmd->add_option("--ckpt", in_path, "Checkpoint")->required();
  video_cmd->add_option("--index-embeddings", index_emb, "IFCE file of the retrieval corpus")->required();
  video_cmd->add_option("--index-corpus", index_corpus, "Retrieval corpus captions")->required();
  video_cmd->add_option("--frames", video_paths, "IFCE file of one video's frames (repeatable)")->required();
  video_cmd->add_option("--out", out_path, "Output captions (default: stdout)");
  video_cmd->add_option("--lexicon", lexicon_path, "Noun lexicon file");
  video_cmd->add_flag("--rule-based", rule_based, "Use the rule-based tagger");
  add_config_flags(video_cmd, video_flags);

  // eval
  std::string candidates_path, references_path;
  auto* eval_cmd = app.add_subcommand("eval", "BLEU@4 and CIDEr-D");
  eval_cmd->add_option("--candidates", candidates_path, "Candidate captions, one per line")->required();
  eval_cmd->add_option("--references", references_path, "Tab-separated references, line-aligned")->required();

  // diagnose
  bool synthetic = false, entities_report = false;
  std::string sweep_spec;
  std::size_t n = 1000, dim = 64, queries = 200, l = 9;
  double offset = 0.5, image_noise = 0.04;
  std::string truth_path;
  auto* diag_cmd = app.add_subcommand("diagnose", "Retrieval-overlap sweep and entity-precision report");
  diag_cmd->add_flag("--synthetic", synthetic, "Use a synthetic paired corpus for the sweep");
  diag_cmd->add_option("--sweep", sweep_spec, "Noise grid lo:hi:step");
  diag_cmd->add_option("--seed", seed, "Seed for corpus synthesis and noise")->required();
  diag_cmd->add_option("--n", n, "Synthetic corpus size")->capture_default_str();
  diag_cmd->add_option("--dim", dim, "Synthetic embedding width")->capture_default_str();
  diag_cmd->add_option("--offset", offset, "Norm of the shared image offset")->capture_default_str();
  diag_cmd->add_option("--image-noise", image_noise, "Per-component image noise")->capture_default_str();
  diag_cmd->add_option("--queries", queries, "Queries averaged per sweep point")->capture_default_str();
  diag_cmd->add_option("--k", k, "Hits per query")->capture_default_str();
  diag_cmd->add_flag("--entities", entities_report, "Print the entity-precision report");
  diag_cmd->add_option("--l", l, "Captions retrieved for entity filtering")->capture_default_str();
  diag_cmd->add_option("--index-embeddings", index_emb, "Corpus embeddings for the entity report");
  diag_cmd->add_option("--index-corpus", index_corpus, "Corpus captions for the entity report");
  diag_cmd->add_option("--query-embeddings", query_emb, "Image embeddings for the entity report");
  diag_cmd->add_option("--ground-truth", truth_path, "Tab-separated ground-truth captions per query");
  diag_cmd->add_option("--lexicon", lexicon_path, "Noun lexicon file");
  diag_cmd->add_flag("--rule-based", rule_based, "Use the rule-based tagger");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Report unrecognized arguments ahead of missing required options.
    std::vector<const CLI::App*> scopes = {&app};
    for (const auto* sub : app.get_subcommands()) scopes.push_back(sub);
    for (const auto* scope : scopes) {
      const auto extras = scope->remaining();
      if (!extras.empty() && e.get_exit_code() != 0) {
        err << "unknown argument: " << extras.front() << '\n' << "Run with --help for more information.\n";
        return 1;
      }
    }
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (build_cmd->parsed()) {
      const Index index = open_index(embeddings_path, corpus_path);
      if (!out_path.empty()) save_embeddings(out_path, index.embeddings());
      out << "count=" << index.count() << " dim=" << index.dim() << '\n';
    } else if (retrieve_cmd->parsed()) {
      const Index index = open_index(index_emb, index_corpus);
      const auto rows = load_rows(query_emb);
      IlrConfig ilr{sigma_r, k, 0, parse_injection_mode(injection)};
      ilr.validate();
      const bool noisy = sigma_r > 0.0 && ilr.injection_mode != InjectionMode::none;
      if (noisy && !seed) throw ConfigError("--seed is required when --sigma-r > 0");
      std::vector<RetrievalResult> results;
      if (noisy) {
        ilr.seed = *seed;
        for (std::size_t q = 0; q < rows.size(); ++q) {
          Rng rng = derive_rng(*seed, q);
          results.push_back(image_like_retrieve(index, rows[q], ilr, rng).hits);
        }
      } else {
        results = index.top_k_batch(rows, k, threads);
      }
      Sink sink(out_path, out);
      for (std::size_t q = 0; q < results.size(); ++q) {
        for (std::size_t r = 0; r < results[q].size(); ++r) {
          const auto& h = results[q].hits[r];
          sink.get() << "query=" << q << " rank=" << r << " index=" << h.index << " score=" << format_real(h.score, 9)
                     << '\t' << index.caption(h.index) << '\n';
        }
      }
    } else if (filter_cmd->parsed()) {
      std::vector<std::string> captions;
      if (in_path.empty()) {
        captions = read_lines(std::cin);
      } else {
        captions = load_captions(in_path);
      }
      ThresholdSpec spec{parse_threshold_mode(mode), tau, parse_distribution(distribution), n_sigma};
      spec.validate();
      const auto tagger = make_tagger(lexicon_path, rule_based);
      const auto entities = filter_entities(count_frequencies(captions, tagger), spec);
      for (const auto& e : entities) out << e << '\n';
      out << build_hard_prompt(entities) << '\n';
    } else if (train_cmd->parsed()) {
      PipelineConfig cfg = resolve_config(train_flags);
      cfg.seed = *seed;
      cfg.ilr.seed = *seed;
      TrainingOptions options{make_tagger(lexicon_path, rule_based), [&](std::size_t epoch, double loss) {
                                out << "epoch=" << epoch << " loss=" << format_real(loss, 9) << '\n';
                              }};
      const auto ckpt = train(load_embeddings(embeddings_path), load_captions(corpus_path), cfg, options);
      save_checkpoint(out_path, ckpt);
    } else if (infer_cmd->parsed() || video_cmd->parsed()) {
      const bool video = video_cmd->parsed();
      const ModelCheckpoint ckpt = load_checkpoint(in_path);
      // The checkpoint's own settings are the base; explicit config sources override them.
      const ConfigFlags& flags = video ? video_flags : infer_flags;
      const PipelineConfig cfg = resolve_config(flags, ckpt.config);
      const InferenceConfig icfg = cfg.inference();
      const Index index = open_index(index_emb, index_corpus);
      const auto tagger = make_tagger(lexicon_path, rule_based);
      Sink sink(out_path, out);
      auto emit = [&](const InferenceResult& r) {
        if (show_prompt) sink.get() << r.prompt << '\t';
        sink.get() << r.caption << '\n';
      };
      if (video) {
        for (const auto& path : video_paths) emit(describe_video(load_rows(path), ckpt, index, icfg, tagger));
      } else {
        for (const auto& row : load_rows(query_emb)) emit(describe_image(row, ckpt, index, icfg, tagger));
      }
    } else if (eval_cmd->parsed()) {
      std::ifstream cands(candidates_path), refs(references_path);
      if (!cands) throw FormatError("cannot open " + candidates_path);
      if (!refs) throw FormatError("cannot open " + references_path);
      write_eval_report(out, read_eval_set(cands, refs));
    } else if (diag_cmd->parsed()) {
      if (!synthetic && !entities_report) throw ConfigError("diagnose needs --synthetic and/or --entities");
      if (synthetic) {
        const auto sigmas = parse_sweep(sweep_spec.empty() ? "0:0.1:0.01" : sweep_spec);
        const auto corpus = synth_paired_corpus(n, dim, offset, image_noise, *seed);
        write_sweep_report(out, overlap_sweep(corpus, sigmas, k, std::min(queries, n), *seed));
      }
      if (entities_report) {
        if (l == 0) throw ConfigError("--l must be at least 1");
        const auto tagger = make_tagger(lexicon_path, rule_based);
        std::vector<std::vector<std::string>> pools, truths;
        if (index_emb.empty()) {
          // Toy leave-one-out: each caption is the ground truth for its own
          // embedding, retrieved against the rest of the toy corpus.
          const auto& captions = toy_captions();
          const Index index = build_index(hash_embed_all(captions, dim, *seed), captions);
          for (std::size_t i = 0; i < captions.size(); ++i) {
            const auto hits = index.top_k(index.embeddings().row_as_vector(i), l + 1);
            std::vector<std::string> pool;
            for (const auto& h : hits.hits) {
              if (h.index != i && pool.size() < l) pool.push_back(captions[h.index]);
            }
            pools.push_back(std::move(pool));
            truths.push_back({captions[i]});
          }
        } else {
          if (query_emb.empty() || truth_path.empty() || index_corpus.empty()) {
            throw ConfigError("--entities with a corpus needs --index-corpus, --query-embeddings and --ground-truth");
          }
          const Index index = open_index(index_emb, index_corpus);
          const auto rows = load_rows(query_emb);
          const auto truth_lines = load_captions(truth_path);
          if (truth_lines.size() != rows.size()) throw FormatError("ground-truth lines do not match query rows");
          for (std::size_t q = 0; q < rows.size(); ++q) {
            std::vector<std::string> pool;
            for (const auto& h : index.top_k(rows[q], l).hits) pool.push_back(index.caption(h.index));
            pools.push_back(std::move(pool));
            std::vector<std::string> refs;
            std::stringstream line(truth_lines[q]);
            for (std::string ref; std::getline(line, ref, '\t');) refs.push_back(ref);
            truths.push_back(std::move(refs));
          }
        }
        report_entity_precision(out, pools, truths, l, tagger);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (const auto* num = dynamic_cast<const NumericsError*>(&e)) err << "batch_id=" << num->batch_id() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace retrocap
