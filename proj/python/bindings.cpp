#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "retrocap/cli.hpp"
#include "retrocap/errors.hpp"
#include "retrocap/eval_metrics.hpp"
#include "retrocap/pipeline.hpp"
#include "retrocap/toy_corpus.hpp"

#include <sstream>

namespace py = pybind11;
using namespace retrocap;

namespace {

EmbeddingMatrix matrix_from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) throw DimensionError("need at least one row");
  return EmbeddingMatrix::from_rows(rows.front().size(), rows);
}

std::vector<Vector> matrix_rows(const EmbeddingMatrix& m) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < m.count(); ++i) out.push_back(m.row_as_vector(i));
  return out;
}

}  // namespace

PYBIND11_MODULE(_retrocap, m) {
  m.doc() = "Retrieval-augmented, text-only-trained captioning";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<NormalizationError>(m, "NormalizationError", base.ptr());
  py::register_exception<IndexBuildError>(m, "IndexBuildError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<FilterError>(m, "FilterError", base.ptr());
  py::register_exception<LengthError>(m, "LengthError", base.ptr());
  py::register_exception<VocabError>(m, "VocabError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());
  py::register_exception<NumericsError>(m, "NumericsError", base.ptr());

  m.def("normalize", [](const Vector& v) { return normalize(v); });
  m.def("hash_embed", &hash_embed, py::arg("text"), py::arg("dim"), py::arg("seed") = 0);
  m.def("toy_captions", &toy_captions);

  py::class_<Hit>(m, "Hit").def_readonly("index", &Hit::index).def_readonly("score", &Hit::score);

  py::class_<Index>(m, "Index")
      .def(py::init([](const std::vector<Vector>& rows, std::vector<std::string> captions) {
             return build_index(matrix_from_rows(rows), std::move(captions));
           }),
           py::arg("rows"), py::arg("captions"))
      .def_static("load", [](const std::filesystem::path& emb, const std::filesystem::path& corpus) {
        return build_index(load_embeddings(emb), load_captions(corpus));
      })
      .def_property_readonly("dim", &Index::dim)
      .def("__len__", &Index::count)
      .def("caption", &Index::caption)
      .def("rows", [](const Index& idx) { return matrix_rows(idx.embeddings()); })
      .def("top_k", [](const Index& idx, const Vector& q, std::size_t k) { return idx.top_k(q, k).hits; },
           py::arg("query"), py::arg("k"))
      .def("top_k_batch",
           [](const Index& idx, const std::vector<Vector>& qs, std::size_t k, unsigned threads) {
             std::vector<std::vector<Hit>> out;
             for (auto& r : idx.top_k_batch(qs, k, threads)) out.push_back(std::move(r.hits));
             return out;
           },
           py::arg("queries"), py::arg("k"), py::arg("threads") = 0);

  m.def("save_embeddings", [](const std::filesystem::path& p, const std::vector<Vector>& rows) {
    save_embeddings(p, matrix_from_rows(rows));
  });
  m.def("load_embeddings", [](const std::filesystem::path& p) { return matrix_rows(load_embeddings(p)); });

  m.def("inject_noise", [](const Vector& v, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    return inject_noise(v, sigma, rng);
  }, py::arg("v"), py::arg("sigma_r"), py::arg("seed"));
  m.def("image_like_retrieve",
        [](const Index& idx, const Vector& v, double sigma, std::size_t k, std::uint64_t seed, const std::string& mode) {
          IlrConfig cfg{sigma, k, seed, parse_injection_mode(mode)};
          Rng rng(seed);
          return image_like_retrieve(idx, v, cfg, rng).hits.hits;
        },
        py::arg("index"), py::arg("text_embedding"), py::arg("sigma_r"), py::arg("k"), py::arg("seed"),
        py::arg("mode") = "pre");
  m.def("aggregate_queries", &aggregate_queries);
  m.def("overlap_sweep",
        [](std::size_t n, std::size_t d, double offset, double noise, const std::vector<double>& sigmas,
           std::size_t k, std::size_t queries, std::uint64_t seed) {
          const auto corpus = synth_paired_corpus(n, d, offset, noise, seed);
          const auto report = overlap_sweep(corpus, sigmas, k, queries, seed);
          std::vector<std::tuple<double, double, double>> out;
          for (const auto& p : report.points) out.emplace_back(p.sigma_r, p.overlap_ilr, p.overlap_t2t);
          return out;
        });

  m.def("extract_nouns", [](const std::string& caption) {
    return extract_nouns(caption, NounTagger::default_english());
  });
  m.def("filter_entities",
        [](const std::vector<std::string>& captions, const std::string& mode, std::size_t tau,
           const std::string& distribution, int n_sigma) {
          ThresholdSpec spec{parse_threshold_mode(mode), tau, parse_distribution(distribution), n_sigma};
          spec.validate();
          return filter_entities(count_frequencies(captions, NounTagger::default_english()), spec);
        },
        py::arg("captions"), py::arg("mode") = "heuristic", py::arg("tau") = 5, py::arg("distribution") = "normal",
        py::arg("n_sigma") = 1);
  m.def("build_hard_prompt", &build_hard_prompt);

  m.def("bleu", [](const std::vector<std::string>& cands, const std::vector<std::vector<std::string>>& refs, int n) {
    if (cands.size() != refs.size()) throw MetricError("candidates and references differ in length");
    EvalSet set;
    for (std::size_t i = 0; i < cands.size(); ++i) set.push_back({cands[i], refs[i]});
    return bleu(set, n);
  }, py::arg("candidates"), py::arg("references"), py::arg("n") = 4);
  m.def("cider", [](const std::vector<std::string>& cands, const std::vector<std::vector<std::string>>& refs) {
    if (cands.size() != refs.size()) throw MetricError("candidates and references differ in length");
    EvalSet set;
    for (std::size_t i = 0; i < cands.size(); ++i) set.push_back({cands[i], refs[i]});
    return cider(set).score;
  });

  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def_static("preset", &preset_config)
      .def("set", [](PipelineConfig& c, const std::string& k, const std::string& v) { set_config_value(c, k, v); })
      .def("validate", &PipelineConfig::validate)
      .def("__str__", [](const PipelineConfig& c) {
        std::ostringstream out;
        write_config(out, c);
        return out.str();
      });

  py::class_<ModelCheckpoint>(m, "Checkpoint")
      .def_readonly("epoch_losses", &ModelCheckpoint::epoch_losses)
      .def_property_readonly("parameter_count", [](const ModelCheckpoint& c) { return c.model.parameter_count(); })
      .def("save", [](const ModelCheckpoint& c, const std::filesystem::path& p) { save_checkpoint(p, c); })
      .def_static("load", &load_checkpoint)
      .def("to_bytes", [](const ModelCheckpoint& c) {
        std::ostringstream out;
        write_checkpoint(out, c);
        return py::bytes(out.str());
      });

  m.def("train",
        [](const std::vector<Vector>& rows, const std::vector<std::string>& texts, const PipelineConfig& cfg) {
          py::gil_scoped_release release;
          return train(matrix_from_rows(rows), texts, cfg);
        },
        py::arg("embeddings"), py::arg("texts"), py::arg("config"));
  m.def("infer_image",
        [](const Vector& image, const ModelCheckpoint& ckpt, const Index& index, const PipelineConfig& cfg) {
          const auto r = describe_image(image, ckpt, index, cfg.inference());
          return py::make_tuple(r.caption, r.prompt, r.entities);
        });
  m.def("infer_video", [](const std::vector<Vector>& frames, const ModelCheckpoint& ckpt, const Index& index,
                          const PipelineConfig& cfg) { return infer_video(frames, ckpt, index, cfg.inference()); });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "retrocap");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
