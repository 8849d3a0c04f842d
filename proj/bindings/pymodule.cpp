#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "xlslm/analysis.hpp"
#include "xlslm/corpus.hpp"
#include "xlslm/errors.hpp"
#include "xlslm/eval.hpp"
#include "xlslm/expconfig.hpp"
#include "xlslm/interleave.hpp"
#include "xlslm/model.hpp"
#include "xlslm/rundir.hpp"
#include "xlslm/synthlang.hpp"
#include "xlslm/train.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json to_json(const py::object& obj) {
  py::module_ js = py::module_::import("json");
  return json::parse(js.attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const json& j) {
  py::module_ js = py::module_::import("json");
  return js.attr("loads")(j.dump());
}

json resolve_dict(const py::object& config) {
  json cfg = xlslm::default_config();
  if (!config.is_none()) {
    json overlay = to_json(config);
    // nested merge mirrors the CLI config layering
    std::function<void(json&, const json&)> merge = [&](json& base,
                                                        const json& over) {
      if (!over.is_object() || !base.is_object()) {
        base = over;
        return;
      }
      for (const auto& [k, v] : over.items()) {
        if (base.contains(k) && base[k].is_object() && v.is_object()) {
          merge(base[k], v);
        } else {
          base[k] = v;
        }
      }
    };
    merge(cfg, overlay);
  }
  return cfg;
}

py::array_t<float> matrix_to_numpy(const xlslm::MatrixX<float>& m) {
  py::array_t<float> out({static_cast<py::ssize_t>(m.rows()),
                          static_cast<py::ssize_t>(m.cols())});
  std::memcpy(out.mutable_data(), m.data(), sizeof(float) * m.size());
  return out;
}

xlslm::ModelConfig model_config_from_dict(const py::object& config) {
  const json cfg = resolve_dict(config);
  xlslm::ModelConfig mc = xlslm::model_config_from(cfg);
  if (cfg.contains("model") && cfg["model"].contains("vocab_size")) {
    mc.vocab_size = cfg["model"]["vocab_size"].get<int>();
  }
  return mc;
}

json benchmark_to_json(const xlslm::BenchmarkResult& result) {
  json conditions = json::array();
  for (const auto& [key, bucket] : result.conditions) {
    conditions.push_back({{"kind", xlslm::to_string(key.kind)},
                          {"prompt_lang", key.prompt_lang},
                          {"ending_lang", key.ending_lang},
                          {"count", bucket.count},
                          {"correct", bucket.correct},
                          {"ties", bucket.ties},
                          {"accuracy", bucket.accuracy}});
  }
  return json{{"conditions", conditions},
              {"skipped_overlong", result.skipped_overlong}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cross-lingual interleaving for unit language models";

  py::register_exception<xlslm::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<xlslm::DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<xlslm::NumericError>(m, "NumericError",
                                              PyExc_FloatingPointError);

  m.def("default_config", [] { return to_py(xlslm::default_config()); });

  py::class_<xlslm::Corpus>(m, "Corpus")
      .def_static("load",
                  [](const std::string& dir) { return xlslm::load_corpus(dir); })
      .def_property_readonly("languages",
                             [](const xlslm::Corpus& c) { return c.languages; })
      .def_property_readonly(
          "vocab_size",
          [](const xlslm::Corpus& c) { return c.vocab.effective_size(); })
      .def_property_readonly("alignment_pair_count",
                             [](const xlslm::Corpus& c) {
                               return c.alignment_pairs.size();
                             })
      .def("stats",
           [](const xlslm::Corpus& c) {
             json out;
             for (const auto& [lang, s] : xlslm::corpus_stats(c)) {
               out[lang] = {{"stories", s.story_count},
                            {"sentences", s.sentence_count},
                            {"tokens", s.token_count},
                            {"min_sentence_len", s.min_sentence_len},
                            {"avg_sentence_len", s.avg_sentence_len},
                            {"max_sentence_len", s.max_sentence_len}};
             }
             return to_py(out);
           })
      .def("story_tokens",
           [](const xlslm::Corpus& c, const std::string& story_id,
              const std::string& lang) {
             return xlslm::monolingual_sequence(
                        c.story_at(c.story_index(story_id, lang)))
                 .tokens;
           })
      .def("interleave_tokens",
           [](const xlslm::Corpus& c, const std::string& story_id,
              const std::string& leading_lang) {
             for (const auto& pair : c.alignment_pairs) {
               if (c.story_at(pair.l1_index).story_id == story_id) {
                 return xlslm::interleave_pair(c, pair, leading_lang).tokens;
               }
             }
             throw xlslm::DataError("no alignment pair for story " + story_id);
           });

  py::class_<xlslm::ModelParams>(m, "Model")
      .def(py::init([](const py::object& config) {
             return xlslm::init_params<float>(model_config_from_dict(config));
           }),
           py::arg("config") = py::none())
      .def_static("load",
                  [](const std::string& path) {
                    return xlslm::load_checkpoint(path);
                  })
      .def("save",
           [](const xlslm::ModelParams& p, const std::string& path,
              std::uint64_t seed) { xlslm::save_checkpoint(p, path, seed); },
           py::arg("path"), py::arg("seed") = 0)
      .def_property_readonly("parameter_count",
                             &xlslm::ModelParams::parameter_count)
      .def_property_readonly("config",
                             [](const xlslm::ModelParams& p) {
                               json cfg;
                               cfg["vocab_size"] = p.config.vocab_size;
                               cfg["embed_dim"] = p.config.embed_dim;
                               cfg["layers"] = p.config.layers;
                               cfg["heads"] = p.config.heads;
                               cfg["ff_mult"] = p.config.ff_mult;
                               cfg["context_len"] = p.config.context_len;
                               cfg["init_seed"] = p.config.init_seed;
                               return to_py(cfg);
                             })
      .def("forward_logits",
           [](const xlslm::ModelParams& p, const std::vector<xlslm::TokenId>& t) {
             return matrix_to_numpy(xlslm::forward<float>(p, t).logits);
           })
      .def("hidden_states",
           [](const xlslm::ModelParams& p, const std::vector<xlslm::TokenId>& t) {
             auto trace = xlslm::forward<float>(p, t);
             py::list out;
             for (const auto& h : trace.hidden) out.append(matrix_to_numpy(h));
             return out;
           })
      .def("nll",
           [](const xlslm::ModelParams& p, const std::vector<xlslm::TokenId>& t) {
             if (t.size() < 2) throw xlslm::DataError("need at least 2 tokens");
             auto trace = xlslm::forward<float>(
                 p, std::span<const xlslm::TokenId>(t.data(), t.size() - 1));
             std::vector<xlslm::TokenId> targets(t.begin() + 1, t.end());
             auto r = xlslm::nll<float>(trace.logits, targets);
             return py::dict(py::arg("sum") = r.sum, py::arg("mean") = r.mean,
                             py::arg("count") = r.count);
           })
      .def("sequence_logprob",
           [](const xlslm::ModelParams& p,
              const std::vector<xlslm::TokenId>& prompt,
              const std::vector<xlslm::TokenId>& continuation, bool normalize) {
             return xlslm::sequence_logprob<float>(p, prompt, continuation,
                                                   normalize);
           },
           py::arg("prompt"), py::arg("continuation"),
           py::arg("normalize") = false);

  m.def(
      "synth_corpus",
      [](const py::object& config, const std::string& out_dir) {
        const json cfg = resolve_dict(config);
        xlslm::SynthLanguage lang(xlslm::synth_config_from(cfg));
        const xlslm::Corpus corpus = lang.generate_parallel_corpus();
        xlslm::save_corpus(corpus, out_dir);
        const int cloze = cfg["synth"].value("cloze_items", 0);
        const int pairs = cfg["synth"].value("pair_items", 0);
        std::vector<xlslm::EvalItem> items;
        if (cloze > 0) {
          for (auto kind : {xlslm::ItemKind::topic, xlslm::ItemKind::story}) {
            auto part = lang.generate_cloze(kind, cloze);
            items.insert(items.end(), part.begin(), part.end());
          }
        }
        if (pairs > 0) {
          for (auto kind : {xlslm::ItemKind::syntax, xlslm::ItemKind::lexical}) {
            auto part = lang.generate_minimal_pairs(kind, pairs);
            items.insert(items.end(), part.begin(), part.end());
          }
        }
        if (!items.empty()) {
          xlslm::save_items(items,
                            std::filesystem::path(out_dir) / "items.jsonl");
        }
        json out;
        for (const auto& [l, s] : corpus_stats(corpus)) {
          out[l] = {{"stories", s.story_count},
                    {"sentences", s.sentence_count},
                    {"tokens", s.token_count}};
        }
        return to_py(out);
      },
      py::arg("config") = py::none(), py::arg("out_dir"));

  m.def(
      "train",
      [](const py::object& config, const std::string& out_dir) {
        const json cfg = resolve_dict(config);
        const xlslm::Corpus corpus =
            xlslm::load_corpus(cfg.at("data").at("corpus_dir").get<std::string>());
        xlslm::ModelConfig mc = xlslm::model_config_from(cfg);
        mc.vocab_size = corpus.vocab.effective_size();
        auto run = xlslm::RunDirectory::create(out_dir, cfg);
        const auto results = xlslm::run_pipeline(
            xlslm::arms_from(cfg), mc, xlslm::optim_config_from(cfg),
            xlslm::train_options_from(cfg), corpus, run.path());
        json arms = json::array();
        for (const auto& r : results) {
          arms.push_back({{"name", r.name},
                          {"checkpoint", r.checkpoint.string()},
                          {"declared_tokens", r.declared_tokens},
                          {"consumed_tokens", r.ledger.grand_total()},
                          {"final_loss_mean", r.final_loss_mean}});
        }
        json summary;
        summary["arms"] = arms;
        summary["fingerprint"] = xlslm::build_fingerprint();
        run.write_summary(summary);
        return to_py(summary);
      },
      py::arg("config") = py::none(), py::arg("out_dir"));

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& items_path,
         bool normalize, bool strict_ties) {
        const auto params = xlslm::load_checkpoint(checkpoint);
        const auto items = xlslm::load_items(items_path);
        xlslm::ScoreOptions opts;
        opts.normalize_by_length = normalize;
        opts.strict_ties = strict_ties;
        return to_py(benchmark_to_json(xlslm::run_benchmark(params, items, opts)));
      },
      py::arg("checkpoint"), py::arg("items"), py::arg("normalize") = false,
      py::arg("strict_ties") = false);

  m.def(
      "alignment",
      [](const std::string& checkpoint, const std::string& corpus_dir,
         int sample_n, std::uint64_t seed) {
        const auto params = xlslm::load_checkpoint(checkpoint);
        const auto corpus = xlslm::load_corpus(corpus_dir);
        const auto report =
            xlslm::alignment_score(params, corpus, sample_n, seed);
        return to_py(json{{"per_layer", report.per_layer},
                          {"overall", report.overall},
                          {"pairs", report.pair_count},
                          {"pooling", report.pooling}});
      },
      py::arg("checkpoint"), py::arg("corpus_dir"), py::arg("sample_n") = 1000,
      py::arg("seed") = 0);

  m.def(
      "pack_rows",
      [](const std::vector<std::vector<xlslm::TokenId>>& sequences,
         int context_len) {
        std::vector<xlslm::TrainSequence> stream;
        for (const auto& tokens : sequences) {
          xlslm::TrainSequence seq;
          seq.tokens = tokens;
          seq.spans.push_back({"seq", "x", 1, 0, tokens.size()});
          stream.push_back(std::move(seq));
        }
        const auto batch = xlslm::pack(stream, context_len);
        py::list rows;
        for (const auto& row : batch.rows) rows.append(row.tokens);
        return py::make_tuple(rows, batch.carryover);
      },
      py::arg("sequences"), py::arg("context_len"));

  m.def("lr_at",
        [](std::int64_t step, std::int64_t total, double peak_lr,
           double warmup_frac) {
          xlslm::OptimConfig opt;
          opt.peak_lr = peak_lr;
          opt.warmup_frac = warmup_frac;
          return xlslm::lr_at(step, total, opt);
        },
        py::arg("step"), py::arg("total"), py::arg("peak_lr") = 5e-4,
        py::arg("warmup_frac") = 0.05);
}
