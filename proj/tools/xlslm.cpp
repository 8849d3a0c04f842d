#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xlslm/analysis.hpp"
#include "xlslm/corpus.hpp"
#include "xlslm/errors.hpp"
#include "xlslm/eval.hpp"
#include "xlslm/expconfig.hpp"
#include "xlslm/model.hpp"
#include "xlslm/rundir.hpp"
#include "xlslm/synthlang.hpp"
#include "xlslm/train.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

json resolve(const GlobalOptions& g) {
  return xlslm::resolve_config(g.config, g.overrides, g.seed);
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int cmd_synth_corpus(const GlobalOptions& g, const fs::path& out_dir) {
  const json cfg = resolve(g);
  const xlslm::SynthConfig synth_cfg = xlslm::synth_config_from(cfg);
  xlslm::SynthLanguage lang(synth_cfg);

  const xlslm::Corpus corpus = lang.generate_parallel_corpus();
  xlslm::save_corpus(corpus, out_dir);

  const int cloze_items = cfg.at("synth").value("cloze_items", 1000);
  const int pair_items = cfg.at("synth").value("pair_items", 1000);
  std::vector<xlslm::EvalItem> items;
  for (auto kind : {xlslm::ItemKind::topic, xlslm::ItemKind::story}) {
    auto part = lang.generate_cloze(kind, cloze_items);
    items.insert(items.end(), part.begin(), part.end());
  }
  for (auto kind : {xlslm::ItemKind::syntax, xlslm::ItemKind::lexical}) {
    auto part = lang.generate_minimal_pairs(kind, pair_items);
    items.insert(items.end(), part.begin(), part.end());
  }
  xlslm::save_items(items, out_dir / "items.jsonl");

  std::cout << "wrote corpus to " << out_dir.string() << " ("
            << items.size() << " eval items)\n";
  std::cout << xlslm::render_stats(xlslm::corpus_stats(corpus));
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, const fs::path& out_dir) {
  const json cfg = resolve(g);
  const fs::path corpus_dir = cfg.at("data").at("corpus_dir").get<std::string>();
  const xlslm::Corpus corpus = xlslm::load_corpus(corpus_dir);

  xlslm::ModelConfig model_cfg = xlslm::model_config_from(cfg);
  model_cfg.vocab_size = corpus.vocab.effective_size();
  const xlslm::OptimConfig optim = xlslm::optim_config_from(cfg);
  const xlslm::TrainOptions opts = xlslm::train_options_from(cfg);
  const std::vector<xlslm::ArmConfig> arms = xlslm::arms_from(cfg);

  xlslm::RunDirectory run = xlslm::RunDirectory::create(out_dir, cfg);
  const std::string started = timestamp_utc();
  const auto results =
      xlslm::run_pipeline(arms, model_cfg, optim, opts, corpus, run.path());

  json summary;
  summary["started"] = started;
  summary["finished"] = timestamp_utc();
  summary["fingerprint"] = xlslm::build_fingerprint();
  summary["corpus_dir"] = corpus_dir.string();
  json arm_records = json::array();
  for (const auto& r : results) {
    json rec;
    rec["name"] = r.name;
    rec["checkpoint"] = r.checkpoint.string();
    rec["declared_tokens"] = r.declared_tokens;
    rec["consumed_tokens"] = r.ledger.grand_total();
    rec["final_loss_mean"] = r.final_loss_mean;
    arm_records.push_back(rec);
  }
  summary["arms"] = arm_records;
  run.write_summary(summary);

  for (const auto& r : results) {
    std::cout << "arm " << r.name << ": loss " << r.final_loss_mean
              << ", tokens " << r.ledger.grand_total() << " (declared "
              << r.declared_tokens << ")\n";
  }
  std::cout << "run directory: " << run.path().string() << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const fs::path& checkpoint,
             const fs::path& items_path, const fs::path& out_path) {
  const json cfg = resolve(g);
  const xlslm::ScoreOptions opts = xlslm::score_options_from(cfg);
  const xlslm::ModelParams params = xlslm::load_checkpoint(checkpoint);
  const std::vector<xlslm::EvalItem> items = xlslm::load_items(items_path);
  const xlslm::BenchmarkResult result =
      xlslm::run_benchmark(params, items, opts);
  xlslm::save_benchmark(result, out_path);
  std::cout << xlslm::render_matrix(result);
  return kExitOk;
}

int cmd_analyze(const GlobalOptions& g, const fs::path& checkpoint,
                const fs::path& corpus_dir, const fs::path& out_path,
                int sample_n) {
  const json cfg = resolve(g);
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  const int n = sample_n > 0 ? sample_n
                             : cfg.at("analysis").value("sample_n", 1000);
  const xlslm::ModelParams params = xlslm::load_checkpoint(checkpoint);
  const xlslm::Corpus corpus = xlslm::load_corpus(corpus_dir);
  const xlslm::AlignmentReport report =
      xlslm::alignment_score(params, corpus, n, seed);
  xlslm::save_alignment(report, out_path);
  std::cout << "alignment over " << report.pair_count << " sentence pairs ("
            << report.pooling << ")\n";
  for (std::size_t l = 0; l < report.per_layer.size(); ++l) {
    std::cout << "  layer " << l << ": " << report.per_layer[l] << "\n";
  }
  std::cout << "  overall: " << report.overall << "\n";
  return kExitOk;
}

int cmd_report(const fs::path& run_dir) {
  std::ifstream cfg_in(run_dir / "config.json");
  if (!cfg_in) {
    throw xlslm::DataError("no config snapshot in " + run_dir.string());
  }
  json cfg;
  cfg_in >> cfg;

  bool all_complete = true;
  for (const auto& arm_json : cfg.at("arms")) {
    const std::string name = arm_json.at("name").get<std::string>();
    const fs::path arm_dir = run_dir / "arms" / name;
    std::cout << "=== arm " << name << " ===\n";

    const bool trained = fs::exists(arm_dir / "final.xlsm") &&
                         fs::exists(arm_dir / "ledger.json") &&
                         fs::exists(arm_dir / "metrics.jsonl");
    if (!trained) {
      std::cout << "  incomplete: training artifacts missing\n";
      all_complete = false;
      continue;
    }
    const auto ledger = xlslm::TokenBudgetLedger::load(arm_dir / "ledger.json");
    std::cout << "  token budget:";
    for (const auto& [stage, langs] : ledger.by_stage()) {
      for (const auto& [lang, count] : langs) {
        std::cout << " " << stage << "/" << lang << "=" << count;
      }
    }
    std::cout << " total=" << ledger.grand_total() << "\n";

    if (fs::exists(arm_dir / "eval.jsonl")) {
      const auto bench = xlslm::load_benchmark(arm_dir / "eval.jsonl");
      std::cout << xlslm::render_matrix(bench);
    } else {
      std::cout << "  incomplete: no eval results\n";
      all_complete = false;
    }
    if (fs::exists(arm_dir / "alignment.jsonl")) {
      const auto align = xlslm::load_alignment(arm_dir / "alignment.jsonl");
      std::cout << "  alignment overall mean cosine: " << align.overall
                << " over " << align.pair_count << " pairs\n";
    }
  }
  if (!all_complete) {
    std::cout << "report: run incomplete\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual interleaving experiments on discrete-unit corpora"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions g;
  std::string config_path;
  std::uint64_t seed_value = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "experiment config file (JSON)")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
  app.add_option("--set", g.overrides,
                 "dotted-key config override, e.g. --set train.batch_rows=8");

  std::string out_path;
  std::string checkpoint_path;
  std::string items_path;
  std::string corpus_path;
  std::string run_path;
  int sample_n = 0;

  auto* synth = app.add_subcommand("synth-corpus",
                                   "generate the synthetic bilingual corpus");
  synth->add_option("--out", out_path, "output corpus directory")->required();

  auto* train = app.add_subcommand("train", "run the training pipeline");
  train->add_option("--out", out_path, "run directory")->required();

  auto* eval = app.add_subcommand("eval", "pairwise log-likelihood benchmark");
  eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--items", items_path, "items file (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", out_path, "results file (JSONL)")->required();

  auto* analyze =
      app.add_subcommand("analyze", "layer-wise hidden-state alignment");
  analyze->add_option("--checkpoint", checkpoint_path, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--corpus", corpus_path, "corpus directory")->required();
  analyze->add_option("--out", out_path, "report file (JSONL)")->required();
  analyze->add_option("--sample-n", sample_n, "sentence pairs to sample");

  auto* report = app.add_subcommand("report", "consolidated run table");
  report->add_option("--run", run_path, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (!config_path.empty()) g.config = config_path;
  seed_set = seed_opt->count() > 0;
  if (seed_set) g.seed = seed_value;

  try {
    if (synth->parsed()) return cmd_synth_corpus(g, out_path);
    if (train->parsed()) return cmd_train(g, out_path);
    if (eval->parsed()) return cmd_eval(g, checkpoint_path, items_path, out_path);
    if (analyze->parsed()) {
      return cmd_analyze(g, checkpoint_path, corpus_path, out_path, sample_n);
    }
    if (report->parsed()) return cmd_report(run_path);
  } catch (const xlslm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const xlslm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const xlslm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
