#include "xlslm/expconfig.hpp"

#include <fstream>

#include "xlslm/errors.hpp"

namespace xlslm {

using nlohmann::json;

json default_config() {
  // Desk-scale preset: three paper-shaped arms at a matched 1700-step
  // budget, stage steps in the 50:20:15 ratio.
  return json::parse(R"json({
  "seed": 1234,
  "data": {"corpus_dir": "corpus"},
  "model": {
    "embed_dim": 128,
    "layers": 2,
    "heads": 4,
    "ff_mult": 4,
    "context_len": 256
  },
  "optim": {
    "peak_lr": 5e-4,
    "warmup_frac": 0.05,
    "beta1": 0.9,
    "beta2": 0.98,
    "weight_decay": 0.1,
    "grad_clip_norm": 1.0,
    "eps": 1e-8
  },
  "train": {
    "batch_rows": 32,
    "restart_schedule": true,
    "echo_every": 50
  },
  "synth": {
    "concept_count": 500,
    "units_per_concept": 2,
    "sentence_len": 8,
    "sentences_per_story": 10,
    "story_count": 2000,
    "markov_temperature": 0.7,
    "story_gap_nats": 0.0,
    "l2_reverse_concepts": true,
    "vocab": {"size": 2048, "bos_enabled": false},
    "cloze_items": 1000,
    "pair_items": 1000
  },
  "eval": {
    "normalize_by_length": false,
    "strict_ties": false
  },
  "analysis": {"sample_n": 1000},
  "arms": [
    {
      "name": "baseline_en_fr",
      "stages": [
        {"name": "pretrain_en", "steps": 1000, "interleave_ratio": 0.0,
         "lang_probability": 1.0, "langs": ["en"]},
        {"name": "bilingual_mono", "steps": 700, "interleave_ratio": 0.0,
         "lang_probability": 0.5, "langs": ["en", "fr"]}
      ]
    },
    {
      "name": "interleave",
      "stages": [
        {"name": "pretrain_en", "steps": 1000, "interleave_ratio": 0.0,
         "lang_probability": 1.0, "langs": ["en"]},
        {"name": "interleave", "steps": 700, "interleave_ratio": 1.0,
         "lang_probability": 0.5, "langs": ["en", "fr"]}
      ]
    },
    {
      "name": "interleave_ft",
      "stages": [
        {"name": "pretrain_en", "steps": 1000, "interleave_ratio": 0.0,
         "lang_probability": 1.0, "langs": ["en"]},
        {"name": "interleave", "steps": 400, "interleave_ratio": 1.0,
         "lang_probability": 0.5, "langs": ["en", "fr"]},
        {"name": "finetune_bilingual", "steps": 300, "interleave_ratio": 0.0,
         "lang_probability": 0.5, "langs": ["en", "fr"]}
      ]
    }
  ]
})json");
}

namespace {

void merge_into(json& base, const json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (const auto& [key, value] : overlay.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like a.b.c=value, got '" +
                      assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  std::string pointer = "/";
  for (char c : path) pointer += c == '.' ? '/' : c;

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings stay strings
  }
  try {
    config[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("cannot apply override '" + assignment + "': " + e.what());
  }
}

json resolve_config(const std::optional<std::filesystem::path>& file,
                    const std::vector<std::string>& overrides,
                    std::optional<std::uint64_t> seed_flag) {
  json config = default_config();
  if (file.has_value()) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    json overlay;
    try {
      in >> overlay;
    } catch (const json::exception& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
    merge_into(config, overlay);
  }
  for (const auto& assignment : overrides) apply_override(config, assignment);
  if (seed_flag.has_value()) config["seed"] = *seed_flag;
  return config;
}

namespace {

template <typename T>
T get_field(const json& cfg, const char* section, const char* key, T fallback) {
  if (!cfg.contains(section)) return fallback;
  return cfg.at(section).value(key, fallback);
}

}  // namespace

ModelConfig model_config_from(const json& cfg) {
  ModelConfig mc;
  mc.embed_dim = get_field(cfg, "model", "embed_dim", mc.embed_dim);
  mc.layers = get_field(cfg, "model", "layers", mc.layers);
  mc.heads = get_field(cfg, "model", "heads", mc.heads);
  mc.ff_mult = get_field(cfg, "model", "ff_mult", mc.ff_mult);
  mc.context_len = get_field(cfg, "model", "context_len", mc.context_len);
  mc.init_seed = cfg.value("seed", std::uint64_t{0});
  return mc;
}

OptimConfig optim_config_from(const json& cfg) {
  OptimConfig oc;
  oc.peak_lr = get_field(cfg, "optim", "peak_lr", oc.peak_lr);
  oc.warmup_frac = get_field(cfg, "optim", "warmup_frac", oc.warmup_frac);
  oc.beta1 = get_field(cfg, "optim", "beta1", oc.beta1);
  oc.beta2 = get_field(cfg, "optim", "beta2", oc.beta2);
  oc.weight_decay = get_field(cfg, "optim", "weight_decay", oc.weight_decay);
  oc.grad_clip_norm = get_field(cfg, "optim", "grad_clip_norm", oc.grad_clip_norm);
  oc.eps = get_field(cfg, "optim", "eps", oc.eps);
  oc.validate();
  return oc;
}

SynthConfig synth_config_from(const json& cfg) {
  SynthConfig sc;
  sc.concept_count = get_field(cfg, "synth", "concept_count", sc.concept_count);
  sc.units_per_concept =
      get_field(cfg, "synth", "units_per_concept", sc.units_per_concept);
  sc.sentence_len = get_field(cfg, "synth", "sentence_len", sc.sentence_len);
  sc.sentences_per_story =
      get_field(cfg, "synth", "sentences_per_story", sc.sentences_per_story);
  sc.story_count = get_field(cfg, "synth", "story_count", sc.story_count);
  sc.markov_temperature =
      get_field(cfg, "synth", "markov_temperature", sc.markov_temperature);
  sc.story_gap_nats =
      get_field(cfg, "synth", "story_gap_nats", sc.story_gap_nats);
  sc.l2_reverse_concepts =
      get_field(cfg, "synth", "l2_reverse_concepts", sc.l2_reverse_concepts);
  if (cfg.contains("synth") && cfg.at("synth").contains("vocab")) {
    const auto& v = cfg.at("synth").at("vocab");
    sc.vocab.size = v.value("size", sc.vocab.size);
    sc.vocab.bos_enabled = v.value("bos_enabled", sc.vocab.bos_enabled);
  }
  sc.seed = cfg.value("seed", std::uint64_t{0});
  sc.validate();
  return sc;
}

TrainOptions train_options_from(const json& cfg) {
  TrainOptions to;
  to.batch_rows = get_field(cfg, "train", "batch_rows", to.batch_rows);
  to.restart_schedule =
      get_field(cfg, "train", "restart_schedule", to.restart_schedule);
  to.echo_every = get_field(cfg, "train", "echo_every", to.echo_every);
  to.seed = cfg.value("seed", std::uint64_t{0});
  if (to.batch_rows < 1) throw ConfigError("train.batch_rows must be >= 1");
  return to;
}

ScoreOptions score_options_from(const json& cfg) {
  ScoreOptions so;
  so.normalize_by_length =
      get_field(cfg, "eval", "normalize_by_length", so.normalize_by_length);
  so.strict_ties = get_field(cfg, "eval", "strict_ties", so.strict_ties);
  return so;
}

std::vector<ArmConfig> arms_from(const json& cfg) {
  std::vector<ArmConfig> arms;
  if (!cfg.contains("arms")) return arms;
  for (const auto& arm_json : cfg.at("arms")) {
    ArmConfig arm;
    arm.name = arm_json.at("name").get<std::string>();
    for (const auto& stage_json : arm_json.at("stages")) {
      StageConfig stage;
      stage.name = stage_json.at("name").get<std::string>();
      stage.steps = stage_json.value("steps", std::int64_t{0});
      stage.declared_tokens = stage_json.value("tokens", std::int64_t{0});
      stage.interleave_ratio = stage_json.value("interleave_ratio", 0.0);
      stage.lang_probability = stage_json.value("lang_probability", 0.5);
      stage.langs = stage_json.value("langs", std::vector<std::string>{});
      arm.stages.push_back(std::move(stage));
    }
    arms.push_back(std::move(arm));
  }
  return arms;
}

}  // namespace xlslm
