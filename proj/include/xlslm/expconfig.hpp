#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xlslm/eval.hpp"
#include "xlslm/model.hpp"
#include "xlslm/synthlang.hpp"
#include "xlslm/train.hpp"

namespace xlslm {

/// Built-in experiment defaults: the desk-scale preset.
nlohmann::json default_config();

/// Layered resolution: defaults, then the config file, then dotted-key
/// overrides ("a.b.c=value", values parsed as JSON when possible), then the
/// explicit seed flag. The result is the resolved snapshot a run records.
nlohmann::json resolve_config(
    const std::optional<std::filesystem::path>& file,
    const std::vector<std::string>& overrides,
    std::optional<std::uint64_t> seed_flag);

void apply_override(nlohmann::json& config, const std::string& assignment);

ModelConfig model_config_from(const nlohmann::json& cfg);
OptimConfig optim_config_from(const nlohmann::json& cfg);
SynthConfig synth_config_from(const nlohmann::json& cfg);
TrainOptions train_options_from(const nlohmann::json& cfg);
ScoreOptions score_options_from(const nlohmann::json& cfg);
std::vector<ArmConfig> arms_from(const nlohmann::json& cfg);

}  // namespace xlslm
