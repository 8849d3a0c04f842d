#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xlslm/corpus.hpp"
#include "xlslm/model.hpp"

namespace xlslm {

enum class ItemKind { story, topic, syntax, lexical };

std::string to_string(ItemKind kind);
ItemKind item_kind_from_string(const std::string& s);

/// One pairwise comparison: the model should assign a higher log-likelihood
/// to the true ending than to the distractor, given the concatenated prompt.
/// Syntax/lexical items have an empty prompt and compare whole sequences.
struct EvalItem {
  ItemKind kind = ItemKind::topic;
  std::string prompt_lang;
  std::string ending_lang;
  std::vector<UnitSentence> prompt;
  UnitSentence true_ending;
  UnitSentence distractor;
  /// Serialization order bit: when true the distractor is written first.
  bool distractor_first = false;
};

struct ScoreOptions {
  bool normalize_by_length = false;
  bool strict_ties = false;  ///< count exact ties as wrong instead of half
};

struct ScoredItem {
  double lp_true = 0.0;
  double lp_false = 0.0;
  bool correct = false;
  bool tie = false;
};

struct EvalResult {
  std::int64_t count = 0;
  std::int64_t correct = 0;
  std::int64_t ties = 0;
  double accuracy = 0.0;  ///< (correct + 0.5 * ties) / count unless strict
};

struct ConditionKey {
  ItemKind kind;
  std::string prompt_lang;
  std::string ending_lang;
  auto operator<=>(const ConditionKey&) const = default;
};

struct BenchmarkResult {
  std::map<ConditionKey, EvalResult> conditions;
  std::int64_t skipped_overlong = 0;
};

ScoredItem score_item(const ModelParams& params, const EvalItem& item,
                      const ScoreOptions& opts = {});

/// Scores every item and aggregates per (kind, prompt_lang -> ending_lang)
/// condition. Items that do not fit the context window are excluded and
/// counted, never truncated.
BenchmarkResult run_benchmark(const ModelParams& params,
                              const std::vector<EvalItem>& items,
                              const ScoreOptions& opts = {});

/// Plain-text accuracy matrix, one row per kind, one column per condition.
std::string render_matrix(const BenchmarkResult& result);

void save_items(const std::vector<EvalItem>& items,
                const std::filesystem::path& path);
std::vector<EvalItem> load_items(const std::filesystem::path& path);

void save_benchmark(const BenchmarkResult& result,
                    const std::filesystem::path& path);
BenchmarkResult load_benchmark(const std::filesystem::path& path);

}  // namespace xlslm
