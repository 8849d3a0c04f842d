#include "xlslm/eval.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xlslm/errors.hpp"

namespace xlslm {

using nlohmann::json;

std::string to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::story: return "story";
    case ItemKind::topic: return "topic";
    case ItemKind::syntax: return "syntax";
    case ItemKind::lexical: return "lexical";
  }
  return "?";
}

ItemKind item_kind_from_string(const std::string& s) {
  if (s == "story") return ItemKind::story;
  if (s == "topic") return ItemKind::topic;
  if (s == "syntax") return ItemKind::syntax;
  if (s == "lexical") return ItemKind::lexical;
  throw DataError("unknown item kind: " + s);
}

namespace {

std::vector<TokenId> concat_prompt(const EvalItem& item) {
  std::vector<TokenId> out;
  for (const auto& s : item.prompt) {
    out.insert(out.end(), s.units.begin(), s.units.end());
  }
  return out;
}

}  // namespace

ScoredItem score_item(const ModelParams& params, const EvalItem& item,
                      const ScoreOptions& opts) {
  const std::vector<TokenId> prompt = concat_prompt(item);
  const std::size_t max_len =
      prompt.size() +
      std::max(item.true_ending.units.size(), item.distractor.units.size());
  if (static_cast<int>(max_len) > params.config.context_len) {
    throw DataError("item exceeds context window");
  }
  ScoredItem scored;
  scored.lp_true = sequence_logprob<float>(params, prompt,
                                           item.true_ending.units,
                                           opts.normalize_by_length);
  scored.lp_false = sequence_logprob<float>(params, prompt,
                                            item.distractor.units,
                                            opts.normalize_by_length);
  scored.tie = scored.lp_true == scored.lp_false;
  scored.correct = scored.lp_true > scored.lp_false;
  return scored;
}

BenchmarkResult run_benchmark(const ModelParams& params,
                              const std::vector<EvalItem>& items,
                              const ScoreOptions& opts) {
  BenchmarkResult result;
  for (const auto& item : items) {
    ScoredItem scored;
    try {
      scored = score_item(params, item, opts);
    } catch (const DataError&) {
      result.skipped_overlong += 1;
      continue;
    }
    EvalResult& bucket =
        result.conditions[{item.kind, item.prompt_lang, item.ending_lang}];
    bucket.count += 1;
    if (scored.tie) {
      bucket.ties += 1;
    } else if (scored.correct) {
      bucket.correct += 1;
    }
  }
  for (auto& [key, bucket] : result.conditions) {
    const double tie_credit = opts.strict_ties ? 0.0 : 0.5;
    bucket.accuracy = (static_cast<double>(bucket.correct) +
                       tie_credit * static_cast<double>(bucket.ties)) /
                      static_cast<double>(bucket.count);
  }
  return result;
}

std::string render_matrix(const BenchmarkResult& result) {
  // Columns are prompt->ending conditions, rows are item kinds.
  std::vector<std::pair<std::string, std::string>> conds;
  std::vector<ItemKind> kinds;
  for (const auto& [key, bucket] : result.conditions) {
    std::pair<std::string, std::string> c{key.prompt_lang, key.ending_lang};
    if (std::find(conds.begin(), conds.end(), c) == conds.end()) {
      conds.push_back(c);
    }
    if (std::find(kinds.begin(), kinds.end(), key.kind) == kinds.end()) {
      kinds.push_back(key.kind);
    }
  }
  std::ostringstream out;
  out << "kind     ";
  for (const auto& [pl, el] : conds) {
    std::string label = pl == el ? pl : pl + ">" + el;
    out << " " << label;
    for (std::size_t i = label.size(); i < 7; ++i) out << ' ';
  }
  out << '\n';
  for (ItemKind kind : kinds) {
    std::string name = to_string(kind);
    out << name;
    for (std::size_t i = name.size(); i < 9; ++i) out << ' ';
    for (const auto& [pl, el] : conds) {
      auto it = result.conditions.find({kind, pl, el});
      if (it == result.conditions.end()) {
        out << "    --  ";
      } else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), " %6.2f ", it->second.accuracy * 100.0);
        out << buf;
      }
    }
    out << '\n';
  }
  if (result.skipped_overlong > 0) {
    out << "skipped " << result.skipped_overlong << " overlong item(s)\n";
  }
  return out.str();
}

namespace {

json sentence_to_json(const UnitSentence& s) {
  return json{{"story_id", s.story_id},
              {"lang", s.lang},
              {"idx", s.idx},
              {"units", s.units}};
}

UnitSentence sentence_from_json(const json& j) {
  UnitSentence s;
  s.story_id = j.at("story_id").get<std::string>();
  s.lang = j.at("lang").get<std::string>();
  s.idx = j.at("idx").get<int>();
  s.units = j.at("units").get<std::vector<TokenId>>();
  return s;
}

}  // namespace

void save_items(const std::vector<EvalItem>& items,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& item : items) {
    json rec;
    rec["kind"] = to_string(item.kind);
    rec["prompt_lang"] = item.prompt_lang;
    rec["ending_lang"] = item.ending_lang;
    json prompt = json::array();
    for (const auto& s : item.prompt) prompt.push_back(sentence_to_json(s));
    rec["prompt"] = prompt;
    json endings = json::array();
    if (item.distractor_first) {
      endings.push_back(sentence_to_json(item.distractor));
      endings.push_back(sentence_to_json(item.true_ending));
      rec["true_index"] = 1;
    } else {
      endings.push_back(sentence_to_json(item.true_ending));
      endings.push_back(sentence_to_json(item.distractor));
      rec["true_index"] = 0;
    }
    rec["endings"] = endings;
    out << rec.dump() << '\n';
  }
}

std::vector<EvalItem> load_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<EvalItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed item: " + e.what());
    }
    try {
      EvalItem item;
      item.kind = item_kind_from_string(rec.at("kind").get<std::string>());
      item.prompt_lang = rec.at("prompt_lang").get<std::string>();
      item.ending_lang = rec.at("ending_lang").get<std::string>();
      for (const auto& s : rec.at("prompt")) {
        item.prompt.push_back(sentence_from_json(s));
      }
      const int true_index = rec.at("true_index").get<int>();
      const auto& endings = rec.at("endings");
      if (endings.size() != 2 || true_index < 0 || true_index > 1) {
        throw DataError("expected two endings and true_index in {0,1}");
      }
      item.true_ending = sentence_from_json(endings.at(true_index));
      item.distractor = sentence_from_json(endings.at(1 - true_index));
      item.distractor_first = true_index == 1;
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed item: " + e.what());
    }
  }
  return items;
}

void save_benchmark(const BenchmarkResult& result,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [key, bucket] : result.conditions) {
    json rec;
    rec["kind"] = to_string(key.kind);
    rec["prompt_lang"] = key.prompt_lang;
    rec["ending_lang"] = key.ending_lang;
    rec["count"] = bucket.count;
    rec["correct"] = bucket.correct;
    rec["ties"] = bucket.ties;
    rec["accuracy"] = bucket.accuracy;
    out << rec.dump() << '\n';
  }
  json tail;
  tail["summary"] = true;
  tail["skipped_overlong"] = result.skipped_overlong;
  out << tail.dump() << '\n';
}

BenchmarkResult load_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  BenchmarkResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    if (rec.value("summary", false)) {
      result.skipped_overlong = rec.value("skipped_overlong", 0);
      continue;
    }
    ConditionKey key{item_kind_from_string(rec.at("kind").get<std::string>()),
                     rec.at("prompt_lang").get<std::string>(),
                     rec.at("ending_lang").get<std::string>()};
    EvalResult bucket;
    bucket.count = rec.at("count").get<std::int64_t>();
    bucket.correct = rec.at("correct").get<std::int64_t>();
    bucket.ties = rec.at("ties").get<std::int64_t>();
    bucket.accuracy = rec.at("accuracy").get<double>();
    result.conditions[key] = bucket;
  }
  return result;
}

}  // namespace xlslm
