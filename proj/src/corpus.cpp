#include "xlslm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xlslm/errors.hpp"

namespace xlslm {

using nlohmann::json;

void VocabSpec::validate() const {
  if (size < 2) {
    throw ConfigError("vocab size must be >= 2, got " + std::to_string(size));
  }
}

std::int64_t Story::token_count() const {
  std::int64_t n = 0;
  for (const auto& s : sentences) n += static_cast<std::int64_t>(s.units.size());
  return n;
}

const std::vector<std::size_t>& Corpus::stories_of(
    const std::string& lang) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = by_lang_.find(lang);
  return it == by_lang_.end() ? kEmpty : it->second;
}

const Story* Corpus::find_story(const std::string& story_id,
                                const std::string& lang) const {
  auto it = by_key_.find({story_id, lang});
  return it == by_key_.end() ? nullptr : &stories[it->second];
}

std::size_t Corpus::story_index(const std::string& story_id,
                                const std::string& lang) const {
  auto it = by_key_.find({story_id, lang});
  if (it == by_key_.end()) {
    throw DataError("story not found: " + story_id + " [" + lang + "]");
  }
  return it->second;
}

void Corpus::reindex() {
  by_lang_.clear();
  by_key_.clear();
  for (std::size_t i = 0; i < stories.size(); ++i) {
    const Story& st = stories[i];
    by_lang_[st.lang].push_back(i);
    auto [it, inserted] = by_key_.insert({{st.story_id, st.lang}, i});
    if (!inserted) {
      throw DataError("duplicate story " + st.story_id + " [" + st.lang + "]");
    }
  }
}

namespace {

void check_story(const Story& st, const VocabSpec& vocab) {
  if (st.sentences.empty()) {
    throw DataError("story " + st.story_id + " [" + st.lang + "] has no sentences");
  }
  for (std::size_t j = 0; j < st.sentences.size(); ++j) {
    const UnitSentence& s = st.sentences[j];
    if (s.idx != static_cast<int>(j) + 1) {
      throw DataError("story " + st.story_id + " [" + st.lang +
                      "]: non-contiguous sentence idx " + std::to_string(s.idx) +
                      " at position " + std::to_string(j + 1));
    }
    if (s.units.empty()) {
      throw DataError("story " + st.story_id + " [" + st.lang +
                      "] sentence " + std::to_string(s.idx) + ": empty sentence");
    }
    for (TokenId id : s.units) {
      if (id < 0 || id >= vocab.size) {
        throw DataError("story " + st.story_id + " [" + st.lang + "] sentence " +
                        std::to_string(s.idx) + ": unit id out of range: " +
                        std::to_string(id) + " (vocab " +
                        std::to_string(vocab.size) + ")");
      }
    }
  }
}

UnitSentence parse_sentence_line(const std::string& line,
                                 const std::string& file, std::size_t lineno) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(file + ":" + std::to_string(lineno) +
                    ": malformed record: " + e.what());
  }
  UnitSentence s;
  try {
    s.story_id = rec.at("story_id").get<std::string>();
    s.lang = rec.at("lang").get<std::string>();
    s.idx = rec.at("idx").get<int>();
    s.units = rec.at("units").get<std::vector<TokenId>>();
  } catch (const json::exception& e) {
    throw DataError(file + ":" + std::to_string(lineno) +
                    ": malformed record: " + e.what());
  }
  return s;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream min(manifest_path);
  if (!min) throw DataError("cannot open " + manifest_path.string());
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }

  Corpus corpus;
  try {
    corpus.vocab.size = manifest.at("vocab").at("size").get<int>();
    corpus.vocab.bos_enabled =
        manifest.at("vocab").value("bos_enabled", false);
    corpus.languages = manifest.at("languages").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  corpus.vocab.validate();

  // Sentence files are read in manifest language order; stories appear in
  // first-record order within each file.
  for (const auto& lang : corpus.languages) {
    std::string fname;
    try {
      fname = manifest.at("sentence_files").at(lang).get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(manifest_path.string() + ": no sentence file for '" +
                      lang + "': " + e.what());
    }
    const auto path = dir / fname;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::map<std::string, std::size_t> open_story;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      UnitSentence s = parse_sentence_line(line, path.string(), lineno);
      if (s.lang != lang) {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": record language '" + s.lang +
                        "' does not match file language '" + lang + "'");
      }
      auto it = open_story.find(s.story_id);
      if (it == open_story.end()) {
        Story st;
        st.story_id = s.story_id;
        st.lang = lang;
        open_story.emplace(s.story_id, corpus.stories.size());
        corpus.stories.push_back(std::move(st));
        it = open_story.find(s.story_id);
      }
      corpus.stories[it->second].sentences.push_back(std::move(s));
    }
  }

  for (const auto& st : corpus.stories) check_story(st, corpus.vocab);
  corpus.reindex();

  if (manifest.contains("alignment_pairs")) {
    for (const auto& rec : manifest.at("alignment_pairs")) {
      const auto story_id = rec.at("story_id").get<std::string>();
      const auto l1 = rec.at("l1").get<std::string>();
      const auto l2 = rec.at("l2").get<std::string>();
      const Story* a = corpus.find_story(story_id, l1);
      const Story* b = corpus.find_story(story_id, l2);
      if (a == nullptr || b == nullptr) {
        throw DataError(manifest_path.string() +
                        ": missing alignment target for story " + story_id +
                        " (" + l1 + "/" + l2 + ")");
      }
      corpus.alignment_pairs.push_back({corpus.story_index(story_id, l1),
                                        corpus.story_index(story_id, l2)});
    }
  }

  if (manifest.contains("counts")) {
    const auto stats = corpus_stats(corpus);
    for (const auto& [lang, rec] : manifest.at("counts").items()) {
      auto it = stats.find(lang);
      if (it == stats.end()) {
        throw DataError(manifest_path.string() + ": counts for unknown language '" +
                        lang + "'");
      }
      const auto want_stories = rec.at("stories").get<std::int64_t>();
      const auto want_sentences = rec.at("sentences").get<std::int64_t>();
      const auto want_tokens = rec.at("tokens").get<std::int64_t>();
      if (want_stories != it->second.story_count ||
          want_sentences != it->second.sentence_count ||
          want_tokens != it->second.token_count) {
        throw DataError(manifest_path.string() + ": counts for '" + lang +
                        "' do not match sentence files");
      }
    }
  }

  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format"] = "xlslm-corpus";
  manifest["version"] = 1;
  manifest["vocab"] = {{"size", corpus.vocab.size},
                       {"bos_enabled", corpus.vocab.bos_enabled}};
  manifest["languages"] = corpus.languages;

  json files = json::object();
  for (const auto& lang : corpus.languages) {
    const std::string fname = "sentences_" + lang + ".jsonl";
    files[lang] = fname;
    std::ofstream out(dir / fname, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / fname).string());
    for (std::size_t idx : corpus.stories_of(lang)) {
      for (const UnitSentence& s : corpus.stories[idx].sentences) {
        json rec;
        rec["story_id"] = s.story_id;
        rec["lang"] = s.lang;
        rec["idx"] = s.idx;
        rec["units"] = s.units;
        out << rec.dump() << '\n';
      }
    }
  }
  manifest["sentence_files"] = files;

  json pairs = json::array();
  for (const auto& p : corpus.alignment_pairs) {
    pairs.push_back({{"story_id", corpus.stories[p.l1_index].story_id},
                     {"l1", corpus.stories[p.l1_index].lang},
                     {"l2", corpus.stories[p.l2_index].lang}});
  }
  manifest["alignment_pairs"] = pairs;

  json counts = json::object();
  for (const auto& [lang, st] : corpus_stats(corpus)) {
    counts[lang] = {{"stories", st.story_count},
                    {"sentences", st.sentence_count},
                    {"tokens", st.token_count}};
  }
  manifest["counts"] = counts;

  std::ofstream mout(dir / "manifest.json", std::ios::binary);
  if (!mout) throw DataError("cannot write " + (dir / "manifest.json").string());
  mout << manifest.dump(2) << '\n';
}

ValidationReport validate_alignment(const Story& l1_story,
                                    const Story& l2_story) {
  ValidationReport report;
  if (l1_story.story_id != l2_story.story_id) {
    report.violations.push_back("story id mismatch " + l1_story.story_id +
                                " != " + l2_story.story_id);
  }
  if (l1_story.lang == l2_story.lang) {
    report.violations.push_back("languages identical: " + l1_story.lang);
  }
  if (l1_story.sentences.size() != l2_story.sentences.size()) {
    report.violations.push_back(
        "sentence count mismatch " + std::to_string(l1_story.sentences.size()) +
        " != " + std::to_string(l2_story.sentences.size()));
  }
  const std::size_t n =
      std::min(l1_story.sentences.size(), l2_story.sentences.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (l1_story.sentences[j].idx != l2_story.sentences[j].idx) {
      report.violations.push_back(
          "sentence index mismatch at position " + std::to_string(j + 1) + ": " +
          std::to_string(l1_story.sentences[j].idx) + " != " +
          std::to_string(l2_story.sentences[j].idx));
    }
  }
  return report;
}

std::map<std::string, LangStats> corpus_stats(const Corpus& corpus) {
  std::map<std::string, LangStats> stats;
  for (const auto& lang : corpus.languages) stats[lang] = LangStats{};
  for (const auto& st : corpus.stories) {
    LangStats& ls = stats[st.lang];
    ls.story_count += 1;
    for (const auto& s : st.sentences) {
      const auto len = static_cast<std::int64_t>(s.units.size());
      ls.sentence_count += 1;
      ls.token_count += len;
      ls.max_sentence_len = std::max(ls.max_sentence_len, len);
      ls.min_sentence_len = ls.sentence_count == 1
                                ? len
                                : std::min(ls.min_sentence_len, len);
    }
  }
  for (auto& [lang, ls] : stats) {
    ls.avg_sentence_len = ls.sentence_count == 0
                              ? 0.0
                              : static_cast<double>(ls.token_count) /
                                    static_cast<double>(ls.sentence_count);
  }
  return stats;
}

std::string render_stats(const std::map<std::string, LangStats>& stats) {
  std::ostringstream out;
  out << "lang  stories  sentences     tokens   min    avg   max\n";
  for (const auto& [lang, s] : stats) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-4s %8lld %10lld %10lld %5lld %6.1f %5lld\n",
                  lang.c_str(), static_cast<long long>(s.story_count),
                  static_cast<long long>(s.sentence_count),
                  static_cast<long long>(s.token_count),
                  static_cast<long long>(s.min_sentence_len),
                  s.avg_sentence_len,
                  static_cast<long long>(s.max_sentence_len));
    out << buf;
  }
  return out.str();
}

}  // namespace xlslm
