#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace xlslm {

using TokenId = std::int32_t;

/// Discrete-unit vocabulary. Unit ids live in [0, size); when the optional
/// BOS token is enabled its id is exactly `size` and the embedding table has
/// one extra row.
struct VocabSpec {
  int size = 2048;
  bool bos_enabled = false;

  int bos_id() const { return size; }
  int effective_size() const { return size + (bos_enabled ? 1 : 0); }
  void validate() const;
};

/// One sentence of a story in one language, as a unit-id sequence.
/// `idx` is 1-based within the story.
struct UnitSentence {
  std::string story_id;
  std::string lang;
  int idx = 0;
  std::vector<TokenId> units;
};

struct Story {
  std::string story_id;
  std::string lang;
  std::vector<UnitSentence> sentences;

  std::int64_t token_count() const;
};

/// Sentence-aligned bilingual story pair. Indices reference Corpus::stories.
struct AlignedStoryPair {
  std::size_t l1_index = 0;
  std::size_t l2_index = 0;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

struct LangStats {
  std::int64_t story_count = 0;
  std::int64_t sentence_count = 0;
  std::int64_t token_count = 0;
  std::int64_t min_sentence_len = 0;
  double avg_sentence_len = 0.0;
  std::int64_t max_sentence_len = 0;
};

class Corpus {
 public:
  VocabSpec vocab;
  std::vector<std::string> languages;
  std::vector<Story> stories;
  std::vector<AlignedStoryPair> alignment_pairs;

  const Story& story_at(std::size_t i) const { return stories.at(i); }
  /// Indices of stories in `lang`, in load order.
  const std::vector<std::size_t>& stories_of(const std::string& lang) const;
  const Story* find_story(const std::string& story_id,
                          const std::string& lang) const;
  std::size_t story_index(const std::string& story_id,
                          const std::string& lang) const;

  /// Rebuild lookup tables after direct mutation of stories/pairs.
  void reindex();

 private:
  std::map<std::string, std::vector<std::size_t>> by_lang_;
  std::map<std::pair<std::string, std::string>, std::size_t> by_key_;
};

/// Reads a corpus directory (manifest.json plus JSONL sentence files).
/// Throws DataError with the offending file and line on malformed input,
/// out-of-range unit ids, gaps in sentence indices, or unresolvable
/// alignment pairs. Load order is deterministic.
Corpus load_corpus(const std::filesystem::path& dir);

/// Writes manifest.json and one sentences_<lang>.jsonl per language.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Checks the pair invariants. Violations are reported, not thrown.
ValidationReport validate_alignment(const Story& l1_story,
                                    const Story& l2_story);

std::map<std::string, LangStats> corpus_stats(const Corpus& corpus);

std::string render_stats(const std::map<std::string, LangStats>& stats);

}  // namespace xlslm
