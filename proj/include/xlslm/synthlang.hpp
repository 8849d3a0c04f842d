#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlslm/corpus.hpp"
#include "xlslm/eval.hpp"
#include "xlslm/rng.hpp"

namespace xlslm {

/// Two surface languages share one latent concept space. A first-order
/// Markov chain over concepts generates story structure; each language
/// realizes a concept as a fixed n-gram from its own disjoint vocabulary
/// block, and the second language reverses concept order within a sentence.
struct SynthConfig {
  int concept_count = 500;
  int units_per_concept = 2;  ///< surface n-gram length g
  int sentence_len = 8;       ///< concepts per sentence
  int sentences_per_story = 10;
  int story_count = 2000;
  double markov_temperature = 0.7;
  /// Minimum log-probability margin of the true ending over a story-cloze
  /// distractor under the chain; larger values make items easier.
  double story_gap_nats = 0.0;
  bool l2_reverse_concepts = true;
  VocabSpec vocab;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LatentStory {
  std::uint64_t ordinal = 0;
  std::vector<std::vector<int>> sentences;  ///< concept ids per sentence
};

class SynthLanguage {
 public:
  explicit SynthLanguage(const SynthConfig& cfg);

  static constexpr const char* kLang1 = "en";
  static constexpr const char* kLang2 = "fr";

  const SynthConfig& config() const { return cfg_; }

  /// Deterministic per (config, seed, ordinal); the per-story stream is
  /// seeded with seed ^ splitmix64(ordinal).
  LatentStory latent_story(std::uint64_t ordinal) const;

  /// Surface n-gram of one concept in one language. Language 1 uses block
  /// [2cg, 2cg+g), language 2 uses [(2c+1)g, (2c+1)g+g).
  std::vector<TokenId> concept_tokens(const std::string& lang, int concept_id) const;

  UnitSentence realize_sentence(const std::string& lang,
                                const std::vector<int>& concepts,
                                const std::string& story_id, int idx) const;

  double transition_prob(int from, int to) const;

  Corpus generate_parallel_corpus() const;

  /// 4-sentence prompts with a true fifth sentence versus an adversarial
  /// one; emits EN->EN, FR->FR, EN->FR, FR->EN variants per base item, so
  /// the result holds 4 * item_count entries.
  std::vector<EvalItem> generate_cloze(ItemKind kind, int item_count) const;

  /// Grammaticality (syntax) or nonce-word (lexical) minimal pairs as
  /// empty-prompt items, one per language per base item.
  std::vector<EvalItem> generate_minimal_pairs(ItemKind kind,
                                               int item_count) const;

 private:
  std::vector<int> sample_chain(Rng& rng, int length) const;
  std::vector<int> sample_incompatible_continuation(Rng& rng, int from,
                                                    int length) const;
  double chain_logprob(int from, const std::vector<int>& concepts) const;
  int sample_successor(Rng& rng, int from) const;

  SynthConfig cfg_;
  std::vector<double> transition_;  // row-major C x C probabilities
};

}  // namespace xlslm
