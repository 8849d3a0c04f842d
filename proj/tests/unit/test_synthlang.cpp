#include "doctest.h"

#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "xlslm/errors.hpp"
#include "xlslm/synthlang.hpp"

using namespace xlslm;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.concept_count = 12;
  cfg.units_per_concept = 2;
  cfg.sentence_len = 3;
  cfg.sentences_per_story = 6;
  cfg.story_count = 5;
  cfg.vocab.size = 64;  // blocks use 48 ids, 16 reserved
  cfg.seed = 7;
  return cfg;
}

// Independent inverse of the surface realization, written from the block
// layout alone: chunk into g-grams, require each to be g consecutive ids
// starting at a block boundary of the right language half.
std::optional<std::vector<int>> decode_sentence(const SynthConfig& cfg,
                                                const std::string& lang,
                                                const std::vector<TokenId>& u) {
  const int g = cfg.units_per_concept;
  if (u.size() % static_cast<std::size_t>(g) != 0) return std::nullopt;
  std::vector<int> concepts;
  for (std::size_t p = 0; p < u.size(); p += g) {
    const TokenId first = u[p];
    for (int k = 1; k < g; ++k) {
      if (u[p + k] != first + k) return std::nullopt;
    }
    const int stripe = first / (2 * g);
    const int within = first % (2 * g);
    const bool is_l2_half = within >= g;
    if (within % g != 0) return std::nullopt;
    if (stripe >= cfg.concept_count) return std::nullopt;
    if ((lang == "en" && is_l2_half) || (lang == "fr" && !is_l2_half)) {
      return std::nullopt;
    }
    concepts.push_back(stripe);
  }
  if (lang == "fr" && cfg.l2_reverse_concepts) {
    std::reverse(concepts.begin(), concepts.end());
  }
  return concepts;
}

std::string corpus_bytes(const Corpus& corpus) {
  std::ostringstream out;
  for (const auto& st : corpus.stories) {
    out << st.story_id << '|' << st.lang << ':';
    for (const auto& s : st.sentences) {
      for (TokenId t : s.units) out << t << ',';
      out << ';';
    }
  }
  return out.str();
}

}  // namespace

TEST_CASE("config validation") {
  SynthConfig cfg = small_config();
  SUBCASE("vocab capacity") {
    cfg.concept_count = 17;  // needs 68 ids > 64
    CHECK_THROWS_AS(SynthLanguage{cfg}, ConfigError);
  }
  SUBCASE("temperature positive") {
    cfg.markov_temperature = 0.0;
    CHECK_THROWS_AS(SynthLanguage{cfg}, ConfigError);
  }
}

TEST_CASE("parallel corpus: L1 and L2 token sets are disjoint") {
  SynthConfig cfg = small_config();
  cfg.concept_count = 4;
  cfg.sentence_len = 3;
  cfg.sentences_per_story = 2;
  cfg.story_count = 1;
  cfg.vocab.size = 16;
  const SynthLanguage lang(cfg);
  const Corpus corpus = lang.generate_parallel_corpus();
  REQUIRE(corpus.alignment_pairs.size() == 1);

  std::set<TokenId> en_ids, fr_ids;
  for (const auto& st : corpus.stories) {
    for (const auto& s : st.sentences) {
      auto& dst = st.lang == "en" ? en_ids : fr_ids;
      dst.insert(s.units.begin(), s.units.end());
    }
  }
  for (TokenId t : en_ids) CHECK(fr_ids.count(t) == 0);
}

TEST_CASE("generators are deterministic given (config, seed)") {
  const SynthConfig cfg = small_config();
  const SynthLanguage a(cfg), b(cfg);
  CHECK(corpus_bytes(a.generate_parallel_corpus()) ==
        corpus_bytes(b.generate_parallel_corpus()));

  const auto ia = a.generate_cloze(ItemKind::topic, 6);
  const auto ib = b.generate_cloze(ItemKind::topic, 6);
  REQUIRE(ia.size() == ib.size());
  for (std::size_t i = 0; i < ia.size(); ++i) {
    CHECK(ia[i].true_ending.units == ib[i].true_ending.units);
    CHECK(ia[i].distractor.units == ib[i].distractor.units);
    CHECK(ia[i].distractor_first == ib[i].distractor_first);
  }

  const auto pa = a.generate_minimal_pairs(ItemKind::lexical, 5);
  const auto pb = b.generate_minimal_pairs(ItemKind::lexical, 5);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].distractor.units == pb[i].distractor.units);
  }

  SynthConfig other = cfg;
  other.seed = 8;
  const SynthLanguage c(other);
  CHECK(corpus_bytes(a.generate_parallel_corpus()) !=
        corpus_bytes(c.generate_parallel_corpus()));
}

TEST_CASE("surface realization inverts back to the latent story") {
  const SynthConfig cfg = small_config();
  const SynthLanguage lang(cfg);
  const Corpus corpus = lang.generate_parallel_corpus();

  for (const auto& pair : corpus.alignment_pairs) {
    const Story& en = corpus.story_at(pair.l1_index);
    const Story& fr = corpus.story_at(pair.l2_index);
    const LatentStory latent = lang.latent_story(std::stoull(
        en.story_id.substr(1)));
    for (std::size_t j = 0; j < en.sentences.size(); ++j) {
      const auto en_dec = decode_sentence(cfg, "en", en.sentences[j].units);
      const auto fr_dec = decode_sentence(cfg, "fr", fr.sentences[j].units);
      REQUIRE(en_dec.has_value());
      REQUIRE(fr_dec.has_value());
      CHECK(*en_dec == latent.sentences[j]);
      CHECK(*fr_dec == latent.sentences[j]);
    }
  }
}

TEST_CASE("topic cloze items") {
  const SynthConfig cfg = small_config();
  const SynthLanguage lang(cfg);
  const auto items = lang.generate_cloze(ItemKind::topic, 10);
  REQUIRE(items.size() == 40);  // 4 language variants per base item

  for (const auto& item : items) {
    CHECK(item.prompt.size() == 4);
    CHECK(item.distractor.story_id != item.prompt[0].story_id);
    for (const auto& s : item.prompt) CHECK(s.lang == item.prompt_lang);
    CHECK(item.true_ending.lang == item.ending_lang);
    CHECK(item.true_ending.units.size() == item.distractor.units.size());
  }

  SUBCASE("cross-lingual endings share the latent with the monolingual one") {
    // items come in groups of 4: en->en, fr->fr, en->fr, fr->en
    for (std::size_t base = 0; base < items.size(); base += 4) {
      const auto mono = decode_sentence(cfg, "en",
                                        items[base].true_ending.units);
      const auto cross = decode_sentence(cfg, "fr",
                                         items[base + 2].true_ending.units);
      REQUIRE(mono.has_value());
      REQUIRE(cross.has_value());
      CHECK(*mono == *cross);
    }
  }

  SUBCASE("too few stories for topic negatives") {
    CHECK_THROWS_AS(lang.generate_cloze(ItemKind::topic, 1), DataError);
  }
}

TEST_CASE("story cloze: true ending is strictly likelier under the chain") {
  const SynthConfig cfg = small_config();
  const SynthLanguage lang(cfg);
  const auto items = lang.generate_cloze(ItemKind::story, 20);

  for (std::size_t i = 0; i < items.size(); i += 4) {
    const EvalItem& item = items[i];  // en->en variant carries prompt order
    const auto prompt_last =
        decode_sentence(cfg, "en", item.prompt[3].units)->back();
    const auto true_c = *decode_sentence(cfg, "en", item.true_ending.units);
    const auto dist_c = *decode_sentence(cfg, "en", item.distractor.units);

    // Recompute both ending probabilities from the chain.
    auto lp = [&](const std::vector<int>& cs) {
      double total = 0.0;
      int prev = prompt_last;
      for (int c : cs) {
        const double p = lang.transition_prob(prev, c);
        total += p > 0.0 ? std::log(p) : -1e18;
        prev = c;
      }
      return total;
    };
    CHECK(lp(true_c) > lp(dist_c));
  }
}

TEST_CASE("syntax minimal pairs") {
  const SynthConfig cfg = small_config();
  const SynthLanguage lang(cfg);
  const auto items = lang.generate_minimal_pairs(ItemKind::syntax, 10);
  REQUIRE(items.size() == 20);  // one per language per base item

  for (const auto& item : items) {
    CHECK(item.prompt.empty());
    std::multiset<TokenId> pos(item.true_ending.units.begin(),
                               item.true_ending.units.end());
    std::multiset<TokenId> neg(item.distractor.units.begin(),
                               item.distractor.units.end());
    CHECK(pos == neg);
    CHECK(item.true_ending.units != item.distractor.units);
    CHECK(decode_sentence(cfg, item.ending_lang, item.true_ending.units)
              .has_value());
    CHECK_FALSE(decode_sentence(cfg, item.ending_lang, item.distractor.units)
                    .has_value());
  }
}

TEST_CASE("lexical minimal pairs") {
  const SynthConfig cfg = small_config();
  const SynthLanguage lang(cfg);
  const Corpus corpus = lang.generate_parallel_corpus();
  const auto items = lang.generate_minimal_pairs(ItemKind::lexical, 10);

  std::set<TokenId> corpus_ids;
  for (const auto& st : corpus.stories) {
    for (const auto& s : st.sentences) {
      corpus_ids.insert(s.units.begin(), s.units.end());
    }
  }

  for (const auto& item : items) {
    int differing = 0;
    TokenId nonce = -1;
    REQUIRE(item.true_ending.units.size() == item.distractor.units.size());
    for (std::size_t k = 0; k < item.true_ending.units.size(); ++k) {
      if (item.true_ending.units[k] != item.distractor.units[k]) {
        ++differing;
        nonce = item.distractor.units[k];
      }
    }
    CHECK(differing == 1);
    CHECK(corpus_ids.count(nonce) == 0);  // nonce ids never occur in data
    CHECK_FALSE(decode_sentence(cfg, item.ending_lang, item.distractor.units)
                    .has_value());
  }

  SUBCASE("no reserved ids left") {
    SynthConfig tight = cfg;
    tight.concept_count = 16;  // 2*16*2 == 64 fills the vocabulary
    const SynthLanguage full(tight);
    CHECK_THROWS_AS(full.generate_minimal_pairs(ItemKind::lexical, 1),
                    DataError);
  }
}
