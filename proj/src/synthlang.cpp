#include "xlslm/synthlang.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xlslm/errors.hpp"

namespace xlslm {

namespace {

constexpr std::uint64_t kTransitionTag = 0x7472616e73697469ull;
constexpr std::uint64_t kEvalStoryBase = 1ull << 40;
constexpr std::uint64_t kPairStoryBase = 1ull << 41;
constexpr std::uint64_t kItemTag = 1ull << 42;

std::string padded_id(const char* prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06llu", prefix,
                static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  vocab.validate();
  if (concept_count < 1 || units_per_concept < 1 || sentence_len < 1 ||
      sentences_per_story < 1 || story_count < 1) {
    throw ConfigError("synth counts must be >= 1");
  }
  if (markov_temperature <= 0.0) {
    throw ConfigError("markov_temperature must be positive");
  }
  if (story_gap_nats < 0.0) {
    throw ConfigError("story_gap_nats must be non-negative");
  }
  const std::int64_t needed = 2ll * concept_count * units_per_concept;
  if (needed > vocab.size) {
    throw ConfigError("vocab capacity violated: two surface vocabularies need " +
                      std::to_string(needed) + " ids but K = " +
                      std::to_string(vocab.size));
  }
  if (concept_count < 2) {
    throw ConfigError("need at least two concepts for a transition chain");
  }
}

SynthLanguage::SynthLanguage(const SynthConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.concept_count;
  transition_.assign(static_cast<std::size_t>(c) * c, 0.0);
  Rng rng(cfg_.seed ^ splitmix64(kTransitionTag));
  // No self-transitions: stories never repeat a concept twice in a row, and
  // reversed surface n-grams therefore never occur in grammatical output.
  for (int i = 0; i < c; ++i) {
    double* row = transition_.data() + static_cast<std::size_t>(i) * c;
    double max_logit = -1e300;
    for (int j = 0; j < c; ++j) {
      if (j == i) continue;
      row[j] = rng.normal() / cfg_.markov_temperature;
      max_logit = std::max(max_logit, row[j]);
    }
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      if (j == i) continue;
      row[j] = std::exp(row[j] - max_logit);
      denom += row[j];
    }
    for (int j = 0; j < c; ++j) row[j] = j == i ? 0.0 : row[j] / denom;
  }
}

double SynthLanguage::transition_prob(int from, int to) const {
  return transition_[static_cast<std::size_t>(from) * cfg_.concept_count + to];
}

int SynthLanguage::sample_successor(Rng& rng, int from) const {
  const double* row =
      transition_.data() + static_cast<std::size_t>(from) * cfg_.concept_count;
  const double u = rng.uniform01();
  double cdf = 0.0;
  for (int j = 0; j < cfg_.concept_count; ++j) {
    cdf += row[j];
    if (u < cdf) return j;
  }
  return cfg_.concept_count - 1;
}

std::vector<int> SynthLanguage::sample_chain(Rng& rng, int length) const {
  std::vector<int> out;
  out.reserve(length);
  out.push_back(static_cast<int>(rng.below(cfg_.concept_count)));
  while (static_cast<int>(out.size()) < length) {
    out.push_back(sample_successor(rng, out.back()));
  }
  return out;
}

LatentStory SynthLanguage::latent_story(std::uint64_t ordinal) const {
  Rng rng(cfg_.seed ^ splitmix64(ordinal));
  const int total = cfg_.sentence_len * cfg_.sentences_per_story;
  const std::vector<int> chain = sample_chain(rng, total);
  LatentStory story;
  story.ordinal = ordinal;
  story.sentences.resize(cfg_.sentences_per_story);
  for (int s = 0; s < cfg_.sentences_per_story; ++s) {
    story.sentences[s].assign(
        chain.begin() + static_cast<std::ptrdiff_t>(s) * cfg_.sentence_len,
        chain.begin() + static_cast<std::ptrdiff_t>(s + 1) * cfg_.sentence_len);
  }
  return story;
}

std::vector<TokenId> SynthLanguage::concept_tokens(const std::string& lang,
                                                   int concept_id) const {
  const int g = cfg_.units_per_concept;
  const int base = lang == kLang1 ? 2 * concept_id * g : (2 * concept_id + 1) * g;
  std::vector<TokenId> out(static_cast<std::size_t>(g));
  for (int k = 0; k < g; ++k) out[k] = base + k;
  return out;
}

UnitSentence SynthLanguage::realize_sentence(const std::string& lang,
                                             const std::vector<int>& concepts,
                                             const std::string& story_id,
                                             int idx) const {
  UnitSentence s;
  s.story_id = story_id;
  s.lang = lang;
  s.idx = idx;
  s.units.reserve(concepts.size() * cfg_.units_per_concept);
  const bool reversed = lang == kLang2 && cfg_.l2_reverse_concepts;
  for (std::size_t j = 0; j < concepts.size(); ++j) {
    const int c = reversed ? concepts[concepts.size() - 1 - j] : concepts[j];
    const auto tokens = concept_tokens(lang, c);
    s.units.insert(s.units.end(), tokens.begin(), tokens.end());
  }
  return s;
}

Corpus SynthLanguage::generate_parallel_corpus() const {
  Corpus corpus;
  corpus.vocab = cfg_.vocab;
  corpus.languages = {kLang1, kLang2};

  std::vector<LatentStory> latents;
  latents.reserve(cfg_.story_count);
  for (int i = 0; i < cfg_.story_count; ++i) {
    latents.push_back(latent_story(static_cast<std::uint64_t>(i)));
  }

  for (const char* lang : {kLang1, kLang2}) {
    for (int i = 0; i < cfg_.story_count; ++i) {
      Story st;
      st.story_id = padded_id("s", static_cast<std::uint64_t>(i));
      st.lang = lang;
      for (int j = 0; j < cfg_.sentences_per_story; ++j) {
        st.sentences.push_back(realize_sentence(lang, latents[i].sentences[j],
                                                st.story_id, j + 1));
      }
      corpus.stories.push_back(std::move(st));
    }
  }
  corpus.reindex();
  for (int i = 0; i < cfg_.story_count; ++i) {
    const std::string id = padded_id("s", static_cast<std::uint64_t>(i));
    corpus.alignment_pairs.push_back(
        {corpus.story_index(id, kLang1), corpus.story_index(id, kLang2)});
  }
  return corpus;
}

double SynthLanguage::chain_logprob(int from,
                                    const std::vector<int>& concepts) const {
  double lp = 0.0;
  int prev = from;
  for (int c : concepts) {
    const double p = transition_prob(prev, c);
    lp += p > 0.0 ? std::log(p) : -1e300;
    prev = c;
  }
  return lp;
}

// Chain-fluent but incompatible: restart the chain from a random concept so
// the junction transition is improbable while the distractor's own token
// statistics match real sentences.
std::vector<int> SynthLanguage::sample_incompatible_continuation(Rng& rng, int from,
                                                         int length) const {
  std::vector<int> out;
  out.reserve(length);
  int start = static_cast<int>(rng.below(cfg_.concept_count));
  if (start == from) start = (start + 1) % cfg_.concept_count;
  out.push_back(start);
  int prev = start;
  for (int i = 1; i < length; ++i) {
    const int next = sample_successor(rng, prev);
    out.push_back(next);
    prev = next;
  }
  return out;
}

std::vector<EvalItem> SynthLanguage::generate_cloze(ItemKind kind,
                                                    int item_count) const {
  if (kind != ItemKind::story && kind != ItemKind::topic) {
    throw ConfigError("cloze kind must be story or topic");
  }
  if (cfg_.sentences_per_story < 5) {
    throw ConfigError("cloze items need stories with at least 5 sentences");
  }
  if (kind == ItemKind::topic && item_count < 2) {
    throw DataError("insufficient stories for topic negatives");
  }

  const char* prefix = kind == ItemKind::topic ? "evt" : "evs";
  std::vector<EvalItem> items;
  items.reserve(static_cast<std::size_t>(item_count) * 4);

  for (int i = 0; i < item_count; ++i) {
    const std::uint64_t ordinal = kEvalStoryBase + static_cast<std::uint64_t>(i);
    const LatentStory latent = latent_story(ordinal);
    const std::string story_id = padded_id(prefix, static_cast<std::uint64_t>(i));
    Rng item_rng(cfg_.seed ^ splitmix64(ordinal ^ kItemTag));

    const std::vector<int>& true_latent = latent.sentences[4];
    const int junction = latent.sentences[3].back();

    std::vector<int> distractor_latent;
    std::string distractor_story_id = story_id;
    if (kind == ItemKind::topic) {
      const int other = (i + 1) % item_count;
      distractor_latent =
          latent_story(kEvalStoryBase + static_cast<std::uint64_t>(other))
              .sentences[4];
      distractor_story_id = padded_id(prefix, static_cast<std::uint64_t>(other));
    } else {
      // Resample until the true ending is strictly likelier under the chain.
      const double lp_true = chain_logprob(junction, true_latent);
      for (int attempt = 0;; ++attempt) {
        distractor_latent = sample_incompatible_continuation(item_rng, junction,
                                                     cfg_.sentence_len);
        if (chain_logprob(junction, distractor_latent) <
            lp_true - cfg_.story_gap_nats) {
          break;
        }
        if (attempt > 200) {
          throw DataError("could not construct a low-probability distractor");
        }
      }
    }

    const std::pair<const char*, const char*> variants[4] = {
        {kLang1, kLang1}, {kLang2, kLang2}, {kLang1, kLang2}, {kLang2, kLang1}};
    for (const auto& [plang, elang] : variants) {
      EvalItem item;
      item.kind = kind;
      item.prompt_lang = plang;
      item.ending_lang = elang;
      for (int j = 0; j < 4; ++j) {
        item.prompt.push_back(
            realize_sentence(plang, latent.sentences[j], story_id, j + 1));
      }
      item.true_ending = realize_sentence(elang, true_latent, story_id, 5);
      item.distractor =
          realize_sentence(elang, distractor_latent, distractor_story_id, 5);
      item.distractor_first = item_rng.bernoulli(0.5);
      items.push_back(std::move(item));
    }
  }
  return items;
}

std::vector<EvalItem> SynthLanguage::generate_minimal_pairs(
    ItemKind kind, int item_count) const {
  if (kind != ItemKind::syntax && kind != ItemKind::lexical) {
    throw ConfigError("minimal pair kind must be syntax or lexical");
  }
  const int g = cfg_.units_per_concept;
  if (kind == ItemKind::syntax && g < 2) {
    throw ConfigError("syntax pairs need units_per_concept >= 2");
  }
  const int reserved_base = 2 * cfg_.concept_count * g;
  const int reserved_count = cfg_.vocab.size - reserved_base;
  if (kind == ItemKind::lexical && reserved_count < 1) {
    throw DataError("no reserved ids available for nonce construction");
  }

  const char* prefix = kind == ItemKind::syntax ? "evy" : "evx";
  std::vector<EvalItem> items;
  items.reserve(static_cast<std::size_t>(item_count) * 2);

  for (int i = 0; i < item_count; ++i) {
    const std::uint64_t ordinal = kPairStoryBase + static_cast<std::uint64_t>(i);
    const LatentStory latent = latent_story(ordinal);
    const std::string story_id = padded_id(prefix, static_cast<std::uint64_t>(i));
    Rng item_rng(cfg_.seed ^ splitmix64(ordinal ^ kItemTag));
    const std::vector<int>& concepts = latent.sentences[0];

    for (const char* lang : {kLang1, kLang2}) {
      EvalItem item;
      item.kind = kind;
      item.prompt_lang = lang;
      item.ending_lang = lang;
      item.true_ending = realize_sentence(lang, concepts, story_id, 1);
      item.distractor = item.true_ending;
      item.distractor.story_id = story_id + "-neg";

      const int slot = static_cast<int>(item_rng.below(concepts.size()));
      if (kind == ItemKind::syntax) {
        // Reverse one concept's surface n-gram in place.
        auto begin = item.distractor.units.begin() +
                     static_cast<std::ptrdiff_t>(slot) * g;
        std::reverse(begin, begin + g);
      } else {
        const int offset = static_cast<int>(item_rng.below(g));
        const TokenId nonce =
            reserved_base +
            static_cast<TokenId>(item_rng.below(
                static_cast<std::uint64_t>(reserved_count)));
        item.distractor.units[static_cast<std::size_t>(slot) * g + offset] =
            nonce;
      }
      item.distractor_first = item_rng.bernoulli(0.5);
      items.push_back(std::move(item));
    }
  }
  return items;
}

}  // namespace xlslm
