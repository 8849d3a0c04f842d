#include "doctest.h"

#include <map>

#include "xlslm/errors.hpp"
#include "xlslm/interleave.hpp"
#include "xlslm/rng.hpp"

using namespace xlslm;

namespace {

Corpus two_sentence_pair() {
  Corpus corpus;
  corpus.vocab.size = 32;
  corpus.languages = {"en", "fr"};
  Story en{"s1", "en", {{"s1", "en", 1, {1, 2}}, {"s1", "en", 2, {3, 4, 5}}}};
  Story fr{"s1", "fr", {{"s1", "fr", 1, {10, 11, 12}}, {"s1", "fr", 2, {13}}}};
  corpus.stories = {en, fr};
  corpus.reindex();
  corpus.alignment_pairs = {{0, 1}};
  return corpus;
}

Corpus random_corpus(std::uint64_t seed, int stories, int max_sentences,
                     int max_len) {
  Rng rng(seed);
  Corpus corpus;
  corpus.vocab.size = 64;
  corpus.languages = {"en", "fr"};
  for (int i = 0; i < stories; ++i) {
    const std::string id = "s" + std::to_string(i);
    const int n = 1 + static_cast<int>(rng.below(max_sentences));
    Story en{id, "en", {}};
    Story fr{id, "fr", {}};
    for (int j = 1; j <= n; ++j) {
      const int len_en = 1 + static_cast<int>(rng.below(max_len));
      const int len_fr = 1 + static_cast<int>(rng.below(max_len));
      UnitSentence se{id, "en", j, {}};
      UnitSentence sf{id, "fr", j, {}};
      for (int k = 0; k < len_en; ++k) {
        se.units.push_back(static_cast<TokenId>(rng.below(32)));
      }
      for (int k = 0; k < len_fr; ++k) {
        sf.units.push_back(static_cast<TokenId>(32 + rng.below(32)));
      }
      en.sentences.push_back(se);
      fr.sentences.push_back(sf);
    }
    corpus.stories.push_back(en);
    corpus.stories.push_back(fr);
  }
  corpus.reindex();
  for (int i = 0; i < stories; ++i) {
    const std::string id = "s" + std::to_string(i);
    corpus.alignment_pairs.push_back(
        {corpus.story_index(id, "en"), corpus.story_index(id, "fr")});
  }
  return corpus;
}

}  // namespace

TEST_CASE("interleave_pair alternates sentences, leading language first") {
  const Corpus corpus = two_sentence_pair();
  const auto& pair = corpus.alignment_pairs[0];

  SUBCASE("lead en") {
    const TrainSequence seq = interleave_pair(corpus, pair, "en");
    CHECK(seq.kind == SequenceKind::interleaved);
    CHECK(seq.tokens == std::vector<TokenId>{1, 2, 10, 11, 12, 3, 4, 5, 13});
    REQUIRE(seq.spans.size() == 4);
    CHECK(seq.spans[0].lang == "en");
    CHECK(seq.spans[1].lang == "fr");
    CHECK(seq.spans[2].lang == "en");
    CHECK(seq.spans[3].lang == "fr");
  }
  SUBCASE("lead fr") {
    const TrainSequence seq = interleave_pair(corpus, pair, "fr");
    CHECK(seq.tokens == std::vector<TokenId>{10, 11, 12, 1, 2, 13, 3, 4, 5});
  }
  SUBCASE("one-sentence stories") {
    Corpus single = two_sentence_pair();
    single.stories[0].sentences.resize(1);
    single.stories[1].sentences.resize(1);
    const TrainSequence seq =
        interleave_pair(single, single.alignment_pairs[0], "en");
    CHECK(seq.tokens.size() == 5);
    CHECK(seq.tokens == std::vector<TokenId>{1, 2, 10, 11, 12});
  }
  SUBCASE("invalid pair is rejected") {
    Corpus broken = two_sentence_pair();
    broken.stories[1].sentences.pop_back();
    CHECK_THROWS_AS(
        interleave_pair(broken, broken.alignment_pairs[0], "en"), DataError);
  }
  SUBCASE("unknown leading language is rejected") {
    CHECK_THROWS_AS(interleave_pair(corpus, pair, "de"), DataError);
  }
}

TEST_CASE("interleave_pair properties on random fixtures") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Corpus corpus = random_corpus(seed, 3, 6, 5);
    for (const auto& pair : corpus.alignment_pairs) {
      const TrainSequence seq = interleave_pair(corpus, pair, "en");
      const Story& en = corpus.story_at(pair.l1_index);
      const Story& fr = corpus.story_at(pair.l2_index);
      CHECK(static_cast<std::int64_t>(seq.tokens.size()) ==
            en.token_count() + fr.token_count());
      // spans tile the tokens exactly and alternate languages
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < seq.spans.size(); ++i) {
        CHECK(seq.spans[i].begin == cursor);
        cursor = seq.spans[i].end;
        if (i > 0) CHECK(seq.spans[i].lang != seq.spans[i - 1].lang);
      }
      CHECK(cursor == seq.tokens.size());
    }
  }
}

TEST_CASE("monolingual_sequence concatenates in index order") {
  const Corpus corpus = two_sentence_pair();
  const TrainSequence seq = monolingual_sequence(corpus.stories[0]);
  CHECK(seq.kind == SequenceKind::monolingual);
  CHECK(seq.tokens == std::vector<TokenId>{1, 2, 3, 4, 5});
  CHECK(static_cast<std::int64_t>(seq.tokens.size()) ==
        corpus.stories[0].token_count());

  Story single = corpus.stories[0];
  single.sentences.resize(1);
  CHECK(monolingual_sequence(single).tokens == std::vector<TokenId>{1, 2});
}

TEST_CASE("sample_stream ratio extremes and reproducibility") {
  const Corpus corpus = random_corpus(3, 4, 5, 4);

  SUBCASE("ratio 0 emits only monolingual sequences") {
    StreamSampler sampler(corpus, {0.0, 0.5, {}, 1});
    for (int i = 0; i < 200; ++i) {
      CHECK(sampler.next().kind == SequenceKind::monolingual);
    }
  }
  SUBCASE("ratio 1 emits only interleaved sequences") {
    StreamSampler sampler(corpus, {1.0, 0.5, {}, 1});
    for (int i = 0; i < 200; ++i) {
      CHECK(sampler.next().kind == SequenceKind::interleaved);
    }
  }
  SUBCASE("ratio 0.5 over 10000 draws lands in [0.48, 0.52]") {
    StreamSampler sampler(corpus, {0.5, 0.5, {}, 42});
    int interleaved = 0;
    for (int i = 0; i < 10000; ++i) {
      if (sampler.next().kind == SequenceKind::interleaved) ++interleaved;
    }
    const double frac = interleaved / 10000.0;
    CHECK(frac >= 0.48);
    CHECK(frac <= 0.52);
  }
  SUBCASE("same seed reproduces the draw sequence") {
    StreamSampler a(corpus, {0.5, 0.5, {}, 9});
    StreamSampler b(corpus, {0.5, 0.5, {}, 9});
    for (int i = 0; i < 100; ++i) {
      const TrainSequence sa = a.next();
      const TrainSequence sb = b.next();
      CHECK(sa.kind == sb.kind);
      CHECK(sa.tokens == sb.tokens);
      CHECK(sa.spans[0].story_id == sb.spans[0].story_id);
      CHECK(sa.spans[0].lang == sb.spans[0].lang);
    }
  }
  SUBCASE("language subset restricts monolingual draws") {
    StreamSampler sampler(corpus, {0.0, 0.5, {"fr"}, 5});
    for (int i = 0; i < 50; ++i) {
      CHECK(sampler.next().spans[0].lang == "fr");
    }
  }
  SUBCASE("interleaving without pairs is an error") {
    Corpus no_pairs = corpus;
    no_pairs.alignment_pairs.clear();
    CHECK_THROWS_AS(StreamSampler(no_pairs, {0.5, 0.5, {}, 1}), ConfigError);
  }
}

namespace {

TrainSequence mono_seq(int len, TokenId start, const std::string& lang) {
  TrainSequence seq;
  seq.kind = SequenceKind::monolingual;
  for (int i = 0; i < len; ++i) {
    seq.tokens.push_back((start + i) % 64);
  }
  seq.spans.push_back({"s", lang, 1, 0, seq.tokens.size()});
  return seq;
}

}  // namespace

TEST_CASE("pack splits overflow across rows without dropping tokens") {
  const std::vector<TrainSequence> stream = {mono_seq(1500, 0, "en"),
                                             mono_seq(1000, 7, "fr")};
  const PackedBatch batch = pack(stream, 2048);
  REQUIRE(batch.rows.size() == 1);
  CHECK(batch.rows[0].tokens.size() == 2048);
  CHECK(batch.carryover.size() == 452);
  // first 1500 tokens come from the first sequence, the rest from the second
  CHECK(batch.rows[0].tokens[1499] == stream[0].tokens[1499]);
  CHECK(batch.rows[0].tokens[1500] == stream[1].tokens[0]);
  CHECK(batch.carryover[0] == stream[1].tokens[548]);
  REQUIRE(batch.rows[0].lang_runs.size() == 2);
  CHECK(batch.rows[0].lang_runs[0].count == 1500);
  CHECK(batch.rows[0].lang_runs[1].count == 548);
}

TEST_CASE("pack: exact-fit sequence leaves no carryover") {
  const PackedBatch batch = pack({mono_seq(128, 0, "en")}, 128);
  REQUIRE(batch.rows.size() == 1);
  CHECK(batch.rows[0].tokens.size() == 128);
  CHECK(batch.carryover.empty());
}

TEST_CASE("pack conserves tokens on random streams") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TrainSequence> stream;
    std::size_t total = 0;
    const int n = 1 + static_cast<int>(rng.below(20));
    for (int i = 0; i < n; ++i) {
      const int len = 1 + static_cast<int>(rng.below(300));
      stream.push_back(mono_seq(len, static_cast<TokenId>(rng.below(64)),
                                i % 2 == 0 ? "en" : "fr"));
      total += static_cast<std::size_t>(len);
    }
    const int ctx = 2 + static_cast<int>(rng.below(200));
    const PackedBatch batch = pack(stream, ctx);
    std::size_t packed = batch.carryover.size();
    for (const auto& row : batch.rows) {
      CHECK(row.tokens.size() == static_cast<std::size_t>(ctx));
      packed += row.tokens.size();
    }
    CHECK(packed == total);
    // language runs account for every packed token
    std::size_t run_total = batch.carryover.size();
    for (const auto& row : batch.rows) {
      for (const auto& run : row.lang_runs) {
        run_total += static_cast<std::size_t>(run.count);
      }
    }
    CHECK(run_total == total);
  }
}

TEST_CASE("pack with BOS prefixes every row and counts toward context") {
  const PackedBatch batch = pack({mono_seq(300, 0, "en")}, 128, TokenId{99});
  REQUIRE(batch.rows.size() == 2);  // 2 * 127 payload + 46 carryover
  for (const auto& row : batch.rows) {
    CHECK(row.tokens.size() == 128);
    CHECK(row.tokens[0] == 99);
    int payload = 0;
    for (const auto& run : row.lang_runs) payload += run.count;
    CHECK(payload == 127);
  }
  CHECK(batch.carryover.size() == 300 - 2 * 127);
}

TEST_CASE("packer rejects context shorter than 2") {
  CHECK_THROWS_AS(Packer(1), ConfigError);
}
