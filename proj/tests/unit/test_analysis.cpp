#include "doctest.h"

#include <cmath>

#include "xlslm/analysis.hpp"
#include "xlslm/errors.hpp"
#include "xlslm/synthlang.hpp"

using namespace xlslm;

namespace {

ModelConfig analysis_model_config() {
  ModelConfig cfg;
  cfg.vocab_size = 64;
  cfg.embed_dim = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.context_len = 64;
  cfg.init_seed = 2;
  return cfg;
}

Corpus synth_corpus(std::uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.concept_count = 12;
  cfg.units_per_concept = 2;
  cfg.sentence_len = 3;
  cfg.sentences_per_story = 4;
  cfg.story_count = 6;
  cfg.vocab.size = 64;
  cfg.seed = seed;
  return SynthLanguage(cfg).generate_parallel_corpus();
}

}  // namespace

TEST_CASE("sentence_embedding pools the requested span") {
  ForwardTrace trace;
  MatrixX<float> h(3, 4);
  h << 1, 2, 3, 4,
       5, 6, 7, 8,
       9, 10, 11, 12;
  trace.hidden.push_back(h);

  SUBCASE("single position returns that hidden state") {
    const auto e = sentence_embedding(trace, 1, 2, 0);
    CHECK(e(0) == 5.0f);
    CHECK(e(3) == 8.0f);
  }
  SUBCASE("constant rows pool to the constant") {
    MatrixX<float> c = MatrixX<float>::Constant(3, 4, 2.5f);
    ForwardTrace t2;
    t2.hidden.push_back(c);
    const auto e = sentence_embedding(t2, 0, 3, 0);
    for (int i = 0; i < 4; ++i) CHECK(e(i) == 2.5f);
  }
  SUBCASE("matches a straight-line average recomputation") {
    const auto e = sentence_embedding(trace, 0, 3, 0);
    for (int c = 0; c < 4; ++c) {
      float sum = 0.0f;
      for (int r = 0; r < 3; ++r) sum += h(r, c);
      CHECK(e(c) == doctest::Approx(sum / 3.0f).epsilon(1e-12));
    }
  }
  SUBCASE("empty span is an error") {
    CHECK_THROWS_AS(sentence_embedding(trace, 2, 2, 0), DataError);
    CHECK_THROWS_AS(sentence_embedding(trace, 0, 4, 0), DataError);
    CHECK_THROWS_AS(sentence_embedding(trace, 0, 1, 5), DataError);
  }
}

TEST_CASE("orthogonal embeddings have zero cosine") {
  ForwardTrace trace;
  MatrixX<float> h = MatrixX<float>::Zero(2, 4);
  h(0, 0) = 1.0f;
  h(1, 1) = 1.0f;
  trace.hidden.push_back(h);
  const auto a = sentence_embedding(trace, 0, 1, 0);
  const auto b = sentence_embedding(trace, 1, 2, 0);
  CHECK(a.dot(b) == 0.0f);
}

TEST_CASE("identical aligned texts give cosine 1 at every layer") {
  // two languages with byte-identical unit sequences: the forward passes
  // coincide, so every pooled pair must be perfectly aligned
  Corpus corpus;
  corpus.vocab.size = 64;
  corpus.languages = {"en", "fr"};
  Story en{"s", "en", {{"s", "en", 1, {1, 2, 3}}, {"s", "en", 2, {4, 5}}}};
  Story fr{"s", "fr", {{"s", "fr", 1, {1, 2, 3}}, {"s", "fr", 2, {4, 5}}}};
  corpus.stories = {en, fr};
  corpus.reindex();
  corpus.alignment_pairs = {{0, 1}};

  const auto params = init_params<float>(analysis_model_config());
  const auto report = alignment_score(params, corpus, 10, 1);
  CHECK(report.pair_count == 2);
  REQUIRE(report.per_layer.size() == 3);
  for (double c : report.per_layer) CHECK(c == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(report.overall == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("alignment_score is deterministic and respects sample_n") {
  const Corpus corpus = synth_corpus();
  const auto params = init_params<float>(analysis_model_config());

  const auto a = alignment_score(params, corpus, 5, 42);
  const auto b = alignment_score(params, corpus, 5, 42);
  CHECK(a.pair_count == 5);
  CHECK(a.per_layer == b.per_layer);
  CHECK(a.overall == b.overall);

  const auto c = alignment_score(params, corpus, 5, 43);
  CHECK(a.per_layer != c.per_layer);

  // more requested than available: uses all and records the actual count
  const auto all = alignment_score(params, corpus, 100000, 1);
  CHECK(all.pair_count == 6 * 4);
}

TEST_CASE("cosines are invariant to scaling one side's hidden states") {
  // cosine(a, s*b) == cosine(a, b) for s > 0; checked through the pooled
  // embeddings directly
  ForwardTrace trace;
  MatrixX<float> h(2, 4);
  h << 1, 2, 3, 4, 5, 6, 7, 8;
  trace.hidden.push_back(h);
  ForwardTrace scaled;
  scaled.hidden.push_back(MatrixX<float>(3.7f * h));

  const auto a = sentence_embedding(trace, 0, 1, 0);
  const auto b = sentence_embedding(trace, 1, 2, 0);
  const auto b_scaled = sentence_embedding(scaled, 1, 2, 0);

  const double cos_plain =
      a.dot(b) / (a.norm() * b.norm());
  const double cos_scaled =
      a.dot(b_scaled) / (a.norm() * b_scaled.norm());
  CHECK(cos_plain == doctest::Approx(cos_scaled).epsilon(1e-6));
}

TEST_CASE("alignment report round-trips through its file format") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "xlslm_tests" / "align";
  fs::create_directories(dir);

  AlignmentReport report;
  report.per_layer = {0.1, 0.5, 0.9};
  report.overall = 0.5;
  report.pair_count = 17;
  save_alignment(report, dir / "a.jsonl");
  const auto loaded = load_alignment(dir / "a.jsonl");
  CHECK(loaded.per_layer == report.per_layer);
  CHECK(loaded.overall == report.overall);
  CHECK(loaded.pair_count == 17);
  CHECK(loaded.pooling == "mean-in-context");
}
