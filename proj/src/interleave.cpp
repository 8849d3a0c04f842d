#include "xlslm/interleave.hpp"

#include <algorithm>

#include "xlslm/errors.hpp"

namespace xlslm {

namespace {

void append_sentence(TrainSequence& seq, const UnitSentence& s) {
  const std::size_t begin = seq.tokens.size();
  seq.tokens.insert(seq.tokens.end(), s.units.begin(), s.units.end());
  seq.spans.push_back({s.story_id, s.lang, s.idx, begin, seq.tokens.size()});
}

}  // namespace

TrainSequence interleave_pair(const Corpus& corpus, const AlignedStoryPair& pair,
                              const std::string& leading_lang) {
  const Story& a = corpus.story_at(pair.l1_index);
  const Story& b = corpus.story_at(pair.l2_index);
  ValidationReport report = validate_alignment(a, b);
  if (!report.ok()) {
    throw DataError("invalid alignment pair " + a.story_id + ": " +
                    report.violations.front());
  }
  const Story* lead = nullptr;
  const Story* other = nullptr;
  if (a.lang == leading_lang) {
    lead = &a;
    other = &b;
  } else if (b.lang == leading_lang) {
    lead = &b;
    other = &a;
  } else {
    throw DataError("leading language '" + leading_lang +
                    "' not part of pair " + a.lang + "/" + b.lang);
  }

  TrainSequence seq;
  seq.kind = SequenceKind::interleaved;
  for (std::size_t j = 0; j < lead->sentences.size(); ++j) {
    append_sentence(seq, lead->sentences[j]);
    append_sentence(seq, other->sentences[j]);
  }
  return seq;
}

TrainSequence monolingual_sequence(const Story& story) {
  TrainSequence seq;
  seq.kind = SequenceKind::monolingual;
  for (const auto& s : story.sentences) append_sentence(seq, s);
  return seq;
}

StreamSampler::StreamSampler(const Corpus& corpus, StreamOptions opts)
    : corpus_(&corpus), opts_(opts), rng_(opts.seed) {
  if (opts_.interleave_ratio < 0.0 || opts_.interleave_ratio > 1.0 ||
      opts_.lang_probability < 0.0 || opts_.lang_probability > 1.0) {
    throw ConfigError("stream ratios must lie in [0, 1]");
  }
  langs_ = opts_.langs.empty() ? corpus.languages : opts_.langs;
  for (const auto& lang : langs_) {
    const auto& ids = corpus.stories_of(lang);
    if (ids.empty()) {
      throw DataError("no stories available for language '" + lang + "'");
    }
    stories_per_lang_.push_back(ids);
  }
  if (langs_.empty()) throw DataError("corpus has no languages");
  if (opts_.interleave_ratio > 0.0 && corpus.alignment_pairs.empty()) {
    throw ConfigError("interleave_ratio > 0 requires at least one aligned pair");
  }
}

TrainSequence StreamSampler::next() {
  if (opts_.interleave_ratio > 0.0 &&
      rng_.uniform01() < opts_.interleave_ratio) {
    const auto& pairs = corpus_->alignment_pairs;
    const auto& pair = pairs[rng_.below(pairs.size())];
    // Fair coin for the leading side.
    const bool lead_first = rng_.bernoulli(0.5);
    const std::string& lead = lead_first
                                  ? corpus_->story_at(pair.l1_index).lang
                                  : corpus_->story_at(pair.l2_index).lang;
    return interleave_pair(*corpus_, pair, lead);
  }

  std::size_t lang_idx = 0;
  if (langs_.size() > 1) {
    if (rng_.bernoulli(opts_.lang_probability)) {
      lang_idx = 0;
    } else {
      lang_idx = 1 + rng_.below(langs_.size() - 1);
    }
  }
  const auto& ids = stories_per_lang_[lang_idx];
  return monolingual_sequence(corpus_->story_at(ids[rng_.below(ids.size())]));
}

Packer::Packer(int context_len, std::optional<TokenId> bos)
    : context_len_(context_len),
      payload_capacity_(context_len - (bos.has_value() ? 1 : 0)),
      bos_(bos) {
  if (context_len < 2) throw ConfigError("context_len must be >= 2");
}

void Packer::append(const TokenId* data, int count, const std::string& lang) {
  int written = 0;
  while (written < count) {
    const int space = payload_capacity_ - static_cast<int>(pending_.size());
    const int take = std::min(space, count - written);
    pending_.insert(pending_.end(), data + written, data + written + take);
    if (!pending_runs_.empty() && pending_runs_.back().lang == lang) {
      pending_runs_.back().count += take;
    } else {
      pending_runs_.push_back({lang, take});
    }
    written += take;
    if (static_cast<int>(pending_.size()) == payload_capacity_) {
      PackedRow row;
      if (bos_.has_value()) row.tokens.push_back(*bos_);
      row.tokens.insert(row.tokens.end(), pending_.begin(), pending_.end());
      row.lang_runs = std::move(pending_runs_);
      ready_.push_back(std::move(row));
      pending_.clear();
      pending_runs_ = {};
    }
  }
}

void Packer::feed(const TrainSequence& seq) {
  for (const auto& span : seq.spans) {
    append(seq.tokens.data() + span.begin,
           static_cast<int>(span.end - span.begin), span.lang);
  }
}

PackedRow Packer::pop_row() {
  if (ready_.empty()) throw DataError("no packed row available");
  PackedRow row = std::move(ready_.front());
  ready_.pop_front();
  return row;
}

PackedBatch pack(const std::vector<TrainSequence>& stream, int context_len,
                 std::optional<TokenId> bos) {
  Packer packer(context_len, bos);
  PackedBatch batch;
  for (const auto& seq : stream) {
    packer.feed(seq);
    while (packer.row_ready()) batch.rows.push_back(packer.pop_row());
  }
  batch.carryover = packer.pending_tokens();
  batch.carryover_runs = packer.pending_runs();
  return batch;
}

}  // namespace xlslm
