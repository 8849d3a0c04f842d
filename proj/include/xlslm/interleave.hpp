#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "xlslm/corpus.hpp"
#include "xlslm/rng.hpp"

namespace xlslm {

/// Origin of a contiguous token span inside a training sequence.
struct ProvenanceSpan {
  std::string story_id;
  std::string lang;
  int sentence_idx = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // [begin, end)
};

enum class SequenceKind { monolingual, interleaved };

struct TrainSequence {
  std::vector<TokenId> tokens;
  std::vector<ProvenanceSpan> spans;
  SequenceKind kind = SequenceKind::monolingual;
};

/// Sentence-level alternation of an aligned pair, leading language first:
/// lead_1, other_1, lead_2, other_2, ... with no separator tokens.
TrainSequence interleave_pair(const Corpus& corpus, const AlignedStoryPair& pair,
                              const std::string& leading_lang);

TrainSequence monolingual_sequence(const Story& story);

struct StreamOptions {
  double interleave_ratio = 0.0;
  /// Probability of drawing the first eligible language for monolingual
  /// sequences; any remaining languages split the rest uniformly.
  double lang_probability = 0.5;
  /// Languages eligible for monolingual draws; empty means all.
  std::vector<std::string> langs;
  std::uint64_t seed = 0;
};

/// Deterministic with-replacement sampler over stories and aligned pairs.
class StreamSampler {
 public:
  StreamSampler(const Corpus& corpus, StreamOptions opts);
  TrainSequence next();

 private:
  const Corpus* corpus_;
  StreamOptions opts_;
  Rng rng_;
  std::vector<std::string> langs_;
  std::vector<std::vector<std::size_t>> stories_per_lang_;
};

/// One language with a token run length inside a packed row; used for
/// per-language budget accounting after packing.
struct LangRun {
  std::string lang;
  int count = 0;
};

struct PackedRow {
  std::vector<TokenId> tokens;
  std::vector<LangRun> lang_runs;  ///< cover the payload (not the BOS prefix)
};

struct PackedBatch {
  std::vector<PackedRow> rows;
  std::vector<TokenId> carryover;
  std::vector<LangRun> carryover_runs;
};

/// Concatenates training sequences into rows of exactly `context_len`
/// tokens. A sequence that overflows a row continues in the next one; no
/// token is dropped. With a BOS id set, each row is prefixed by BOS which
/// counts toward context_len.
class Packer {
 public:
  explicit Packer(int context_len,
                  std::optional<TokenId> bos = std::nullopt);

  void feed(const TrainSequence& seq);
  bool row_ready() const { return !ready_.empty(); }
  PackedRow pop_row();

  const std::vector<TokenId>& pending_tokens() const { return pending_; }
  const std::vector<LangRun>& pending_runs() const { return pending_runs_; }

 private:
  void append(const TokenId* data, int count, const std::string& lang);

  int context_len_;
  int payload_capacity_;
  std::optional<TokenId> bos_;
  std::deque<PackedRow> ready_;
  std::vector<TokenId> pending_;
  std::vector<LangRun> pending_runs_;
};

/// Packs a whole stream at once; the final unfinished row becomes the
/// carryover.
PackedBatch pack(const std::vector<TrainSequence>& stream, int context_len,
                 std::optional<TokenId> bos = std::nullopt);

}  // namespace xlslm
