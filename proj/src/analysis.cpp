#include "xlslm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "xlslm/errors.hpp"
#include "xlslm/interleave.hpp"
#include "xlslm/rng.hpp"

namespace xlslm {

using nlohmann::json;

Eigen::VectorXf sentence_embedding(const ForwardTrace& trace, std::size_t begin,
                                   std::size_t end, int layer) {
  if (layer < 0 || layer >= static_cast<int>(trace.hidden.size())) {
    throw DataError("layer index out of range: " + std::to_string(layer));
  }
  const auto& h = trace.hidden[static_cast<std::size_t>(layer)];
  if (begin >= end || end > static_cast<std::size_t>(h.rows())) {
    throw DataError("empty or out-of-range sentence span");
  }
  Eigen::VectorXf sum = Eigen::VectorXf::Zero(h.cols());
  for (std::size_t i = begin; i < end; ++i) {
    sum += h.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return sum / static_cast<float>(end - begin);
}

namespace {

double cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return static_cast<double>(a.dot(b)) / (na * nb);
}

/// Token offset of each sentence inside the monolingual concatenation.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(
    const Story& story) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t offset = 0;
  for (const auto& s : story.sentences) {
    spans.push_back({offset, offset + s.units.size()});
    offset += s.units.size();
  }
  return spans;
}

}  // namespace

AlignmentReport alignment_score(const ModelParams& params, const Corpus& corpus,
                                int sample_n, std::uint64_t seed) {
  const std::size_t ctx = static_cast<std::size_t>(params.config.context_len);

  // Candidate (pair, sentence) indices whose spans fit the context window on
  // both sides.
  std::vector<std::pair<std::size_t, int>> candidates;
  for (std::size_t pi = 0; pi < corpus.alignment_pairs.size(); ++pi) {
    const auto& pair = corpus.alignment_pairs[pi];
    const Story& a = corpus.story_at(pair.l1_index);
    const Story& b = corpus.story_at(pair.l2_index);
    if (a.sentences.size() != b.sentences.size()) continue;
    const auto spans_a = sentence_spans(a);
    const auto spans_b = sentence_spans(b);
    for (std::size_t j = 0; j < a.sentences.size(); ++j) {
      if (spans_a[j].second <= ctx && spans_b[j].second <= ctx) {
        candidates.push_back({pi, static_cast<int>(j)});
      }
    }
  }
  if (candidates.empty()) {
    throw DataError("no aligned sentence pairs fit the context window");
  }

  const std::size_t want = std::min<std::size_t>(
      candidates.size(), static_cast<std::size_t>(std::max(sample_n, 1)));
  Rng rng(seed);
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.below(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(want);

  // One forward pass per story: group the sampled sentences by pair.
  std::map<std::size_t, std::vector<int>> by_pair;
  for (const auto& [pi, j] : candidates) by_pair[pi].push_back(j);

  const int layer_count = params.config.layers + 1;
  std::vector<double> layer_sum(static_cast<std::size_t>(layer_count), 0.0);
  std::int64_t counted = 0;

  for (const auto& [pi, sentence_ids] : by_pair) {
    const auto& pair = corpus.alignment_pairs[pi];
    const Story& a = corpus.story_at(pair.l1_index);
    const Story& b = corpus.story_at(pair.l2_index);
    const auto spans_a = sentence_spans(a);
    const auto spans_b = sentence_spans(b);

    TrainSequence seq_a = monolingual_sequence(a);
    TrainSequence seq_b = monolingual_sequence(b);
    if (seq_a.tokens.size() > ctx) seq_a.tokens.resize(ctx);
    if (seq_b.tokens.size() > ctx) seq_b.tokens.resize(ctx);
    const ForwardTrace trace_a = forward<float>(params, seq_a.tokens);
    const ForwardTrace trace_b = forward<float>(params, seq_b.tokens);

    for (int j : sentence_ids) {
      for (int layer = 0; layer < layer_count; ++layer) {
        const Eigen::VectorXf ea = sentence_embedding(
            trace_a, spans_a[j].first, spans_a[j].second, layer);
        const Eigen::VectorXf eb = sentence_embedding(
            trace_b, spans_b[j].first, spans_b[j].second, layer);
        layer_sum[static_cast<std::size_t>(layer)] += cosine(ea, eb);
      }
      counted += 1;
    }
  }

  AlignmentReport report;
  report.pair_count = counted;
  report.per_layer.resize(static_cast<std::size_t>(layer_count));
  double total = 0.0;
  for (int layer = 0; layer < layer_count; ++layer) {
    report.per_layer[layer] = layer_sum[layer] / static_cast<double>(counted);
    total += report.per_layer[layer];
  }
  report.overall = total / static_cast<double>(layer_count);
  return report;
}

void save_alignment(const AlignmentReport& report,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t layer = 0; layer < report.per_layer.size(); ++layer) {
    json rec;
    rec["layer"] = layer;
    rec["mean_cosine"] = report.per_layer[layer];
    out << rec.dump() << '\n';
  }
  json tail;
  tail["summary"] = true;
  tail["overall"] = report.overall;
  tail["pairs"] = report.pair_count;
  tail["pooling"] = report.pooling;
  out << tail.dump() << '\n';
}

AlignmentReport load_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  AlignmentReport report;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    if (rec.value("summary", false)) {
      report.overall = rec.at("overall").get<double>();
      report.pair_count = rec.at("pairs").get<std::int64_t>();
      report.pooling = rec.value("pooling", "mean-in-context");
    } else {
      const auto layer = rec.at("layer").get<std::size_t>();
      if (report.per_layer.size() <= layer) report.per_layer.resize(layer + 1);
      report.per_layer[layer] = rec.at("mean_cosine").get<double>();
    }
  }
  return report;
}

}  // namespace xlslm
