#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xlslm/corpus.hpp"
#include "xlslm/model.hpp"

namespace xlslm {

struct AlignmentReport {
  std::vector<double> per_layer;  ///< mean cosine, layer 0 = embedding output
  double overall = 0.0;
  std::int64_t pair_count = 0;
  std::string pooling = "mean-in-context";
};

/// Mean of the layer's hidden states over token positions [begin, end).
Eigen::VectorXf sentence_embedding(const ForwardTrace& trace, std::size_t begin,
                                   std::size_t end, int layer);

/// Samples aligned sentence pairs, embeds each sentence from a forward pass
/// over its own monolingual story context, and reports the mean cosine
/// between the two languages per layer. Deterministic given the seed; if
/// fewer pairs exist than sample_n all of them are used.
AlignmentReport alignment_score(const ModelParams& params, const Corpus& corpus,
                                int sample_n = 1000, std::uint64_t seed = 0);

void save_alignment(const AlignmentReport& report,
                    const std::filesystem::path& path);
AlignmentReport load_alignment(const std::filesystem::path& path);

}  // namespace xlslm
