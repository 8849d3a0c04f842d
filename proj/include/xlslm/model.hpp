#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xlslm/corpus.hpp"

namespace xlslm {

template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int vocab_size = 2048;  ///< embedding rows; includes BOS when enabled
  int embed_dim = 128;
  int layers = 2;
  int heads = 4;
  int ff_mult = 4;
  int context_len = 2048;
  std::uint64_t init_seed = 0;

  int head_dim() const { return embed_dim / heads; }
  int ff_dim() const { return ff_mult * embed_dim; }
  void validate() const;
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  bool weight_decay = true;  ///< norm gains are excluded from decay
};

/// All weights live in one flat buffer; named tensors are row-major views
/// into it. The flat layout is what the optimizer, gradient clipping, the
/// checkpoint format, and the finite-difference tests operate on.
template <typename S>
class ModelParamsT {
 public:
  ModelParamsT() = default;
  explicit ModelParamsT(const ModelConfig& cfg);

  ModelConfig config;
  std::vector<S> values;

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::int64_t parameter_count() const {
    return static_cast<std::int64_t>(values.size());
  }

  Eigen::Map<MatrixX<S>> tensor(const TensorInfo& info) {
    return {values.data() + info.offset, info.rows, info.cols};
  }
  Eigen::Map<const MatrixX<S>> tensor(const TensorInfo& info) const {
    return {values.data() + info.offset, info.rows, info.cols};
  }
  Eigen::Map<MatrixX<S>> tensor(const std::string& name);
  Eigen::Map<const MatrixX<S>> tensor(const std::string& name) const;

  // Named views. Activations are row vectors, so x @ W throughout.
  Eigen::Map<const MatrixX<S>> embedding() const { return tensor("embedding"); }
  Eigen::Map<const MatrixX<S>> pos_table() const { return tensor("pos_table"); }
  Eigen::Map<const MatrixX<S>> wq(int l) const { return tensor(block_name(l, "wq")); }
  Eigen::Map<const MatrixX<S>> wk(int l) const { return tensor(block_name(l, "wk")); }
  Eigen::Map<const MatrixX<S>> wv(int l) const { return tensor(block_name(l, "wv")); }
  Eigen::Map<const MatrixX<S>> wo(int l) const { return tensor(block_name(l, "wo")); }
  Eigen::Map<const MatrixX<S>> w1(int l) const { return tensor(block_name(l, "w1")); }
  Eigen::Map<const MatrixX<S>> w2(int l) const { return tensor(block_name(l, "w2")); }
  Eigen::Map<const MatrixX<S>> ln1_gain(int l) const { return tensor(block_name(l, "ln1_gain")); }
  Eigen::Map<const MatrixX<S>> ln2_gain(int l) const { return tensor(block_name(l, "ln2_gain")); }
  Eigen::Map<const MatrixX<S>> final_gain() const { return tensor("final_gain"); }
  Eigen::Map<const MatrixX<S>> output_proj() const { return tensor("output_proj"); }

  static std::string block_name(int l, const char* part) {
    return "block" + std::to_string(l) + "." + part;
  }

  template <typename T>
  ModelParamsT<T> cast() const {
    ModelParamsT<T> out(config);
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.values[i] = static_cast<T>(values[i]);
    }
    return out;
  }

 private:
  std::vector<TensorInfo> tensors_;
};

using ModelParams = ModelParamsT<float>;

template <typename S>
struct GradientsT {
  std::vector<S> values;

  GradientsT() = default;
  explicit GradientsT(std::size_t n) : values(n, S(0)) {}
  void zero() { std::fill(values.begin(), values.end(), S(0)); }
  double squared_norm() const {
    double acc = 0.0;
    for (S v : values) acc += static_cast<double>(v) * static_cast<double>(v);
    return acc;
  }
};

using Gradients = GradientsT<float>;

/// Hidden states per layer (0 = embedding output, 1..m = block outputs)
/// plus the final logits.
template <typename S>
struct ForwardTraceT {
  std::vector<MatrixX<S>> hidden;
  MatrixX<S> logits;
};

using ForwardTrace = ForwardTraceT<float>;

struct NllResult {
  double sum = 0.0;
  double mean = 0.0;
  std::int64_t count = 0;
};

/// Deterministic init given config.init_seed: N(0, 0.02) weights with the
/// residual output projections of each block scaled by 1/sqrt(2m), norm
/// gains at 1. Draws happen in double and are cast to S, so float and
/// double instantiations share the same underlying values.
template <typename S>
ModelParamsT<S> init_params(const ModelConfig& cfg);

template <typename S>
ForwardTraceT<S> forward(const ModelParamsT<S>& params,
                         std::span<const TokenId> tokens);

/// Negative log-likelihood of `targets` under rowwise softmax of `logits`.
/// targets[i] < 0 masks position i out. Throws DataError if everything is
/// masked.
template <typename S>
NllResult nll(const MatrixX<S>& logits, std::span<const TokenId> targets);

/// Exact gradients of the per-token mean NLL, accumulated into `grads`
/// (caller zeroes). Set `sum_loss` to accumulate the gradient of the
/// unscaled sum instead, which is what the batched training loop uses
/// before dividing by the total unmasked count.
template <typename S>
NllResult backward(const ModelParamsT<S>& params,
                   std::span<const TokenId> tokens,
                   std::span<const TokenId> targets, GradientsT<S>& grads,
                   bool sum_loss = false);

/// Log-probability of `continuation` given `prompt`, summed over
/// continuation positions. When the prompt is empty the first continuation
/// token has no conditioning context and is skipped. `normalize` divides by
/// the number of scored positions.
template <typename S>
double sequence_logprob(const ModelParamsT<S>& params,
                        std::span<const TokenId> prompt,
                        std::span<const TokenId> continuation,
                        bool normalize = false);

/// Closed-form parameter count for a config; the layout must agree.
std::int64_t expected_parameter_count(const ModelConfig& cfg);

// Checkpoint container: "XLSM" magic, version, config, seed, then a named
// tensor registry of row-major little-endian f32 payloads. Round-trips
// bit-exactly.
void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path, std::uint64_t seed);
ModelParams load_checkpoint(const std::filesystem::path& path,
                            std::uint64_t* seed_out = nullptr);

extern template class ModelParamsT<float>;
extern template class ModelParamsT<double>;
extern template ModelParamsT<float> init_params<float>(const ModelConfig&);
extern template ModelParamsT<double> init_params<double>(const ModelConfig&);
extern template ForwardTraceT<float> forward<float>(
    const ModelParamsT<float>&, std::span<const TokenId>);
extern template ForwardTraceT<double> forward<double>(
    const ModelParamsT<double>&, std::span<const TokenId>);
extern template NllResult nll<float>(const MatrixX<float>&,
                                     std::span<const TokenId>);
extern template NllResult nll<double>(const MatrixX<double>&,
                                      std::span<const TokenId>);
extern template NllResult backward<float>(const ModelParamsT<float>&,
                                          std::span<const TokenId>,
                                          std::span<const TokenId>,
                                          GradientsT<float>&, bool);
extern template NllResult backward<double>(const ModelParamsT<double>&,
                                           std::span<const TokenId>,
                                           std::span<const TokenId>,
                                           GradientsT<double>&, bool);
extern template double sequence_logprob<float>(const ModelParamsT<float>&,
                                               std::span<const TokenId>,
                                               std::span<const TokenId>, bool);
extern template double sequence_logprob<double>(const ModelParamsT<double>&,
                                                std::span<const TokenId>,
                                                std::span<const TokenId>, bool);

}  // namespace xlslm
