#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xlslm/corpus.hpp"
#include "xlslm/interleave.hpp"
#include "xlslm/model.hpp"

namespace xlslm {

struct OptimConfig {
  double peak_lr = 5e-4;
  double warmup_frac = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 0.1;
  double grad_clip_norm = 1.0;
  double eps = 1e-8;

  void validate() const;
};

/// Linear warm-up over the first ceil(warmup_frac * total) steps to peak_lr,
/// then linear decay to exactly 0 at step == total_steps. Steps are 1-based.
double lr_at(std::int64_t step, std::int64_t total_steps,
             const OptimConfig& opt);

/// Scales gradients so the global L2 norm is at most max_norm; returns the
/// pre-clip norm. Throws NumericError on non-finite gradients.
template <typename S>
double clip_gradients(GradientsT<S>& grads, double max_norm);

/// Adam with decoupled weight decay applied before the adaptive update;
/// norm gains are excluded from decay.
template <typename S>
class AdamT {
 public:
  AdamT(const ModelParamsT<S>& params, const OptimConfig& opt);

  void step(ModelParamsT<S>& params, const GradientsT<S>& grads, double lr);
  std::int64_t step_count() const { return t_; }

 private:
  OptimConfig opt_;
  std::vector<S> m_, v_;
  std::vector<std::uint8_t> decay_;
  std::int64_t t_ = 0;
};

using Adam = AdamT<float>;

extern template class AdamT<float>;
extern template class AdamT<double>;
extern template double clip_gradients<float>(GradientsT<float>&, double);
extern template double clip_gradients<double>(GradientsT<double>&, double);

struct StageConfig {
  std::string name;
  std::int64_t steps = 0;            ///< 0 means derive from declared_tokens
  std::int64_t declared_tokens = 0;
  double interleave_ratio = 0.0;
  double lang_probability = 0.5;
  std::vector<std::string> langs;    ///< monolingual subset; empty = all
};

struct ArmConfig {
  std::string name;
  std::vector<StageConfig> stages;
};

/// Per-(stage, language) consumed token counts, monotone during training.
class TokenBudgetLedger {
 public:
  void add(const std::string& stage, const std::string& lang, std::int64_t n);
  std::int64_t total(const std::string& lang) const;
  std::int64_t grand_total() const;
  const std::map<std::string, std::map<std::string, std::int64_t>>& by_stage()
      const {
    return by_stage_;
  }
  void save(const std::filesystem::path& path) const;
  static TokenBudgetLedger load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::map<std::string, std::int64_t>> by_stage_;
};

struct StepMetrics {
  std::int64_t step = 0;  ///< 1-based across the arm
  std::string stage;
  double lr = 0.0;
  double loss_sum = 0.0;
  double loss_mean = 0.0;
  std::map<std::string, std::int64_t> tokens_per_lang;
};

/// Append-only JSONL metrics log.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const StepMetrics& m);

 private:
  std::ofstream out_;
};

struct TrainOptions {
  int batch_rows = 16;
  bool restart_schedule = true;  ///< each stage gets its own warmup/decay
  std::uint64_t seed = 0;
  int echo_every = 0;  ///< progress lines to stderr, 0 = silent
};

struct StageRunResult {
  std::int64_t steps = 0;
  double first_loss_mean = 0.0;
  double last_loss_mean = 0.0;
  double tail_loss_mean = 0.0;  ///< mean over the final 100 steps (or fewer)
};

std::int64_t resolve_stage_steps(const StageConfig& stage,
                                 std::int64_t batch_payload_tokens);

/// One stage of training: sample, pack, forward/backward, clip, Adam step,
/// with the schedule either restarted per stage or spanning lr_total steps
/// from lr_offset. Updates the ledger per batch from packed-row language
/// runs. Fully reproducible given the seed.
StageRunResult run_stage(const StageConfig& stage, const OptimConfig& optim,
                         ModelParams& params, Adam& adam, const Corpus& corpus,
                         const TrainOptions& opts, TokenBudgetLedger& ledger,
                         MetricsWriter* metrics, std::int64_t lr_offset,
                         std::int64_t lr_total,
                         std::int64_t step_offset = 0);

struct ArmResult {
  std::string name;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_path;
  TokenBudgetLedger ledger;
  std::int64_t declared_tokens = 0;
  double final_loss_mean = 0.0;
};

/// Runs every arm under a shared model/optimizer configuration and a
/// matched declared token budget (validated to within one batch), writing
/// checkpoints, metrics logs, and ledgers under out_dir/arms/<name>/.
std::vector<ArmResult> run_pipeline(const std::vector<ArmConfig>& arms,
                                    const ModelConfig& model_cfg,
                                    const OptimConfig& optim,
                                    const TrainOptions& opts,
                                    const Corpus& corpus,
                                    const std::filesystem::path& out_dir);

}  // namespace xlslm
