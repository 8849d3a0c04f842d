#include "xlslm/train.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "xlslm/errors.hpp"
#include "xlslm/rng.hpp"

namespace xlslm {

using nlohmann::json;

void OptimConfig::validate() const {
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in (0, 1)");
  }
  if (grad_clip_norm <= 0.0) throw ConfigError("grad_clip_norm must be positive");
  if (warmup_frac <= 0.0 || warmup_frac >= 1.0) {
    throw ConfigError("warmup_frac must lie in (0, 1)");
  }
  if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
  if (eps <= 0.0) throw ConfigError("adam eps must be positive");
}

double lr_at(std::int64_t step, std::int64_t total_steps,
             const OptimConfig& opt) {
  if (step < 1 || step > total_steps) {
    throw ConfigError("lr step " + std::to_string(step) +
                      " out of range [1, " + std::to_string(total_steps) + "]");
  }
  // ceil with a guard against floating round-up at integer boundaries
  auto warmup = static_cast<std::int64_t>(
      std::ceil(opt.warmup_frac * static_cast<double>(total_steps) - 1e-9));
  warmup = std::max<std::int64_t>(warmup, 1);
  if (step <= warmup) {
    return opt.peak_lr * static_cast<double>(step) /
           static_cast<double>(warmup);
  }
  return opt.peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

template <typename S>
double clip_gradients(GradientsT<S>& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (!std::isfinite(norm)) {
    throw NumericError("non-finite gradient norm: " + std::to_string(norm));
  }
  if (norm > max_norm) {
    const S factor = static_cast<S>(max_norm / norm);
    for (S& g : grads.values) g *= factor;
  }
  return norm;
}

template <typename S>
AdamT<S>::AdamT(const ModelParamsT<S>& params, const OptimConfig& opt)
    : opt_(opt),
      m_(params.values.size(), S(0)),
      v_(params.values.size(), S(0)),
      decay_(params.values.size(), 1) {
  opt_.validate();
  for (const auto& t : params.tensors()) {
    if (t.weight_decay) continue;
    const std::size_t n =
        static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols);
    std::fill(decay_.begin() + t.offset, decay_.begin() + t.offset + n,
              std::uint8_t{0});
  }
}

template <typename S>
void AdamT<S>::step(ModelParamsT<S>& params, const GradientsT<S>& grads,
                    double lr) {
  if (grads.values.size() != params.values.size()) {
    throw DataError("gradient shape mismatch in adam step");
  }
  t_ += 1;
  const S b1 = static_cast<S>(opt_.beta1);
  const S b2 = static_cast<S>(opt_.beta2);
  const S bc1 = static_cast<S>(1.0 - std::pow(opt_.beta1, t_));
  const S bc2 = static_cast<S>(1.0 - std::pow(opt_.beta2, t_));
  const S lr_s = static_cast<S>(lr);
  const S decay = static_cast<S>(lr * opt_.weight_decay);
  const S eps = static_cast<S>(opt_.eps);

  for (std::size_t i = 0; i < params.values.size(); ++i) {
    S& p = params.values[i];
    const S g = grads.values[i];
    if (decay_[i] != 0) p -= decay * p;
    m_[i] = b1 * m_[i] + (S(1) - b1) * g;
    v_[i] = b2 * v_[i] + (S(1) - b2) * g * g;
    const S m_hat = m_[i] / bc1;
    const S v_hat = v_[i] / bc2;
    p -= lr_s * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template class AdamT<float>;
template class AdamT<double>;
template double clip_gradients<float>(GradientsT<float>&, double);
template double clip_gradients<double>(GradientsT<double>&, double);

void TokenBudgetLedger::add(const std::string& stage, const std::string& lang,
                            std::int64_t n) {
  if (n < 0) throw DataError("ledger counts are monotone, got negative add");
  by_stage_[stage][lang] += n;
}

std::int64_t TokenBudgetLedger::total(const std::string& lang) const {
  std::int64_t n = 0;
  for (const auto& [stage, langs] : by_stage_) {
    auto it = langs.find(lang);
    if (it != langs.end()) n += it->second;
  }
  return n;
}

std::int64_t TokenBudgetLedger::grand_total() const {
  std::int64_t n = 0;
  for (const auto& [stage, langs] : by_stage_) {
    for (const auto& [lang, count] : langs) n += count;
  }
  return n;
}

void TokenBudgetLedger::save(const std::filesystem::path& path) const {
  json stages = json::object();
  json totals = json::object();
  for (const auto& [stage, langs] : by_stage_) {
    json rec = json::object();
    for (const auto& [lang, count] : langs) {
      rec[lang] = count;
      totals[lang] = totals.value(lang, std::int64_t{0}) + count;
    }
    stages[stage] = rec;
  }
  json out;
  out["stages"] = stages;
  out["totals"] = totals;
  out["total"] = grand_total();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << out.dump(2) << '\n';
}

TokenBudgetLedger TokenBudgetLedger::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  json in;
  f >> in;
  TokenBudgetLedger ledger;
  for (const auto& [stage, langs] : in.at("stages").items()) {
    for (const auto& [lang, count] : langs.items()) {
      ledger.add(stage, lang, count.get<std::int64_t>());
    }
  }
  return ledger;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary) {
  if (!out_) throw DataError("cannot write metrics log " + path.string());
}

void MetricsWriter::write(const StepMetrics& m) {
  json rec;
  rec["step"] = m.step;
  rec["stage"] = m.stage;
  rec["lr"] = m.lr;
  rec["loss_sum"] = m.loss_sum;
  rec["loss_mean"] = m.loss_mean;
  for (const auto& [lang, n] : m.tokens_per_lang) {
    rec["tokens_" + lang] = n;
  }
  out_ << rec.dump() << '\n';
}

std::int64_t resolve_stage_steps(const StageConfig& stage,
                                 std::int64_t batch_payload_tokens) {
  if (stage.steps > 0) return stage.steps;
  if (stage.declared_tokens <= 0) {
    throw ConfigError("stage '" + stage.name +
                      "' needs steps or declared_tokens");
  }
  return (stage.declared_tokens + batch_payload_tokens - 1) /
         batch_payload_tokens;
}

StageRunResult run_stage(const StageConfig& stage, const OptimConfig& optim,
                         ModelParams& params, Adam& adam, const Corpus& corpus,
                         const TrainOptions& opts, TokenBudgetLedger& ledger,
                         MetricsWriter* metrics, std::int64_t lr_offset,
                         std::int64_t lr_total, std::int64_t step_offset) {
  const ModelConfig& mc = params.config;
  const bool bos = corpus.vocab.bos_enabled;
  const std::int64_t payload_per_row = mc.context_len - (bos ? 1 : 0);
  const std::int64_t steps =
      resolve_stage_steps(stage, payload_per_row * opts.batch_rows);

  StreamSampler sampler(corpus, {stage.interleave_ratio, stage.lang_probability,
                                 stage.langs, opts.seed});
  Packer packer(mc.context_len,
                bos ? std::optional<TokenId>(corpus.vocab.bos_id())
                    : std::nullopt);

  GradientsT<float> grads(params.values.size());
  std::vector<TokenId> targets(static_cast<std::size_t>(mc.context_len));
  StageRunResult result;
  result.steps = steps;
  std::deque<double> tail;
  const std::size_t tail_window = 100;

  for (std::int64_t step = 1; step <= steps; ++step) {
    std::vector<PackedRow> rows;
    rows.reserve(static_cast<std::size_t>(opts.batch_rows));
    while (static_cast<int>(rows.size()) < opts.batch_rows) {
      while (!packer.row_ready()) packer.feed(sampler.next());
      rows.push_back(packer.pop_row());
    }

    grads.zero();
    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    for (const PackedRow& row : rows) {
      const auto len = row.tokens.size();
      for (std::size_t i = 0; i + 1 < len; ++i) targets[i] = row.tokens[i + 1];
      targets[len - 1] = -1;
      const NllResult r = backward<float>(
          params, row.tokens, std::span<const TokenId>(targets.data(), len),
          grads, /*sum_loss=*/true);
      loss_sum += r.sum;
      loss_count += r.count;
    }
    if (loss_count > 0) {
      const float inv = static_cast<float>(1.0 / static_cast<double>(loss_count));
      for (float& g : grads.values) g *= inv;
    }
    clip_gradients(grads, optim.grad_clip_norm);
    const double lr = lr_at(lr_offset + step, lr_total, optim);
    adam.step(params, grads, lr);

    StepMetrics m;
    m.step = step_offset + step;
    m.stage = stage.name;
    m.lr = lr;
    m.loss_sum = loss_sum;
    m.loss_mean = loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                 : 0.0;
    for (const auto& lang : corpus.languages) m.tokens_per_lang[lang] = 0;
    for (const PackedRow& row : rows) {
      for (const LangRun& run : row.lang_runs) {
        m.tokens_per_lang[run.lang] += run.count;
        ledger.add(stage.name, run.lang, run.count);
      }
    }
    if (metrics != nullptr) metrics->write(m);
    if (opts.echo_every > 0 && (step % opts.echo_every == 0 || step == steps)) {
      std::cerr << "  [" << stage.name << "] step " << step << "/" << steps
                << " lr " << lr << " loss " << m.loss_mean << "\n";
    }
    if (step == 1) result.first_loss_mean = m.loss_mean;
    result.last_loss_mean = m.loss_mean;
    tail.push_back(m.loss_mean);
    if (tail.size() > tail_window) tail.pop_front();
  }
  if (!tail.empty()) {
    double sum = 0.0;
    for (double x : tail) sum += x;
    result.tail_loss_mean = sum / static_cast<double>(tail.size());
  }
  return result;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::int64_t arm_declared_tokens(const ArmConfig& arm,
                                 std::int64_t batch_payload) {
  std::int64_t total = 0;
  for (const auto& stage : arm.stages) {
    total += stage.declared_tokens > 0
                 ? stage.declared_tokens
                 : resolve_stage_steps(stage, batch_payload) * batch_payload;
  }
  return total;
}

}  // namespace

std::vector<ArmResult> run_pipeline(const std::vector<ArmConfig>& arms,
                                    const ModelConfig& model_cfg,
                                    const OptimConfig& optim,
                                    const TrainOptions& opts,
                                    const Corpus& corpus,
                                    const std::filesystem::path& out_dir) {
  if (arms.empty()) throw ConfigError("no experiment arms configured");
  const bool bos = corpus.vocab.bos_enabled;
  const std::int64_t payload_per_row = model_cfg.context_len - (bos ? 1 : 0);
  const std::int64_t batch_payload = payload_per_row * opts.batch_rows;

  // Matched token budgets: all arms must declare the same exposure to
  // within one batch.
  std::int64_t min_budget = 0;
  std::int64_t max_budget = 0;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const std::int64_t budget = arm_declared_tokens(arms[i], batch_payload);
    if (i == 0) {
      min_budget = max_budget = budget;
    } else {
      min_budget = std::min(min_budget, budget);
      max_budget = std::max(max_budget, budget);
    }
  }
  if (max_budget - min_budget > batch_payload) {
    throw ConfigError("arm token budgets differ by more than one batch: " +
                      std::to_string(min_budget) + " vs " +
                      std::to_string(max_budget));
  }

  std::vector<ArmResult> results;
  for (const auto& arm : arms) {
    if (arm.stages.empty()) {
      throw ConfigError("arm '" + arm.name + "' has no stages");
    }
    const auto arm_dir = out_dir / "arms" / arm.name;
    std::filesystem::create_directories(arm_dir);

    ModelParams params = init_params<float>(model_cfg);
    Adam adam(params, optim);
    TokenBudgetLedger ledger;
    MetricsWriter metrics(arm_dir / "metrics.jsonl");

    std::int64_t total_steps = 0;
    for (const auto& stage : arm.stages) {
      total_steps += resolve_stage_steps(stage, batch_payload);
    }

    const std::uint64_t arm_seed = opts.seed ^ splitmix64(fnv1a(arm.name));
    std::int64_t done_steps = 0;
    double final_loss = 0.0;
    for (std::size_t si = 0; si < arm.stages.size(); ++si) {
      const StageConfig& stage = arm.stages[si];
      TrainOptions stage_opts = opts;
      stage_opts.seed = arm_seed ^ splitmix64(si + 1);
      const std::int64_t stage_steps = resolve_stage_steps(stage, batch_payload);
      const std::int64_t lr_offset = opts.restart_schedule ? 0 : done_steps;
      const std::int64_t lr_total =
          opts.restart_schedule ? stage_steps : total_steps;
      const StageRunResult r =
          run_stage(stage, optim, params, adam, corpus, stage_opts, ledger,
                    &metrics, lr_offset, lr_total, done_steps);
      done_steps += r.steps;
      final_loss = r.last_loss_mean;
      save_checkpoint(params,
                      arm_dir / ("stage" + std::to_string(si + 1) + "_" +
                                 stage.name + ".xlsm"),
                      stage_opts.seed);
    }

    const auto final_path = arm_dir / "final.xlsm";
    save_checkpoint(params, final_path, arm_seed);
    ledger.save(arm_dir / "ledger.json");

    const std::int64_t declared = arm_declared_tokens(arm, batch_payload);
    const std::int64_t consumed = ledger.grand_total();
    if (std::llabs(consumed - declared) > batch_payload) {
      throw DataError("arm '" + arm.name + "' consumed " +
                      std::to_string(consumed) + " tokens, declared " +
                      std::to_string(declared));
    }

    ArmResult res;
    res.name = arm.name;
    res.checkpoint = final_path;
    res.metrics_path = arm_dir / "metrics.jsonl";
    res.ledger = ledger;
    res.declared_tokens = declared;
    res.final_loss_mean = final_loss;
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace xlslm
