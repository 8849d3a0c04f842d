#include "xlslm/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "xlslm/errors.hpp"
#include "xlslm/rng.hpp"

namespace xlslm {

using nlohmann::json;

namespace {
constexpr double kNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("model vocab_size must be >= 2");
  if (embed_dim <= 0 || layers <= 0 || heads <= 0 || ff_mult <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (embed_dim % heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  if (context_len < 2) throw ConfigError("context_len must be >= 2");
}

template <typename S>
ModelParamsT<S>::ModelParamsT(const ModelConfig& cfg) : config(cfg) {
  cfg.validate();
  const int d = cfg.embed_dim;
  const int ff = cfg.ff_dim();
  std::size_t offset = 0;
  auto push = [&](const std::string& name, int rows, int cols, bool decay) {
    tensors_.push_back({name, offset, rows, cols, decay});
    offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  };
  push("embedding", cfg.vocab_size, d, true);
  push("pos_table", cfg.context_len, d, true);
  for (int l = 0; l < cfg.layers; ++l) {
    push(block_name(l, "ln1_gain"), 1, d, false);
    push(block_name(l, "wq"), d, d, true);
    push(block_name(l, "wk"), d, d, true);
    push(block_name(l, "wv"), d, d, true);
    push(block_name(l, "wo"), d, d, true);
    push(block_name(l, "ln2_gain"), 1, d, false);
    push(block_name(l, "w1"), d, ff, true);
    push(block_name(l, "w2"), ff, d, true);
  }
  push("final_gain", 1, d, false);
  push("output_proj", d, cfg.vocab_size, true);
  values.assign(offset, S(0));
}

template <typename S>
Eigen::Map<MatrixX<S>> ModelParamsT<S>::tensor(const std::string& name) {
  for (const auto& t : tensors_) {
    if (t.name == name) return tensor(t);
  }
  throw ConfigError("unknown tensor: " + name);
}

template <typename S>
Eigen::Map<const MatrixX<S>> ModelParamsT<S>::tensor(
    const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return tensor(t);
  }
  throw ConfigError("unknown tensor: " + name);
}

std::int64_t expected_parameter_count(const ModelConfig& cfg) {
  const std::int64_t v = cfg.vocab_size;
  const std::int64_t d = cfg.embed_dim;
  const std::int64_t ff = cfg.ff_dim();
  const std::int64_t m = cfg.layers;
  // E + positions + m blocks (two gains, four attention mats, two MLP mats)
  // + final gain + output projection.
  return v * d + cfg.context_len * d + m * (2 * d + 4 * d * d + 2 * d * ff) +
         d + d * v;
}

template <typename S>
ModelParamsT<S> init_params(const ModelConfig& cfg) {
  ModelParamsT<S> params(cfg);
  Rng rng(cfg.init_seed);
  const double base_std = 0.02;
  const double resid_std = base_std / std::sqrt(2.0 * cfg.layers);
  for (const auto& t : params.tensors()) {
    auto view = params.tensor(t);
    if (!t.weight_decay) {  // norm gains
      view.setConstant(S(1));
      continue;
    }
    const bool residual_out =
        t.name.ends_with(".wo") || t.name.ends_with(".w2");
    const double std = residual_out ? resid_std : base_std;
    for (int r = 0; r < t.rows; ++r) {
      for (int c = 0; c < t.cols; ++c) {
        view(r, c) = static_cast<S>(rng.normal() * std);
      }
    }
  }
  return params;
}

namespace {

template <typename S>
using ArrayV = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
MatrixX<S> rmsnorm(const MatrixX<S>& x, Eigen::Map<const MatrixX<S>> gain) {
  const int d = static_cast<int>(x.cols());
  ArrayV<S> inv_r =
      ((x.array().square().rowwise().sum() / S(d)) + S(kNormEps)).sqrt().inverse();
  MatrixX<S> y =
      ((x.array().colwise() * inv_r).rowwise() * gain.row(0).array()).matrix();
  return y;
}

// dL/dx and dL/dgain for y = x .* gain / rms(x).
template <typename S>
void rmsnorm_backward(const MatrixX<S>& x, Eigen::Map<const MatrixX<S>> gain,
                      const MatrixX<S>& dy, MatrixX<S>& dx,
                      Eigen::Map<MatrixX<S>> dgain) {
  const int d = static_cast<int>(x.cols());
  ArrayV<S> inv_r =
      ((x.array().square().rowwise().sum() / S(d)) + S(kNormEps)).sqrt().inverse();
  // gdy = gain .* dy, rowwise broadcast
  MatrixX<S> gdy = (dy.array().rowwise() * gain.row(0).array()).matrix();
  ArrayV<S> proj = (gdy.array() * x.array()).rowwise().sum();  // sum_k g_k dy_k x_k
  ArrayV<S> coef = proj * inv_r.cube() / S(d);
  dx = (gdy.array().colwise() * inv_r - x.array().colwise() * coef).matrix();
  dgain.row(0).array() +=
      ((dy.array() * x.array()).colwise() * inv_r).colwise().sum();
}

template <typename S>
S gelu_scalar(S x) {
  return S(0.5) * x * (S(1) + S(std::erf(static_cast<double>(x) * kInvSqrt2)));
}

template <typename S>
S gelu_grad_scalar(S x) {
  const double xd = static_cast<double>(x);
  const double cdf = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xd * xd);
  return static_cast<S>(cdf + xd * pdf);
}

template <typename S>
void apply_causal_mask(MatrixX<S>& scores) {
  const auto n = scores.rows();
  const S neg_inf = -std::numeric_limits<S>::infinity();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    scores.row(i).tail(n - 1 - i).setConstant(neg_inf);
  }
}

template <typename S>
MatrixX<S> softmax_rows(const MatrixX<S>& scores) {
  ArrayV<S> row_max = scores.rowwise().maxCoeff();
  MatrixX<S> p = (scores.array().colwise() - row_max).exp().matrix();
  ArrayV<S> row_sum = p.array().rowwise().sum();
  p = (p.array().colwise() / row_sum).matrix();
  return p;
}

template <typename S>
struct LayerCache {
  MatrixX<S> x_in;      // residual stream entering the block
  MatrixX<S> norm1;     // rmsnorm(x_in)
  MatrixX<S> q, k, v;   // projections of norm1
  std::vector<MatrixX<S>> attn_probs;  // per head, reused by backward
  MatrixX<S> attn_mix;  // concat of per-head softmax(QK^T)V
  MatrixX<S> x_mid;     // x_in + attn_mix @ wo
  MatrixX<S> norm2;     // rmsnorm(x_mid)
  MatrixX<S> ff_pre;    // norm2 @ w1
  MatrixX<S> ff_act;    // gelu(ff_pre)
};

template <typename S>
struct ForwardCache {
  std::vector<TokenId> tokens;
  MatrixX<S> embedded;
  std::vector<LayerCache<S>> layers;
  MatrixX<S> x_last;
  MatrixX<S> final_norm;
  MatrixX<S> logits;
};

template <typename S>
void check_inputs(const ModelParamsT<S>& params,
                  std::span<const TokenId> tokens) {
  if (tokens.empty()) throw DataError("empty token sequence");
  if (static_cast<int>(tokens.size()) > params.config.context_len) {
    throw DataError("sequence length " + std::to_string(tokens.size()) +
                    " exceeds context window " +
                    std::to_string(params.config.context_len));
  }
  for (TokenId t : tokens) {
    if (t < 0 || t >= params.config.vocab_size) {
      throw DataError("token id out of range: " + std::to_string(t));
    }
  }
}

template <typename S>
void run_forward(const ModelParamsT<S>& params, std::span<const TokenId> tokens,
                 ForwardCache<S>* cache, ForwardTraceT<S>* trace) {
  check_inputs(params, tokens);
  const ModelConfig& cfg = params.config;
  const int len = static_cast<int>(tokens.size());
  const int d = cfg.embed_dim;
  const int hd = cfg.head_dim();
  const S scale = S(1.0 / std::sqrt(static_cast<double>(hd)));

  MatrixX<S> x(len, d);
  auto emb = params.embedding();
  auto pos = params.pos_table();
  for (int i = 0; i < len; ++i) {
    x.row(i) = emb.row(tokens[i]) + pos.row(i);
  }

  if (cache != nullptr) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->embedded = x;
    cache->layers.resize(cfg.layers);
  }
  if (trace != nullptr) {
    trace->hidden.clear();
    trace->hidden.reserve(cfg.layers + 1);
    trace->hidden.push_back(x);
  }

  for (int l = 0; l < cfg.layers; ++l) {
    LayerCache<S> lc;
    lc.x_in = x;
    lc.norm1 = rmsnorm(x, params.ln1_gain(l));
    lc.q.noalias() = lc.norm1 * params.wq(l);
    lc.k.noalias() = lc.norm1 * params.wk(l);
    lc.v.noalias() = lc.norm1 * params.wv(l);

    lc.attn_mix.resize(len, d);
    if (cache != nullptr) lc.attn_probs.resize(cfg.heads);
    for (int h = 0; h < cfg.heads; ++h) {
      auto qh = lc.q.middleCols(h * hd, hd);
      auto kh = lc.k.middleCols(h * hd, hd);
      auto vh = lc.v.middleCols(h * hd, hd);
      MatrixX<S> scores = (qh * kh.transpose()) * scale;
      apply_causal_mask(scores);
      MatrixX<S> probs = softmax_rows(scores);
      lc.attn_mix.middleCols(h * hd, hd).noalias() = probs * vh;
      if (cache != nullptr) lc.attn_probs[h] = std::move(probs);
    }
    x.noalias() = lc.x_in + lc.attn_mix * params.wo(l);
    lc.x_mid = x;

    lc.norm2 = rmsnorm(x, params.ln2_gain(l));
    lc.ff_pre.noalias() = lc.norm2 * params.w1(l);
    lc.ff_act = lc.ff_pre.unaryExpr([](S t) { return gelu_scalar(t); });
    x.noalias() = lc.x_mid + lc.ff_act * params.w2(l);

    if (cache != nullptr) {
      cache->layers[l] = std::move(lc);
    }
    if (trace != nullptr) {
      trace->hidden.push_back(x);
    }
  }

  MatrixX<S> final_norm = rmsnorm(x, params.final_gain());
  MatrixX<S> logits;
  logits.noalias() = final_norm * params.output_proj();

  if (cache != nullptr) {
    cache->x_last = std::move(x);
    cache->final_norm = std::move(final_norm);
    cache->logits = logits;
  }
  if (trace != nullptr) {
    trace->logits = std::move(logits);
  }
}

}  // namespace

template <typename S>
ForwardTraceT<S> forward(const ModelParamsT<S>& params,
                         std::span<const TokenId> tokens) {
  ForwardTraceT<S> trace;
  run_forward<S>(params, tokens, nullptr, &trace);
  return trace;
}

template <typename S>
NllResult nll(const MatrixX<S>& logits, std::span<const TokenId> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw DataError("targets length does not match logits rows");
  }
  NllResult res;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const TokenId t = targets[i];
    if (t < 0) continue;
    if (t >= logits.cols()) throw DataError("target id out of range");
    const double row_max = static_cast<double>(logits.row(i).maxCoeff());
    double sum_exp = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      sum_exp += std::exp(static_cast<double>(logits(i, j)) - row_max);
    }
    const double lse = row_max + std::log(sum_exp);
    res.sum += lse - static_cast<double>(logits(i, t));
    res.count += 1;
  }
  if (res.count == 0) throw DataError("all positions masked in nll");
  res.mean = res.sum / static_cast<double>(res.count);
  return res;
}

namespace {

template <typename S>
Eigen::Map<MatrixX<S>> grad_view(GradientsT<S>& grads,
                                 const ModelParamsT<S>& params,
                                 const std::string& name) {
  for (const auto& t : params.tensors()) {
    if (t.name == name) {
      return {grads.values.data() + t.offset, t.rows, t.cols};
    }
  }
  throw ConfigError("unknown tensor: " + name);
}

}  // namespace

template <typename S>
NllResult backward(const ModelParamsT<S>& params,
                   std::span<const TokenId> tokens,
                   std::span<const TokenId> targets, GradientsT<S>& grads,
                   bool sum_loss) {
  if (targets.size() != tokens.size()) {
    throw DataError("targets length does not match tokens length");
  }
  if (grads.values.size() != params.values.size()) {
    throw DataError("gradient buffer shape mismatch");
  }
  const ModelConfig& cfg = params.config;

  ForwardCache<S> cache;
  run_forward<S>(params, tokens, &cache, nullptr);

  const int len = static_cast<int>(tokens.size());
  const int d = cfg.embed_dim;
  const int hd = cfg.head_dim();
  const S scale = S(1.0 / std::sqrt(static_cast<double>(hd)));

  NllResult res;
  for (int i = 0; i < len; ++i) {
    if (targets[i] >= cfg.vocab_size) throw DataError("target id out of range");
    if (targets[i] >= 0) res.count += 1;
  }
  if (res.count == 0) return res;  // nothing to train on, gradients untouched

  const S weight = sum_loss ? S(1) : S(1.0 / static_cast<double>(res.count));

  // dL/dlogits = softmax - onehot on unmasked rows, scaled by the loss weight.
  MatrixX<S> dlogits = MatrixX<S>::Zero(len, cfg.vocab_size);
  for (int i = 0; i < len; ++i) {
    const TokenId t = targets[i];
    if (t < 0) continue;
    const S row_max = cache.logits.row(i).maxCoeff();
    ArrayV<S> ex = (cache.logits.row(i).array() - row_max).exp().transpose();
    const S denom = ex.sum();
    res.sum += static_cast<double>(std::log(denom) + row_max -
                                   cache.logits(i, t));
    dlogits.row(i) = (ex / denom).transpose() * weight;
    dlogits(i, t) -= weight;
  }
  res.mean = res.sum / static_cast<double>(res.count);

  auto dU = grad_view(grads, params, "output_proj");
  dU.noalias() += cache.final_norm.transpose() * dlogits;
  MatrixX<S> dx;
  {
    MatrixX<S> dfinal;
    dfinal.noalias() = dlogits * params.output_proj().transpose();
    rmsnorm_backward(cache.x_last, params.final_gain(), dfinal, dx,
                     grad_view(grads, params, "final_gain"));
  }

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerCache<S>& lc = cache.layers[l];
    const auto bn = [&](const char* part) {
      return ModelParamsT<S>::block_name(l, part);
    };

    // feed-forward half: x_out = x_mid + gelu(norm2 @ w1) @ w2
    MatrixX<S> dff_act;
    dff_act.noalias() = dx * params.w2(l).transpose();
    grad_view(grads, params, bn("w2")).noalias() +=
        lc.ff_act.transpose() * dx;
    MatrixX<S> dff_pre =
        (dff_act.array() *
         lc.ff_pre.unaryExpr([](S t) { return gelu_grad_scalar(t); }).array())
            .matrix();
    grad_view(grads, params, bn("w1")).noalias() +=
        lc.norm2.transpose() * dff_pre;
    MatrixX<S> dnorm2;
    dnorm2.noalias() = dff_pre * params.w1(l).transpose();
    MatrixX<S> dx_mid;
    rmsnorm_backward(lc.x_mid, params.ln2_gain(l), dnorm2, dx_mid,
                     grad_view(grads, params, bn("ln2_gain")));
    dx_mid += dx;  // residual branch

    // attention half: x_mid = x_in + attn_mix @ wo
    grad_view(grads, params, bn("wo")).noalias() +=
        lc.attn_mix.transpose() * dx_mid;
    MatrixX<S> dmix;
    dmix.noalias() = dx_mid * params.wo(l).transpose();

    MatrixX<S> dq(len, d), dk(len, d), dv(len, d);
    for (int h = 0; h < cfg.heads; ++h) {
      auto qh = lc.q.middleCols(h * hd, hd);
      auto kh = lc.k.middleCols(h * hd, hd);
      auto vh = lc.v.middleCols(h * hd, hd);
      const MatrixX<S>& probs = lc.attn_probs[h];

      auto dmix_h = dmix.middleCols(h * hd, hd);
      MatrixX<S> dprobs;
      dprobs.noalias() = dmix_h * vh.transpose();
      dv.middleCols(h * hd, hd).noalias() = probs.transpose() * dmix_h;
      ArrayV<S> row_dot = (dprobs.array() * probs.array()).rowwise().sum();
      MatrixX<S> dscores =
          (probs.array() * (dprobs.array().colwise() - row_dot)).matrix();
      dq.middleCols(h * hd, hd).noalias() = dscores * kh * scale;
      dk.middleCols(h * hd, hd).noalias() = dscores.transpose() * qh * scale;
    }

    grad_view(grads, params, bn("wq")).noalias() += lc.norm1.transpose() * dq;
    grad_view(grads, params, bn("wk")).noalias() += lc.norm1.transpose() * dk;
    grad_view(grads, params, bn("wv")).noalias() += lc.norm1.transpose() * dv;
    MatrixX<S> dnorm1;
    dnorm1.noalias() = dq * params.wq(l).transpose();
    dnorm1.noalias() += dk * params.wk(l).transpose();
    dnorm1.noalias() += dv * params.wv(l).transpose();
    MatrixX<S> dx_in;
    rmsnorm_backward(lc.x_in, params.ln1_gain(l), dnorm1, dx_in,
                     grad_view(grads, params, bn("ln1_gain")));
    dx = dx_mid + dx_in;
  }

  auto demb = grad_view(grads, params, "embedding");
  auto dpos = grad_view(grads, params, "pos_table");
  for (int i = 0; i < len; ++i) {
    demb.row(tokens[i]) += dx.row(i);
    dpos.row(i) += dx.row(i);
  }
  return res;
}

template <typename S>
double sequence_logprob(const ModelParamsT<S>& params,
                        std::span<const TokenId> prompt,
                        std::span<const TokenId> continuation, bool normalize) {
  if (continuation.empty()) return 0.0;
  std::vector<TokenId> seq;
  seq.reserve(prompt.size() + continuation.size());
  seq.insert(seq.end(), prompt.begin(), prompt.end());
  seq.insert(seq.end(), continuation.begin(), continuation.end());
  if (static_cast<int>(seq.size()) > params.config.context_len) {
    throw DataError("prompt plus continuation exceeds context window");
  }

  // Token at absolute position p is predicted by the logits at p-1; with an
  // empty prompt the first continuation token has no context and is skipped.
  const std::size_t first = prompt.empty() ? 1 : prompt.size();
  if (first >= seq.size()) return 0.0;

  ForwardTraceT<S> trace = forward(params, std::span<const TokenId>(seq));
  double total = 0.0;
  std::int64_t scored = 0;
  for (std::size_t p = first; p < seq.size(); ++p) {
    const auto row = trace.logits.row(static_cast<Eigen::Index>(p - 1));
    const double row_max = static_cast<double>(row.maxCoeff());
    double sum_exp = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      sum_exp += std::exp(static_cast<double>(row(j)) - row_max);
    }
    total += static_cast<double>(row(seq[p])) - row_max - std::log(sum_exp);
    scored += 1;
  }
  if (normalize && scored > 0) total /= static_cast<double>(scored);
  return total;
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

constexpr char kMagic[4] = {'X', 'L', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);

  json cfg;
  cfg["vocab_size"] = params.config.vocab_size;
  cfg["embed_dim"] = params.config.embed_dim;
  cfg["layers"] = params.config.layers;
  cfg["heads"] = params.config.heads;
  cfg["ff_mult"] = params.config.ff_mult;
  cfg["context_len"] = params.config.context_len;
  cfg["init_seed"] = params.config.init_seed;
  const std::string cfg_str = cfg.dump();
  write_pod(out, static_cast<std::uint32_t>(cfg_str.size()));
  out.write(cfg_str.data(), static_cast<std::streamsize>(cfg_str.size()));
  write_pod(out, seed);

  write_pod(out, static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& t : params.tensors()) {
    write_pod(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(out, static_cast<std::uint32_t>(t.rows));
    write_pod(out, static_cast<std::uint32_t>(t.cols));
    const float* data = params.values.data() + t.offset;
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(sizeof(float) *
                                           static_cast<std::size_t>(t.rows) *
                                           static_cast<std::size_t>(t.cols)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path,
                            std::uint64_t* seed_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto cfg_len = read_pod<std::uint32_t>(in);
  std::string cfg_str(cfg_len, '\0');
  in.read(cfg_str.data(), cfg_len);
  if (!in) throw DataError("truncated checkpoint");
  json cfg = json::parse(cfg_str);

  ModelConfig config;
  config.vocab_size = cfg.at("vocab_size").get<int>();
  config.embed_dim = cfg.at("embed_dim").get<int>();
  config.layers = cfg.at("layers").get<int>();
  config.heads = cfg.at("heads").get<int>();
  config.ff_mult = cfg.at("ff_mult").get<int>();
  config.context_len = cfg.at("context_len").get<int>();
  config.init_seed = cfg.at("init_seed").get<std::uint64_t>();

  const auto seed = read_pod<std::uint64_t>(in);
  if (seed_out != nullptr) *seed_out = seed;

  ModelParams params(config);
  const auto tensor_count = read_pod<std::uint32_t>(in);
  if (tensor_count != params.tensors().size()) {
    throw DataError("checkpoint tensor registry does not match layout");
  }
  for (const auto& t : params.tensors()) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = read_pod<std::uint32_t>(in);
    const auto cols = read_pod<std::uint32_t>(in);
    if (!in || name != t.name || rows != static_cast<std::uint32_t>(t.rows) ||
        cols != static_cast<std::uint32_t>(t.cols)) {
      throw DataError("checkpoint tensor mismatch at " + t.name);
    }
    float* data = params.values.data() + t.offset;
    in.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(sizeof(float) *
                                         static_cast<std::size_t>(rows) *
                                         static_cast<std::size_t>(cols)));
    if (!in) throw DataError("truncated checkpoint at " + t.name);
  }
  return params;
}

template class ModelParamsT<float>;
template class ModelParamsT<double>;
template ModelParamsT<float> init_params<float>(const ModelConfig&);
template ModelParamsT<double> init_params<double>(const ModelConfig&);
template ForwardTraceT<float> forward<float>(const ModelParamsT<float>&,
                                             std::span<const TokenId>);
template ForwardTraceT<double> forward<double>(const ModelParamsT<double>&,
                                               std::span<const TokenId>);
template NllResult nll<float>(const MatrixX<float>&, std::span<const TokenId>);
template NllResult nll<double>(const MatrixX<double>&,
                               std::span<const TokenId>);
template NllResult backward<float>(const ModelParamsT<float>&,
                                   std::span<const TokenId>,
                                   std::span<const TokenId>, GradientsT<float>&,
                                   bool);
template NllResult backward<double>(const ModelParamsT<double>&,
                                    std::span<const TokenId>,
                                    std::span<const TokenId>,
                                    GradientsT<double>&, bool);
template double sequence_logprob<float>(const ModelParamsT<float>&,
                                        std::span<const TokenId>,
                                        std::span<const TokenId>, bool);
template double sequence_logprob<double>(const ModelParamsT<double>&,
                                         std::span<const TokenId>,
                                         std::span<const TokenId>, bool);

}  // namespace xlslm
