// SPDX-License-Identifier: Apache-2.0

#include "rlx/policy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "rlx/errors.hpp"

namespace rlx {

namespace {

// Offsets for the flat layout; see PolicyParams doc.
struct Layout {
  size_t enc_w, enc_proj, adapter_w, adapter_b, emb, w1, b1, w2, b2, total;

  explicit Layout(const PolicyDims& d) {
    size_t at = 0;
    auto take = [&at](size_t n) {
      size_t begin = at;
      at += n;
      return begin;
    };
    enc_w = take(static_cast<size_t>(d.d_e) * d.d_v);
    enc_proj = take(static_cast<size_t>(d.d_e) * d.d_e);
    adapter_w = take(static_cast<size_t>(d.d_h) * d.d_e);
    adapter_b = take(static_cast<size_t>(d.d_h));
    emb = take(static_cast<size_t>(d.vocab) * d.d_emb);  // token-major rows
    w1 = take(static_cast<size_t>(d.hidden) * d.head_input_dim());
    b1 = take(static_cast<size_t>(d.hidden));
    w2 = take(static_cast<size_t>(d.vocab) * d.hidden);
    b2 = take(static_cast<size_t>(d.vocab));
    total = at;
  }
};

// y = M x for a rows x cols row-major matrix.
void matvec(const double* m, const double* x, double* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = m + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void log_softmax(const std::vector<double>& logits, std::vector<double>& out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  out.resize(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

// Forward state shared by logprob / sample / grad paths so that all of them
// produce bitwise-identical log-probabilities.
struct Forward {
  const PolicyParams& p;
  Layout lay;
  const Task& task;
  std::vector<double> enc;      // d_e
  std::vector<double> penc;     // d_e
  std::vector<double> context;  // d_h + d_emb
  std::vector<double> hist_pool;
  std::vector<double> u;        // head input
  std::vector<double> z;        // hidden
  std::vector<double> logits;   // vocab
  std::vector<double> logp;     // vocab
  int hist_len = 0;

  Forward(const PolicyParams& params, const Task& t)
      : p(params), lay(params.dims), task(t) {
    const auto& d = p.dims;
    if (static_cast<int>(t.visual_features.size()) != d.d_v)
      throw ConfigError("policy: visual feature dimension mismatch");
    for (TokenId tok : t.prompt_tokens)
      if (tok < 0 || tok >= d.vocab)
        throw InputError("policy: prompt token out of range");

    const double* v = p.values.data();
    enc.resize(d.d_e);
    matvec(v + lay.enc_w, t.visual_features.data(), enc.data(), d.d_e, d.d_v);
    penc.resize(d.d_e);
    matvec(v + lay.enc_proj, enc.data(), penc.data(), d.d_e, d.d_e);

    context.assign(d.context_dim(), 0.0);
    matvec(v + lay.adapter_w, penc.data(), context.data(), d.d_h, d.d_e);
    for (int i = 0; i < d.d_h; ++i) context[i] += v[lay.adapter_b + i];

    if (!t.prompt_tokens.empty()) {
      for (TokenId tok : t.prompt_tokens) {
        const double* row = v + lay.emb + static_cast<size_t>(tok) * d.d_emb;
        for (int k = 0; k < d.d_emb; ++k) context[d.d_h + k] += row[k];
      }
      const double inv = 1.0 / static_cast<double>(t.prompt_tokens.size());
      for (int k = 0; k < d.d_emb; ++k) context[d.d_h + k] *= inv;
    }

    hist_pool.assign(d.d_emb, 0.0);
    u.resize(d.head_input_dim());
    z.resize(d.hidden);
    logits.resize(d.vocab);
    logp.resize(d.vocab);
  }

  // Temperature-1 log-probabilities for the next token given the pooled
  // history accumulated so far.
  void step_logprobs() {
    const auto& d = p.dims;
    const double* v = p.values.data();
    std::copy(context.begin(), context.end(), u.begin());
    const double inv = hist_len > 0 ? 1.0 / hist_len : 0.0;
    for (int k = 0; k < d.d_emb; ++k)
      u[d.context_dim() + k] = hist_pool[k] * inv;

    matvec(v + lay.w1, u.data(), z.data(), d.hidden, d.head_input_dim());
    for (int h = 0; h < d.hidden; ++h) z[h] = std::tanh(z[h] + v[lay.b1 + h]);
    matvec(v + lay.w2, z.data(), logits.data(), d.vocab, d.hidden);
    for (int t = 0; t < d.vocab; ++t) logits[t] += v[lay.b2 + t];
    log_softmax(logits, logp);
  }

  void push_token(TokenId tok) {
    const auto& d = p.dims;
    const double* row =
        p.values.data() + lay.emb + static_cast<size_t>(tok) * d.d_emb;
    for (int k = 0; k < d.d_emb; ++k) hist_pool[k] += row[k];
    ++hist_len;
  }
};

}  // namespace

void PolicyDims::validate() const {
  if (vocab < 2) throw ConfigError("policy.vocab must be >= 2");
  if (end_token < 0 || end_token >= vocab)
    throw ConfigError("policy.end_token out of range");
  if (d_v < 1 || d_e < 1 || d_h < 1 || d_emb < 1 || hidden < 1)
    throw ConfigError("policy dims must be positive");
  if (d_e > d_v)
    throw ConfigError("policy: d_e must not exceed d_v (orthonormal rows)");
}

const char* freeze_config_name(FreezeConfig c) {
  switch (c) {
    case FreezeConfig::adapter_only:
      return "adapter_only";
    case FreezeConfig::head_plus_adapter:
      return "head_plus_adapter";
    case FreezeConfig::adapter_plus_encoder_forwardonly:
      return "adapter_plus_encoder_forwardonly";
  }
  return "unknown";
}

FreezeConfig freeze_config_from_name(const std::string& name) {
  if (name == "adapter_only") return FreezeConfig::adapter_only;
  if (name == "head_plus_adapter") return FreezeConfig::head_plus_adapter;
  if (name == "adapter_plus_encoder_forwardonly")
    return FreezeConfig::adapter_plus_encoder_forwardonly;
  throw ConfigError("unknown freeze configuration: " + name);
}

ParamRange PolicyParams::enc_w() const {
  Layout lay(dims);
  return {lay.enc_w, lay.enc_proj};
}
ParamRange PolicyParams::enc_proj() const {
  Layout lay(dims);
  return {lay.enc_proj, lay.adapter_w};
}
ParamRange PolicyParams::adapter() const {
  Layout lay(dims);
  return {lay.adapter_w, lay.emb};
}
ParamRange PolicyParams::head() const {
  Layout lay(dims);
  return {lay.emb, lay.total};
}

std::vector<ParamRange> PolicyParams::trainable_ranges() const {
  std::vector<ParamRange> out;
  if (freeze.encoder) out.push_back(enc_proj());
  if (freeze.adapter) out.push_back(adapter());
  if (freeze.head) out.push_back(head());
  return out;
}

size_t PolicyParams::trainable_count() const {
  size_t n = 0;
  for (const auto& r : trainable_ranges()) n += r.size();
  return n;
}

PolicyParams init_policy(const PolicyDims& dims, uint64_t seed,
                         FreezeConfig config) {
  dims.validate();
  Layout lay(dims);
  PolicyParams p;
  p.dims = dims;
  p.init_seed = seed;
  p.values.assign(lay.total, 0.0);

  Rng root(seed);
  Rng enc_rng = root.split(11);
  Rng init_rng = root.split(12);

  // Encoder: a fixed orthonormal-row matrix, never trained.
  {
    std::vector<double> g(static_cast<size_t>(dims.d_e) * dims.d_v);
    for (auto& x : g) x = enc_rng.next_gaussian();
    for (int i = 0; i < dims.d_e; ++i) {
      double* row = &g[static_cast<size_t>(i) * dims.d_v];
      for (int j = 0; j < i; ++j) {
        const double* prev = &g[static_cast<size_t>(j) * dims.d_v];
        double dot = 0.0;
        for (int k = 0; k < dims.d_v; ++k) dot += row[k] * prev[k];
        for (int k = 0; k < dims.d_v; ++k) row[k] -= dot * prev[k];
      }
      double norm = 0.0;
      for (int k = 0; k < dims.d_v; ++k) norm += row[k] * row[k];
      norm = std::sqrt(std::max(norm, 1e-12));
      for (int k = 0; k < dims.d_v; ++k) row[k] /= norm;
    }
    std::copy(g.begin(), g.end(), p.values.begin() + lay.enc_w);
  }

  // Encoder-side projection starts as the identity so it is a no-op until
  // the ablation that unfreezes it moves it.
  for (int i = 0; i < dims.d_e; ++i)
    p.values[lay.enc_proj + static_cast<size_t>(i) * dims.d_e + i] = 1.0;

  for (size_t i = lay.adapter_w; i < lay.total; ++i)
    p.values[i] = init_rng.next_uniform(-0.1, 0.1);

  return set_freeze(p, config);
}

PolicyParams set_freeze(const PolicyParams& params, FreezeConfig config) {
  PolicyParams out = params;
  switch (config) {
    case FreezeConfig::adapter_only:
      out.freeze = {false, true, false};
      break;
    case FreezeConfig::head_plus_adapter:
      out.freeze = {false, true, true};
      break;
    case FreezeConfig::adapter_plus_encoder_forwardonly:
      out.freeze = {true, true, false};
      break;
  }
  return out;
}

std::vector<double> forward_context(const PolicyParams& params,
                                    const Task& task) {
  Forward f(params, task);
  return f.context;
}

LogProbResult logprob(const PolicyParams& params, const Task& task,
                      const TokenSeq& tokens) {
  for (TokenId t : tokens)
    if (t < 0 || t >= params.dims.vocab)
      throw InputError("logprob: token id out of range");
  Forward f(params, task);
  LogProbResult r;
  r.per_token.reserve(tokens.size());
  for (TokenId t : tokens) {
    f.step_logprobs();
    r.per_token.push_back(f.logp[t]);
    r.total += f.logp[t];
    f.push_token(t);
  }
  return r;
}

std::vector<double> next_token_logprobs(const PolicyParams& params,
                                        const Task& task,
                                        const TokenSeq& prefix) {
  for (TokenId t : prefix)
    if (t < 0 || t >= params.dims.vocab)
      throw InputError("next_token_logprobs: token id out of range");
  Forward f(params, task);
  for (TokenId t : prefix) f.push_token(t);
  f.step_logprobs();
  return f.logp;
}

std::vector<Response> sample(const PolicyParams& params, const Task& task,
                             int n, double temperature, int max_len,
                             Rng& rng) {
  if (n < 1) throw InputError("sample: n must be >= 1");
  if (temperature < 0.0) throw InputError("sample: temperature must be >= 0");
  if (max_len < 1) throw InputError("sample: max_len must be >= 1");

  const auto& d = params.dims;
  std::vector<Response> out;
  out.reserve(n);
  std::vector<double> probs(d.vocab);

  for (int i = 0; i < n; ++i) {
    Forward f(params, task);
    Response resp;
    for (int t = 0; t < max_len; ++t) {
      f.step_logprobs();
      TokenId tok = 0;
      if (temperature == 0.0) {
        tok = static_cast<TokenId>(std::distance(
            f.logits.begin(),
            std::max_element(f.logits.begin(), f.logits.end())));
      } else {
        // Stable softmax at the sampling temperature; the recorded logprob
        // below stays at temperature 1.
        double mx = -1e300;
        for (int v = 0; v < d.vocab; ++v)
          mx = std::max(mx, f.logits[v] / temperature);
        double sum = 0.0;
        for (int v = 0; v < d.vocab; ++v) {
          probs[v] = std::exp(f.logits[v] / temperature - mx);
          sum += probs[v];
        }
        double u = rng.next_unit() * sum;
        int pick = d.vocab - 1;
        for (int v = 0; v < d.vocab; ++v) {
          u -= probs[v];
          if (u < 0.0) {
            pick = v;
            break;
          }
        }
        tok = pick;
      }
      resp.tokens.push_back(tok);
      resp.behavior_logprobs.push_back(f.logp[tok]);
      resp.total_logprob += f.logp[tok];
      if (tok == d.end_token) break;
      f.push_token(tok);
    }
    out.push_back(std::move(resp));
  }
  return out;
}

ParamVec grad_logprob(const PolicyParams& params, const Task& task,
                      const TokenSeq& tokens) {
  for (TokenId t : tokens)
    if (t < 0 || t >= params.dims.vocab)
      throw InputError("grad_logprob: token id out of range");

  const auto& d = params.dims;
  const Layout lay(d);
  const double* v = params.values.data();
  ParamVec grad(params.values.size(), 0.0);

  Forward f(params, task);
  std::vector<double> g(d.vocab);
  std::vector<double> dz(d.hidden);
  std::vector<double> du(d.head_input_dim());
  std::vector<double> dpenc(d.d_e);
  std::vector<double> dp_pool_total(d.d_emb, 0.0);
  std::vector<double> dv_ctx_total(d.d_h, 0.0);

  for (size_t ti = 0; ti < tokens.size(); ++ti) {
    const TokenId target = tokens[ti];
    f.step_logprobs();

    // dL/dlogits for L = log p(target): onehot - softmax.
    for (int k = 0; k < d.vocab; ++k) g[k] = -std::exp(f.logp[k]);
    g[target] += 1.0;

    for (int k = 0; k < d.vocab; ++k) {
      grad[lay.b2 + k] += g[k];
      double* w2row = grad.data() + lay.w2 + static_cast<size_t>(k) * d.hidden;
      for (int h = 0; h < d.hidden; ++h) w2row[h] += g[k] * f.z[h];
    }
    for (int h = 0; h < d.hidden; ++h) {
      double acc = 0.0;
      for (int k = 0; k < d.vocab; ++k)
        acc += v[lay.w2 + static_cast<size_t>(k) * d.hidden + h] * g[k];
      dz[h] = acc * (1.0 - f.z[h] * f.z[h]);
      grad[lay.b1 + h] += dz[h];
      double* w1row =
          grad.data() + lay.w1 + static_cast<size_t>(h) * d.head_input_dim();
      for (int j = 0; j < d.head_input_dim(); ++j) w1row[j] += dz[h] * f.u[j];
    }
    for (int j = 0; j < d.head_input_dim(); ++j) {
      double acc = 0.0;
      for (int h = 0; h < d.hidden; ++h)
        acc += v[lay.w1 + static_cast<size_t>(h) * d.head_input_dim() + j] *
               dz[h];
      du[j] = acc;
    }

    for (int i = 0; i < d.d_h; ++i) dv_ctx_total[i] += du[i];
    for (int k = 0; k < d.d_emb; ++k) dp_pool_total[k] += du[d.d_h + k];

    // History pooling: each previous token's embedding row receives an equal
    // share of the pooled gradient.
    if (f.hist_len > 0) {
      const double inv = 1.0 / f.hist_len;
      for (size_t s = 0; s < ti; ++s) {
        double* row =
            grad.data() + lay.emb + static_cast<size_t>(tokens[s]) * d.d_emb;
        for (int k = 0; k < d.d_emb; ++k)
          row[k] += du[d.context_dim() + k] * inv;
      }
    }
    f.push_token(target);
  }

  // Context paths are constant across steps, so their gradients apply once.
  for (int i = 0; i < d.d_h; ++i) {
    grad[lay.adapter_b + i] += dv_ctx_total[i];
    double* arow = grad.data() + lay.adapter_w + static_cast<size_t>(i) * d.d_e;
    for (int j = 0; j < d.d_e; ++j) arow[j] += dv_ctx_total[i] * f.penc[j];
  }
  for (int j = 0; j < d.d_e; ++j) {
    double acc = 0.0;
    for (int i = 0; i < d.d_h; ++i)
      acc += v[lay.adapter_w + static_cast<size_t>(i) * d.d_e + j] *
             dv_ctx_total[i];
    dpenc[j] = acc;
  }
  for (int i = 0; i < d.d_e; ++i) {
    double* prow = grad.data() + lay.enc_proj + static_cast<size_t>(i) * d.d_e;
    for (int j = 0; j < d.d_e; ++j) prow[j] += dpenc[i] * f.enc[j];
  }
  if (!task.prompt_tokens.empty()) {
    const double inv = 1.0 / static_cast<double>(task.prompt_tokens.size());
    for (TokenId q : task.prompt_tokens) {
      double* row = grad.data() + lay.emb + static_cast<size_t>(q) * d.d_emb;
      for (int k = 0; k < d.d_emb; ++k) row[k] += dp_pool_total[k] * inv;
    }
  }

  // Frozen blocks receive exactly zero entries.
  auto zero_range = [&grad](ParamRange r) {
    std::fill(grad.begin() + r.begin, grad.begin() + r.end, 0.0);
  };
  zero_range(params.enc_w());
  if (!params.freeze.encoder) zero_range(params.enc_proj());
  if (!params.freeze.adapter) zero_range(params.adapter());
  if (!params.freeze.head) zero_range(params.head());
  return grad;
}

}  // namespace rlx
