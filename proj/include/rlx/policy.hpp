// SPDX-License-Identifier: Apache-2.0
//
// The tiny modular policy: a frozen feature encoder, a trainable adapter and
// a small autoregressive softmax head over [context | pooled history]. All
// log-probabilities are exact and gradients are analytic, which keeps the
// training losses finite-difference checkable end to end.
//
// PolicyParams is an immutable-by-convention value type: training code takes
// snapshots by copy and every update produces a new value, so sampling
// against a snapshot is safe from any number of workers.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rlx/rng.hpp"
#include "rlx/toyworld.hpp"

namespace rlx {

struct PolicyDims {
  int vocab = 32;
  TokenId end_token = 30;
  int d_v = 8;    // visual feature dim
  int d_e = 8;    // encoder output dim (requires d_e <= d_v)
  int d_h = 16;   // adapter output dim
  int d_emb = 8;  // token embedding dim used for pooling
  int hidden = 32;

  int context_dim() const { return d_h + d_emb; }
  int head_input_dim() const { return d_h + 2 * d_emb; }
  void validate() const;
};

// Per-block trainability. The raw encoder matrix is never trainable in any
// configuration; the encoder bit gates only the encoder-side projection that
// emulates the "adapter + vision encoder" ablation.
struct FreezeMask {
  bool encoder = false;
  bool adapter = true;
  bool head = false;

  bool operator==(const FreezeMask&) const = default;
};

enum class FreezeConfig {
  adapter_only,
  head_plus_adapter,
  adapter_plus_encoder_forwardonly,
};

const char* freeze_config_name(FreezeConfig c);
FreezeConfig freeze_config_from_name(const std::string& name);

// Sampled token sequence plus per-token log-probabilities captured under the
// sampling-time policy at temperature 1.
struct Response {
  TokenSeq tokens;
  std::vector<double> behavior_logprobs;
  double total_logprob = 0.0;
};

struct ParamRange {
  size_t begin = 0;
  size_t end = 0;
  size_t size() const { return end - begin; }
};

// Flat parameter storage with named block ranges. Layout order:
// enc_w, enc_proj, adapter_w, adapter_b, emb, w1, b1, w2, b2.
struct PolicyParams {
  PolicyDims dims;
  FreezeMask freeze;
  uint64_t init_seed = 0;
  std::vector<double> values;

  ParamRange enc_w() const;
  ParamRange enc_proj() const;
  ParamRange adapter() const;  // weights followed by bias
  ParamRange head() const;     // emb, w1, b1, w2, b2
  size_t size() const { return values.size(); }

  // Ranges whose parameters move under the current freeze mask.
  std::vector<ParamRange> trainable_ranges() const;
  size_t trainable_count() const;
};

using ParamVec = std::vector<double>;

struct LogProbResult {
  double total = 0.0;
  std::vector<double> per_token;
};

// Seed-stable initialization: orthonormal rows for the encoder, identity for
// the encoder-side projection, uniform(-0.1, 0.1) for everything trainable.
PolicyParams init_policy(const PolicyDims& dims, uint64_t seed,
                         FreezeConfig config = FreezeConfig::adapter_only);

PolicyParams set_freeze(const PolicyParams& params, FreezeConfig config);

// Adapted visual features concatenated with mean-pooled prompt embeddings.
std::vector<double> forward_context(const PolicyParams& params,
                                    const Task& task);

// Exact autoregressive log-probability of `tokens` given the task context.
LogProbResult logprob(const PolicyParams& params, const Task& task,
                      const TokenSeq& tokens);

// Next-token log-probabilities (temperature 1) after `prefix`; exposed for
// distribution-level checks and the exact KL penalty.
std::vector<double> next_token_logprobs(const PolicyParams& params,
                                        const Task& task,
                                        const TokenSeq& prefix);

// Ancestral sampling, truncated at the end token or max_len. temperature 0
// selects the argmax (greedy) mode; behavior logprobs are recorded at
// temperature 1 regardless.
std::vector<Response> sample(const PolicyParams& params, const Task& task,
                             int n, double temperature, int max_len, Rng& rng);

// Gradient of total logprob over trainable blocks; frozen blocks are exactly
// zero. Same result layout as PolicyParams::values.
ParamVec grad_logprob(const PolicyParams& params, const Task& task,
                      const TokenSeq& tokens);

}  // namespace rlx
