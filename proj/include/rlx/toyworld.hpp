// SPDX-License-Identifier: Apache-2.0
//
// Synthetic verifiable task generator plus the three reward channels that
// drive training: an exact-match rule check, a fixed synthetic reward model,
// and a structural format bonus. Everything here is a pure function of
// (task, response) once the family is constructed, so reward evaluation can
// fan out to any number of workers.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlx/rng.hpp"

namespace rlx {

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

struct Vocabulary {
  int size = 32;
  TokenId think_open = 26;
  TokenId think_close = 27;
  TokenId answer_open = 28;
  TokenId answer_close = 29;
  TokenId end = 30;

  bool is_special(TokenId t) const {
    return t == think_open || t == think_close || t == answer_open ||
           t == answer_close || t == end;
  }
};

struct Task {
  uint64_t seed = 0;
  int difficulty = 1;
  TokenSeq prompt_tokens;
  std::vector<double> visual_features;
  TokenSeq ground_truth_tokens;
};

// Per-response reward decomposition; total is always the plain sum of the
// three channels.
struct RewardBreakdown {
  double rule = 0.0;
  double model = 0.0;
  double format = 0.0;
  double total = 0.0;
};

struct TaskFamilyConfig {
  Vocabulary vocab;
  uint64_t family_seed = 1234;  // fixes feature embedding and scorer weights
  int modulus = 10;             // difficulty-1 modulus; answers are 1 digit
  int modulus2 = 16;            // difficulty-2 modulus; answers up to 2 digits
  int digit_span = 10;          // token ids 0..digit_span-1 are digit tokens
  int feature_dim = 8;
  int max_prompt_len = 12;
  int min_difficulty = 1;
  int max_difficulty = 2;
  double format_bonus = 0.5;

  TokenId plus_token() const { return digit_span; }
  // Throws ConfigError on inconsistent layout.
  void validate() const;
};

// Modular-addition tasks over a small shared vocabulary. The instance space
// is tiny on purpose: small enough that tests can brute-force every response
// and training runs close in seconds.
class TaskFamily {
 public:
  explicit TaskFamily(const TaskFamilyConfig& config);

  const TaskFamilyConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return config_.vocab; }

  // Deterministic per (seed, difficulty). Features encode the two operands
  // through a fixed random orthogonal mix so the instance is recoverable
  // from them but no token-level shortcut exists.
  Task generate_task(uint64_t rng_seed, int difficulty) const;

  // Same task construction with explicit operands; used by tests that need
  // a specific instance such as "3 + 4 mod 10".
  Task task_from_operands(int a, int b, int difficulty) const;

  // 1 if the span between the first answer_open and the following
  // answer_close equals the ground truth exactly, else 0. Malformed
  // responses score 0.
  double rule_reward(const Task& task, const TokenSeq& response) const;

  // format_bonus for think_open .. think_close answer_open .. answer_close
  // end, in order, with no stray special tokens and nothing after end.
  double format_reward(const TokenSeq& response) const;

  // Fixed (never trained) scorer in [0, 1]: a logistic over bag-of-token
  // features plus correctness-correlated features. Deterministic per
  // (task, response); stands in for a learned reward model, including its
  // noise.
  double model_reward(const Task& task, const TokenSeq& response) const;

  RewardBreakdown score(const Task& task, const TokenSeq& response) const;

  // The answer wrapped in the required delimiters; earns full rule and
  // format reward by construction.
  TokenSeq formatted_ground_truth(const Task& task) const;

 private:
  void operands_for_seed(uint64_t rng_seed, int difficulty, int* a_out,
                         int* b_out) const;

  TaskFamilyConfig config_;
  std::vector<double> feature_mix_;   // feature_dim x feature_dim, orthogonal
  std::vector<double> bag_weights_;   // vocab.size, fixed scorer weights
};

}  // namespace rlx
