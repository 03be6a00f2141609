// SPDX-License-Identifier: Apache-2.0

#include "rlx/toyworld.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>

#include "rlx/errors.hpp"

namespace rlx {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gram-Schmidt over the rows of a square gaussian matrix.
std::vector<double> random_orthogonal(int n, Rng& rng) {
  std::vector<double> m(static_cast<size_t>(n) * n);
  for (auto& v : m) v = rng.next_gaussian();
  for (int i = 0; i < n; ++i) {
    double* row = &m[static_cast<size_t>(i) * n];
    for (int j = 0; j < i; ++j) {
      const double* prev = &m[static_cast<size_t>(j) * n];
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += row[k] * prev[k];
      for (int k = 0; k < n; ++k) row[k] -= dot * prev[k];
    }
    double norm = 0.0;
    for (int k = 0; k < n; ++k) norm += row[k] * row[k];
    norm = std::sqrt(std::max(norm, 1e-12));
    for (int k = 0; k < n; ++k) row[k] /= norm;
  }
  return m;
}

// Base-10 digit tokens, most significant first. Digit d is token id d.
TokenSeq digit_tokens(int value) {
  if (value < 10) return {value};
  return {value / 10, value % 10};
}

}  // namespace

void TaskFamilyConfig::validate() const {
  if (digit_span < 2 || digit_span > 10)
    throw ConfigError("family.digit_span must be in [2, 10]");
  if (modulus < 2 || modulus > digit_span)
    throw ConfigError("family.modulus must be in [2, digit_span]");
  if (modulus2 < 2 || modulus2 > 99)
    throw ConfigError("family.modulus2 must be in [2, 99]");
  if (max_difficulty >= 2 && digit_span != 10)
    throw ConfigError("family: difficulty 2 needs the full digit_span of 10");
  if (feature_dim < 8) throw ConfigError("family.feature_dim must be >= 8");
  if (min_difficulty < 1 || max_difficulty > 2 ||
      min_difficulty > max_difficulty)
    throw ConfigError("family difficulty range must lie within [1, 2]");
  if (format_bonus < 0.0) throw ConfigError("family.format_bonus must be >= 0");
  if (max_prompt_len < 5) throw ConfigError("family.max_prompt_len must be >= 5");

  if (vocab.size < digit_span + 6)
    throw ConfigError("vocab.size too small for digits, operator and specials");
  const TokenId specials[] = {vocab.think_open, vocab.think_close,
                              vocab.answer_open, vocab.answer_close, vocab.end};
  std::set<TokenId> seen;
  for (TokenId t : specials) {
    if (t < 0 || t >= vocab.size)
      throw ConfigError("vocab: special token id out of range");
    if (t <= digit_span)
      throw ConfigError("vocab: special token collides with digits/operator");
    if (!seen.insert(t).second)
      throw ConfigError("vocab: special token ids must be distinct");
  }
}

TaskFamily::TaskFamily(const TaskFamilyConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.family_seed);
  Rng mix_rng = rng.split(1);
  Rng bag_rng = rng.split(2);
  feature_mix_ = random_orthogonal(config_.feature_dim, mix_rng);
  bag_weights_.resize(config_.vocab.size);
  for (auto& w : bag_weights_) w = bag_rng.next_gaussian();
}

void TaskFamily::operands_for_seed(uint64_t rng_seed, int difficulty,
                                   int* a_out, int* b_out) const {
  Rng rng(mix_seed(config_.family_seed) ^ rng_seed);
  Rng op_rng = rng.split(static_cast<uint64_t>(difficulty));
  const int mod = difficulty == 1 ? config_.modulus : config_.modulus2;
  *a_out = op_rng.next_int(0, mod - 1);
  *b_out = op_rng.next_int(0, mod - 1);
}

Task TaskFamily::generate_task(uint64_t rng_seed, int difficulty) const {
  if (difficulty < config_.min_difficulty ||
      difficulty > config_.max_difficulty)
    throw ConfigError("generate_task: difficulty out of configured range");
  int a = 0, b = 0;
  operands_for_seed(rng_seed, difficulty, &a, &b);
  Task task = task_from_operands(a, b, difficulty);
  task.seed = rng_seed;
  return task;
}

Task TaskFamily::task_from_operands(int a, int b, int difficulty) const {
  if (difficulty < config_.min_difficulty ||
      difficulty > config_.max_difficulty)
    throw ConfigError("task_from_operands: difficulty out of configured range");
  const int mod = difficulty == 1 ? config_.modulus : config_.modulus2;
  if (a < 0 || a >= mod || b < 0 || b >= mod)
    throw ConfigError("task_from_operands: operand out of range");
  const int answer = (a + b) % mod;

  Task task;
  task.difficulty = difficulty;

  // Prompt spells out "a + b"; the modulus is a family constant.
  auto append = [&task](const TokenSeq& toks) {
    task.prompt_tokens.insert(task.prompt_tokens.end(), toks.begin(),
                              toks.end());
  };
  append(digit_tokens(a));
  task.prompt_tokens.push_back(config_.plus_token());
  append(digit_tokens(b));
  assert(static_cast<int>(task.prompt_tokens.size()) <= config_.max_prompt_len);

  task.ground_truth_tokens = digit_tokens(answer);

  // Angular encoding of both operands plus their sum, mixed by a fixed
  // orthogonal matrix. Injective in (a, b); the sum channels keep the answer
  // reachable through an affine context map, which makes adapter-side
  // alignment rather than raw capacity the bottleneck.
  const double aa = kTwoPi * a / mod;
  const double ab = kTwoPi * b / mod;
  std::vector<double> raw(config_.feature_dim, 0.0);
  raw[0] = std::cos(aa);
  raw[1] = std::sin(aa);
  raw[2] = std::cos(ab);
  raw[3] = std::sin(ab);
  raw[4] = std::cos(aa + ab);
  raw[5] = std::sin(aa + ab);
  raw[6] = 1.0;
  raw[7] = static_cast<double>(a - b) / mod;

  const int d = config_.feature_dim;
  task.visual_features.assign(d, 0.0);
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j)
      acc += feature_mix_[static_cast<size_t>(i) * d + j] * raw[j];
    task.visual_features[i] = acc;
  }
  return task;
}

double TaskFamily::rule_reward(const Task& task,
                               const TokenSeq& response) const {
  const auto& v = config_.vocab;
  auto open = std::find(response.begin(), response.end(), v.answer_open);
  if (open == response.end()) return 0.0;
  auto close = std::find(open + 1, response.end(), v.answer_close);
  if (close == response.end()) return 0.0;
  const TokenSeq span(open + 1, close);
  return span == task.ground_truth_tokens ? 1.0 : 0.0;
}

double TaskFamily::format_reward(const TokenSeq& response) const {
  const auto& v = config_.vocab;
  size_t i = 0;
  const size_t n = response.size();
  auto skip_plain = [&]() {
    while (i < n && !v.is_special(response[i])) ++i;
  };
  if (i >= n || response[i] != v.think_open) return 0.0;
  ++i;
  skip_plain();
  if (i >= n || response[i] != v.think_close) return 0.0;
  ++i;
  if (i >= n || response[i] != v.answer_open) return 0.0;
  ++i;
  skip_plain();
  if (i >= n || response[i] != v.answer_close) return 0.0;
  ++i;
  if (i >= n || response[i] != v.end) return 0.0;
  ++i;
  if (i != n) return 0.0;  // nothing may follow end
  return config_.format_bonus;
}

double TaskFamily::model_reward(const Task& task,
                                const TokenSeq& response) const {
  const auto& v = config_.vocab;
  // Bag-of-token features, length-normalized.
  double bag = 0.0;
  if (!response.empty()) {
    for (TokenId t : response) {
      if (t >= 0 && t < v.size) bag += bag_weights_[t];
    }
    bag /= static_cast<double>(response.size());
  }

  // Correctness-correlated features: exact-match flag, format flag, and the
  // fraction of ground-truth tokens present in the answer span.
  const double rule = rule_reward(task, response);
  const double fmt_ok = format_reward(response) > 0.0 ? 1.0 : 0.0;
  double overlap = 0.0;
  auto open = std::find(response.begin(), response.end(), v.answer_open);
  if (open != response.end()) {
    auto close = std::find(open + 1, response.end(), v.answer_close);
    if (close != response.end()) {
      TokenSeq span(open + 1, close);
      int hit = 0;
      for (TokenId t : task.ground_truth_tokens) {
        auto it = std::find(span.begin(), span.end(), t);
        if (it != span.end()) {
          ++hit;
          span.erase(it);
        }
      }
      overlap = static_cast<double>(hit) /
                static_cast<double>(task.ground_truth_tokens.size());
    }
  }
  return sigmoid(0.6 * bag + 1.5 * rule + 0.5 * fmt_ok + 1.0 * overlap - 1.5);
}

RewardBreakdown TaskFamily::score(const Task& task,
                                  const TokenSeq& response) const {
  RewardBreakdown r;
  r.rule = rule_reward(task, response);
  r.model = model_reward(task, response);
  r.format = format_reward(response);
  r.total = r.rule + r.model + r.format;
  return r;
}

TokenSeq TaskFamily::formatted_ground_truth(const Task& task) const {
  const auto& v = config_.vocab;
  TokenSeq out;
  out.push_back(v.think_open);
  out.push_back(v.think_close);
  out.push_back(v.answer_open);
  out.insert(out.end(), task.ground_truth_tokens.begin(),
             task.ground_truth_tokens.end());
  out.push_back(v.answer_close);
  out.push_back(v.end);
  return out;
}

}  // namespace rlx
