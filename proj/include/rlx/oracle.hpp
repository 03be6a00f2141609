// SPDX-License-Identifier: Apache-2.0
//
// Independent verification utilities: central finite-difference gradients
// and exhaustive search over small response spaces. These are the referees
// for every analytic gradient and trained policy in the test suites; they
// must never share code with the implementation paths they check.

#pragma once

#include <functional>
#include <vector>

#include "rlx/policy.hpp"
#include "rlx/toyworld.hpp"

namespace rlx {
namespace oracle {

using LossFn = std::function<double(const PolicyParams&)>;

// Central differences per coordinate over trainable blocks only; frozen
// entries stay zero. Throws InputError on a non-finite loss.
ParamVec finite_diff_grad(const LossFn& loss, const PolicyParams& params,
                          double step);

// Same, restricted to the given coordinates (used for spot checks during
// training where a full sweep would dominate the step cost).
ParamVec finite_diff_grad_coords(const LossFn& loss,
                                 const PolicyParams& params, double step,
                                 const std::vector<size_t>& coords);

// Norm-based agreement measure between an analytic and a numeric gradient:
// ||a - b|| / max(||a||, ||b||, floor).
double gradient_rel_error(const ParamVec& analytic, const ParamVec& numeric,
                          double floor = 1e-10);

struct BestResponse {
  TokenSeq tokens;
  double reward = 0.0;
};

// Exhaustive search over every token sequence of length <= max_len; returns
// the total-reward argmax (ties broken lexicographically). Throws InputError
// when vocab^max_len exceeds `budget`.
BestResponse enumerate_best_response(const TaskFamily& family,
                                     const Task& task, int max_len,
                                     uint64_t budget = 1u << 22);

}  // namespace oracle
}  // namespace rlx
