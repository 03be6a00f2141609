// SPDX-License-Identifier: Apache-2.0

#include "rlx/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "rlx/errors.hpp"

namespace rlx {
namespace oracle {

namespace {

double eval_or_throw(const LossFn& loss, const PolicyParams& p) {
  const double v = loss(p);
  if (!std::isfinite(v))
    throw InputError("finite_diff_grad: loss is not finite");
  return v;
}

}  // namespace

ParamVec finite_diff_grad(const LossFn& loss, const PolicyParams& params,
                          double step) {
  if (step <= 0.0) throw InputError("finite_diff_grad: step must be > 0");
  eval_or_throw(loss, params);

  ParamVec grad(params.size(), 0.0);
  PolicyParams probe = params;
  for (const auto& range : params.trainable_ranges()) {
    for (size_t i = range.begin; i < range.end; ++i) {
      const double saved = probe.values[i];
      probe.values[i] = saved + step;
      const double up = eval_or_throw(loss, probe);
      probe.values[i] = saved - step;
      const double down = eval_or_throw(loss, probe);
      probe.values[i] = saved;
      grad[i] = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

ParamVec finite_diff_grad_coords(const LossFn& loss,
                                 const PolicyParams& params, double step,
                                 const std::vector<size_t>& coords) {
  if (step <= 0.0) throw InputError("finite_diff_grad: step must be > 0");
  ParamVec grad(params.size(), 0.0);
  PolicyParams probe = params;
  for (size_t i : coords) {
    const double saved = probe.values[i];
    probe.values[i] = saved + step;
    const double up = eval_or_throw(loss, probe);
    probe.values[i] = saved - step;
    const double down = eval_or_throw(loss, probe);
    probe.values[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double gradient_rel_error(const ParamVec& analytic, const ParamVec& numeric,
                          double floor) {
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  const size_t n = std::max(analytic.size(), numeric.size());
  for (size_t i = 0; i < n; ++i) {
    const double a = i < analytic.size() ? analytic[i] : 0.0;
    const double b = i < numeric.size() ? numeric[i] : 0.0;
    diff2 += (a - b) * (a - b);
    a2 += a * a;
    n2 += b * b;
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), floor});
  return std::sqrt(diff2) / denom;
}

BestResponse enumerate_best_response(const TaskFamily& family,
                                     const Task& task, int max_len,
                                     uint64_t budget) {
  if (max_len < 0) throw InputError("enumerate_best_response: max_len < 0");
  const int vocab = family.vocab().size;
  // Reject when vocab^max_len overflows the budget.
  double count = 1.0;
  for (int i = 0; i < max_len; ++i) {
    count *= vocab;
    if (count > static_cast<double>(budget))
      throw InputError("enumerate_best_response: enumeration budget exceeded");
  }

  BestResponse best;
  best.tokens.clear();
  best.reward = family.score(task, best.tokens).total;

  TokenSeq seq;
  for (int len = 1; len <= max_len; ++len) {
    seq.assign(len, 0);
    while (true) {
      const double r = family.score(task, seq).total;
      if (r > best.reward ||
          (r == best.reward &&
           std::lexicographical_compare(seq.begin(), seq.end(),
                                        best.tokens.begin(),
                                        best.tokens.end()))) {
        best.reward = r;
        best.tokens = seq;
      }
      // odometer increment
      int pos = len - 1;
      while (pos >= 0) {
        if (++seq[pos] < vocab) break;
        seq[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }
  return best;
}

}  // namespace oracle
}  // namespace rlx
