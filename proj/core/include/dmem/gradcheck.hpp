#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dmem/params.hpp"

namespace dmem {

// Loss callback: computes the scalar loss at the given parameters and, when
// `grads_out` is non-null, accumulates analytic gradients into it.
using LossFn = std::function<double(const ParamStore& params, ParamStore* grads_out)>;

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  bool pass = true;
  double max_rel_err = 0.0;
};

// Central finite differences against the analytic gradient, per parameter
// tensor (group). Relative error per group is
// max|g_ad − g_fd| / max(1e-8, |g_ad| + |g_fd|) with |.| the max-abs norm
// over the group's elements. Throws ContractError if two forward evaluations
// at the same point disagree (non-deterministic loss).
GradCheckReport grad_check(ParamStore& params, const LossFn& f, double h, double tol);

}  // namespace dmem
