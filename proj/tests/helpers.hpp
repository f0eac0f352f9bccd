#pragma once

// Shared helpers for the unit suites: random tensors and a finite-difference
// harness for checking tape gradients of arbitrary expressions.

#include <cmath>
#include <functional>
#include <vector>

#include "dmem/rng.hpp"
#include "dmem/tensor.hpp"

namespace testhelp {

inline dmem::Tensor random_tensor(std::vector<size_t> shape, dmem::Rng& rng, double scale = 1.0) {
  dmem::Tensor t = dmem::Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

// Builds a scalar loss from leaves of the given inputs, then compares the
// tape's gradients against central finite differences. Returns
// max|g_ad − g_fd| / max(1e-8, |g_ad| + |g_fd|) over all input elements,
// with |.| the max-abs norm (same convention as grad_check).
using LossBuilder = std::function<dmem::Var(dmem::Tape&, const std::vector<dmem::Var>&)>;

inline double fd_rel_err(std::vector<dmem::Tensor> inputs, const LossBuilder& build,
                         double h = 1e-6) {
  auto eval = [&](bool want_grads, std::vector<dmem::Tensor>* grads) {
    dmem::Tape tape;
    std::vector<dmem::Var> vars;
    vars.reserve(inputs.size());
    for (const dmem::Tensor& t : inputs) vars.push_back(tape.leaf(t));
    dmem::Var loss = build(tape, vars);
    double v = tape.val(loss).data[0];
    if (want_grads) {
      tape.backward(loss);
      for (dmem::Var var : vars) grads->push_back(tape.grad(var));
    }
    return v;
  };

  std::vector<dmem::Tensor> analytic;
  eval(true, &analytic);

  double max_diff = 0.0, ad_norm = 0.0, fd_norm = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (size_t i = 0; i < inputs[k].size(); ++i) {
      double saved = inputs[k].data[i];
      inputs[k].data[i] = saved + h;
      double lp = eval(false, nullptr);
      inputs[k].data[i] = saved - h;
      double lm = eval(false, nullptr);
      inputs[k].data[i] = saved;
      double fd = (lp - lm) / (2.0 * h);
      double ad = analytic[k].data[i];
      max_diff = std::max(max_diff, std::abs(ad - fd));
      ad_norm = std::max(ad_norm, std::abs(ad));
      fd_norm = std::max(fd_norm, std::abs(fd));
    }
  }
  return max_diff / std::max(1e-8, ad_norm + fd_norm);
}

}  // namespace testhelp
