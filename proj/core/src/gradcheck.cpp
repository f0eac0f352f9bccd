#include "dmem/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dmem {

GradCheckReport grad_check(ParamStore& params, const LossFn& f, double h, double tol) {
  if (h <= 0.0) throw DomainError("grad_check: step must be positive");

  double l0 = f(params, nullptr);
  double l1 = f(params, nullptr);
  if (l0 != l1) throw ContractError("grad_check: loss is non-deterministic");

  ParamStore analytic = params.zeros_like();
  f(params, &analytic);

  GradCheckReport report;
  for (const std::string& name : params.names()) {
    Tensor& p = params.at(name);
    const Tensor& g = analytic.at(name);
    GradCheckGroup group{name, 0.0, true};
    double max_diff = 0.0, ad_norm = 0.0, fd_norm = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      double saved = p.data[i];
      p.data[i] = saved + h;
      double lp = f(params, nullptr);
      p.data[i] = saved - h;
      double lm = f(params, nullptr);
      p.data[i] = saved;
      double fd = (lp - lm) / (2.0 * h);
      double ad = g.data[i];
      max_diff = std::max(max_diff, std::abs(ad - fd));
      ad_norm = std::max(ad_norm, std::abs(ad));
      fd_norm = std::max(fd_norm, std::abs(fd));
    }
    group.max_rel_err = max_diff / std::max(1e-8, ad_norm + fd_norm);
    group.pass = group.max_rel_err < tol;
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.pass = report.pass && group.pass;
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace dmem
